import json
from collections import Counter

import pytest

from dadebug.corpus import GenSpec, generate_corpus
from dadebug.errors import DataError
from dadebug.explain import (
    MAX_EXAMPLES_PER_GROUP,
    build_report,
    decision_paths,
    explain_response,
    group_explanations,
)
from dadebug.features import FeatureSchema, Vocabulary, extract, featurize
from dadebug.forest import Hyperparams, predict, train_forest
from dadebug.taxonomy import ChatbotDA, UserDA
from dadebug.transcript import Appropriateness, load_transcripts

from conftest import DATA, dialogue

I, N, A = Appropriateness.INAPPROPRIATE, Appropriateness.NEUTRAL, Appropriateness.APPROPRIATE


@pytest.fixture(scope="module")
def dance():
    return load_transcripts(DATA / "dance_request.jsonl")[0]


def _gold_predictions(dialogues):
    return {(d.id, t): d.utterances[t].gold_label for d in dialogues for t in d.chatbot_turns()}


def test_dance_answer_handled_as_request(dance, ruleset):
    e = explain_response(dance, 2, I, ruleset.compatibility)
    assert e.pair == (UserDA.ANSWER_RELEVANT, ChatbotDA.HANDLE_REQUEST)
    assert not e.compatible
    assert set(e.expected_das) == {ChatbotDA.RESPOND_RELEVANT, ChatbotDA.ACKNOWLEDGE, ChatbotDA.ASK_FOLLOWUP}
    assert "user-answer-relevant" in e.narrative and "chatbot-handle-user-request" in e.narrative
    assert [c[0] for c in e.context] == [0, 1, 2, 3]


def test_gibberish_acknowledged(ruleset):
    (d,) = load_transcripts(DATA / "gibberish_ack.jsonl")
    e = explain_response(d, 2, I, ruleset.compatibility)
    assert e.pair == (UserDA.GIBBERISH, ChatbotDA.ACKNOWLEDGE) and not e.compatible
    assert ChatbotDA.HANDLE_GIBBERISH in e.expected_das


def test_no_user_context(dance):
    e = explain_response(dance, 0, I)
    assert e.user_da is None and e.compatible and e.expected_das == ()
    assert "no user context" in e.narrative


def test_verdict_and_expected_follow_the_matrix(dance, ruleset):
    m = ruleset.compatibility
    for t in dance.chatbot_turns()[1:]:
        e = explain_response(dance, t, I, m)
        assert e.compatible == ruleset.is_compatible(e.user_da, e.chatbot_da)
        assert set(e.expected_das) == m[e.user_da]


def test_vote_margin_from_prediction(dance):
    e = explain_response(dance, 2, (I, {I: 300, N: 120, A: 80}))
    assert e.label is I and e.vote_margin == 180
    assert explain_response(dance, 2, "inappropriate").vote_margin is None


def test_errors_on_unannotated_or_wrong_turn(dance):
    with pytest.raises(DataError, match="not a chatbot turn"):
        explain_response(dance, 1, I)
    bare = dialogue([("chatbot", "q?", None, None), ("user", "x", None, None), ("chatbot", "ok", None, None)])
    with pytest.raises(DataError):
        explain_response(bare, 2, I)


def test_zero_flagged_gives_summary_only(dance):
    predictions = {(dance.id, t): N for t in dance.chatbot_turns()}
    doc = json.loads(build_report([dance], predictions, [], format="json"))
    assert doc["groups"] == [] and doc["summary"]["flagged"] == 0
    assert doc["summary"]["per_label"] == {"inappropriate": 0, "neutral": 3, "appropriate": 0}
    md = build_report([dance], predictions, [])
    assert "Flagged 0 of 3 responses." in md and "##" not in md


def test_shared_pair_forms_one_group():
    d = dialogue([
        ("chatbot", "q?", "chatbot-other", "neutral"),
        ("user", "dance", "user-answer-relevant", None),
        ("chatbot", "I can't.", "chatbot-handle-user-request", "inappropriate"),
        ("chatbot", "q?", "chatbot-other", "neutral"),
        ("user", "reading", "user-answer-relevant", None),
        ("chatbot", "I can't.", "chatbot-handle-user-request", "inappropriate"),
    ])
    explanations = [explain_response(d, t, I) for t in (2, 5)]
    (name, items), = group_explanations(explanations)
    assert name == "user-answer-relevant -> chatbot-handle-user-request" and len(items) == 2


def test_group_order_and_missing_prediction(dance):
    predictions = _gold_predictions([dance])
    explanations = [explain_response(dance, t, I) for t in (2, 3)]
    names = [n for n, _ in group_explanations(explanations)]
    assert names == sorted(names)  # equal sizes fall back to pair name
    del predictions[(dance.id, 0)]
    with pytest.raises(DataError):
        build_report([dance], predictions, explanations)


def test_report_is_deterministic_and_capped():
    corpus = generate_corpus(GenSpec(120, seed=5))
    predictions = _gold_predictions(corpus)
    flagged = [(d, t) for d in corpus for t in d.chatbot_turns() if predictions[(d.id, t)] is I]
    explanations = [explain_response(d, t, I) for d, t in flagged]
    md = build_report(corpus, predictions, explanations)
    assert md == build_report(corpus, predictions, [explain_response(d, t, I) for d, t in flagged])
    doc = json.loads(build_report(corpus, predictions, explanations, format="json"))
    assert all(len(g["examples"]) <= MAX_EXAMPLES_PER_GROUP for g in doc["groups"])
    counts = [g["count"] for g in doc["groups"]]
    assert counts == sorted(counts, reverse=True)
    assert sum(counts) == doc["summary"]["flagged"] == len(flagged)


def test_unknown_format_rejected(dance):
    with pytest.raises(ValueError):
        build_report([dance], _gold_predictions([dance]), [], format="html")


def test_planted_pair_frequencies_among_true_positives():
    corpus = generate_corpus(GenSpec(300, seed=9))
    train, test = corpus[:200], corpus[200:]
    schema = FeatureSchema(Vocabulary(()))
    ds = featurize(train, schema)
    model = train_forest(ds.X, ds.y, Hyperparams(n_trees=30, seed=1), schema_fingerprint=schema.fingerprint)

    true_positives, planted = [], Counter()
    for d in test:
        for t in d.chatbot_turns():
            label, votes = predict(model, extract(d, t, schema))
            if label is I and d.utterances[t].gold_label is I:
                true_positives.append(explain_response(d, t, (label, votes)))
                user = next(u for u in reversed(d.utterances[:t]) if u.is_user)
                planted[f"{user.user_da.value} -> {d.utterances[t].chatbot_da.value}"] += 1
    assert not any(e.compatible for e in true_positives)
    grouped = Counter({name: len(items) for name, items in group_explanations(true_positives)})
    assert sum(planted.values()) > 20
    assert grouped == planted


def test_decision_paths_appendix(dance):
    corpus = generate_corpus(GenSpec(40, seed=2))
    schema = FeatureSchema(Vocabulary(()))
    ds = featurize(corpus, schema)
    model = train_forest(ds.X, ds.y, Hyperparams(n_trees=4, seed=0), schema_fingerprint=schema.fingerprint)
    vector = extract(dance, 2, schema)
    paths = decision_paths(model, vector, schema.column_names(), max_trees=2)
    assert [p["tree"] for p in paths] == [0, 1]
    names = set(schema.column_names())
    assert all(s["feature"] in names for p in paths for s in p["steps"])
    label, votes = predict(model, vector)
    assert explain_response(dance, 2, (label, votes), paths=paths).to_dict()["decision_paths"] == list(paths)
    e = explain_response(dance, 2, I, paths=paths)
    assert "tree 0:" in build_report([dance], {(dance.id, t): I for t in dance.chatbot_turns()}, [e])
