"""Generate a synthetic corpus, train a forest, evaluate it and report flagged replies.

Run with ``python demos/02_train_and_evaluate.py``. Takes a few seconds.
"""

# %% Generate 200 interview dialogues. About 15% of chatbot replies are
# planted DA mismatches and carry the gold label "inappropriate".
from collections import Counter

import numpy as np

from dadebug.cli import split_dialogues
from dadebug.corpus import GenSpec, generate_corpus
from dadebug.explain import build_report, explain_response
from dadebug.features import FeatureSchema, build_vocabulary, featurize
from dadebug.forest import Hyperparams, grid_search, train_forest
from dadebug.metrics import evaluate
from dadebug.tagger import annotate_all
from dadebug.taxonomy import default_ruleset
from dadebug.transcript import CLASS_ORDER, Appropriateness

corpus = generate_corpus(GenSpec(200, seed=11))
labels = Counter(u.gold_label.value for d in corpus for u in d.utterances if u.is_chatbot)
print("gold labels:", dict(labels))

# %% Re-tag the user turns with the heuristic tagger, as one would for new
# transcripts. Chatbot DAs written by the designer are kept.
rules = default_ruleset()
annotated = annotate_all(corpus, rules)

# %% Split by dialogue, build the vocabulary on the training split and
# featurize every chatbot reply.
train, dev, test = split_dialogues(annotated, seed=11)
schema = FeatureSchema(build_vocabulary(train))
train_set, dev_set, test_set = (featurize(part, schema) for part in (train, dev, test))
print(f"{schema.dimension} features; {len(train_set)} / {len(dev_set)} / {len(test_set)} replies")

# %% A small grid search on the development split, then a final fit on
# train plus dev with the chosen settings.
grid = [Hyperparams(n_trees=n, max_depth=d, seed=11) for n in (50, 150) for d in (20, 45)]
best, scores = grid_search(train_set, dev_set, grid)
for row in scores:
    hp = row["hyperparams"]
    print(f"  trees={hp['n_trees']:<4} depth={hp['max_depth']:<3} dev weighted F1={row['weighted_f1']:.3f}")
full = featurize(train + dev, schema)
model = train_forest(full.X, full.y, best, schema_fingerprint=schema.fingerprint)
print(f"chosen: {best.n_trees} trees, depth {best.max_depth}; {model.n_nodes} nodes")

# %% Held-out evaluation in the usual per-class layout.
predicted = model.predict_dataset(test_set)
report = evaluate([CLASS_ORDER[i] for i in test_set.y], [CLASS_ORDER[i] for i in predicted])
print(report.render())

# %% Explain every flagged reply and print the start of the designer report.
votes = model.votes(test_set.X, schema.fingerprint)
by_id = {d.id: d for d in test}
predictions, explanations = {}, []
for (dialogue_id, turn), row in zip(test_set.keys, votes):
    label = CLASS_ORDER[int(np.argmax(row))]
    predictions[(dialogue_id, turn)] = label
    if label is Appropriateness.INAPPROPRIATE:
        vote_map = dict(zip(CLASS_ORDER, (int(v) for v in row)))
        explanations.append(explain_response(by_id[dialogue_id], turn, (label, vote_map), rules.compatibility))
print("\n".join(build_report(test, predictions, explanations).splitlines()[:24]))
