"""Tag a short interview and explain why a chatbot reply misses.

Run with ``python demos/01_tag_and_explain.py``.
"""

# %% Build a dialogue by hand. The chatbot asks about hobbies, the user
# answers "dance", and the chatbot replies as if it had been asked to dance.
from dadebug.explain import explain_response
from dadebug.tagger import annotate
from dadebug.taxonomy import default_ruleset
from dadebug.transcript import Appropriateness, Dialogue, Speaker, Utterance, topic_registry

topic = topic_registry()["Q1"].ref
turns = [
    (Speaker.CHATBOT, topic.question_text),
    (Speaker.USER, "dance"),
    (Speaker.CHATBOT, "I wish I could... but I have no feet :-)"),
]
raw = Dialogue("demo", topic, [Utterance(s, text, i) for i, (s, text) in enumerate(turns)])

# %% Annotate. Each user turn gets a Switchboard-style tag, then a
# context-aware user DA; chatbot turns get a DA from light heuristics,
# which read the reply as handling a user request.
rules = default_ruleset()
annotated = annotate(raw, rules)
for u in annotated.utterances:
    print(f"[{u.turn_index}] {u.speaker.value:<8} {(u.user_da or u.chatbot_da).value:<34} {u.text}")

# %% Explain the reply as if a classifier had flagged it. The explanation
# uses only the DA pair and the compatibility matrix.
explanation = explain_response(annotated, 2, Appropriateness.INAPPROPRIATE, rules.compatibility)
print()
print("pair:       ", explanation.pair_name)
print("compatible: ", explanation.compatible)
print("expected:   ", ", ".join(da.value for da in explanation.expected_das))
print("narrative:  ", explanation.narrative)
