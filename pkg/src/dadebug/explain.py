"""Example-based explanations for flagged chatbot responses.

An explanation does not look inside the classifier: it reads the DA of the
flagged response and of the user turn it answers, and checks the pair against
the compatibility matrix. Tree decision paths can be attached as an appendix.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import DataError
from .taxonomy import ChatbotDA, default_ruleset
from .transcript import CLASS_ORDER, Appropriateness

MAX_EXAMPLES_PER_GROUP = 5
NO_USER = "(no user turn)"


@dataclass(frozen=True)
class Explanation:
    dialogue_id: str
    turn_index: int
    label: Appropriateness
    vote_margin: int | None
    chatbot_da: ChatbotDA
    user_da: object  # UserDA or None
    compatible: bool
    expected_das: tuple
    context: tuple  # ((turn_index, speaker, text, da), ...)
    narrative: str
    decision_paths: tuple = field(default=())

    @property
    def pair(self):
        return (self.user_da, self.chatbot_da)

    @property
    def pair_name(self):
        user = self.user_da.value if self.user_da is not None else NO_USER
        return f"{user} -> {self.chatbot_da.value}"

    def to_dict(self):
        d = {
            "dialogue_id": self.dialogue_id,
            "turn_index": self.turn_index,
            "label": self.label.value,
            "vote_margin": self.vote_margin,
            "chatbot_da": self.chatbot_da.value,
            "user_da": self.user_da.value if self.user_da is not None else None,
            "compatible": self.compatible,
            "expected_das": [da.value for da in self.expected_das],
            "context": [
                {"turn_index": t, "speaker": s, "text": text, "da": da} for t, s, text, da in self.context
            ],
            "narrative": self.narrative,
        }
        if self.decision_paths:
            d["decision_paths"] = list(self.decision_paths)
        return d


def _split_prediction(prediction):
    """Accept a bare label or a (label, votes) pair from forest.predict."""
    if isinstance(prediction, tuple):
        label, votes = prediction
    else:
        label, votes = prediction, None
    label = Appropriateness(label)
    margin = None
    if votes:
        # Votes for the predicted label minus the strongest other class.
        runner_up = max((v for c, v in votes.items() if c is not label), default=0)
        margin = int(votes.get(label, 0) - runner_up)
    return label, margin


def _narrative(user_da, chatbot_da, compatible, expected):
    if user_da is None:
        return (
            f"{chatbot_da.value} was produced with no user context: no user turn precedes it, "
            "so there is no exchange pair to diagnose."
        )
    options = ", ".join(da.value for da in expected)
    if compatible:
        return f"{chatbot_da.value} is an accepted way to answer {user_da.value} (accepted: {options})."
    return (
        f"The chatbot answered a {user_da.value} turn with {chatbot_da.value}; "
        f"a {user_da.value} turn calls for one of: {options}."
    )


def decision_paths(model, vector, column_names, max_trees=3):
    """Root-to-leaf paths of the first ``max_trees`` trees, with named features."""
    x = vector.dense() if hasattr(vector, "dense") else vector
    out = []
    for i, tree in enumerate(model.trees[:max_trees]):
        steps, leaf = tree.decision_path(x)
        out.append({
            "tree": i,
            "steps": [
                {"feature": column_names[f], "value": float(x[f]), "op": "<=" if left else ">", "threshold": t}
                for f, t, left in steps
            ],
            "leaf_counts": dict(zip((c.value for c in CLASS_ORDER), leaf)),
        })
    return tuple(out)


def explain_response(dialogue, target_index, prediction, matrix=None, k=2, paths=()):
    """Diagnose one response; ``matrix`` defaults to the bundled compatibility matrix."""
    matrix = matrix if matrix is not None else default_ruleset().compatibility
    utterances = dialogue.utterances
    if not 0 <= target_index < len(utterances) or not utterances[target_index].is_chatbot:
        raise DataError(f"dialogue {dialogue.id!r}: turn {target_index} is not a chatbot turn")
    target = utterances[target_index]
    if target.chatbot_da is None:
        raise DataError(f"dialogue {dialogue.id!r}: turn {target_index} has no chatbot DA")
    user = next((u for u in reversed(utterances[:target_index]) if u.is_user), None)
    if user is not None and user.user_da is None:
        raise DataError(f"dialogue {dialogue.id!r}: user turn {user.turn_index} has no user DA")

    label, margin = _split_prediction(prediction)
    user_da = user.user_da if user is not None else None
    if user_da is None:
        compatible, expected = True, ()
    else:
        row = matrix[user_da]
        compatible = target.chatbot_da in row
        expected = tuple(da for da in ChatbotDA if da in row)

    window = utterances[max(0, target_index - k): target_index + k + 1]
    context = tuple(
        (u.turn_index, u.speaker.value, u.text, (u.user_da or u.chatbot_da).value if (u.user_da or u.chatbot_da) else None)
        for u in window
    )
    return Explanation(
        dialogue_id=dialogue.id,
        turn_index=target_index,
        label=label,
        vote_margin=margin,
        chatbot_da=target.chatbot_da,
        user_da=user_da,
        compatible=compatible,
        expected_das=expected,
        context=context,
        narrative=_narrative(user_da, target.chatbot_da, compatible, expected),
        decision_paths=tuple(paths),
    )


def group_explanations(explanations):
    """Flagged explanations grouped by exchange pair, largest group first, then by pair name."""
    groups = {}
    for e in explanations:
        if e.label is Appropriateness.INAPPROPRIATE:
            groups.setdefault(e.pair_name, []).append(e)
    return sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))


def _summary(dialogues, predictions, explanations):
    total = sum(len(d.chatbot_turns()) for d in dialogues)
    missing = [
        (d.id, t) for d in dialogues for t in d.chatbot_turns() if (d.id, t) not in predictions
    ]
    if missing:
        raise DataError(f"{len(missing)} responses have no prediction, e.g. {missing[0]}")
    per_label = Counter(Appropriateness(predictions[(d.id, t)]) for d in dialogues for t in d.chatbot_turns())
    flagged = per_label[Appropriateness.INAPPROPRIATE]
    return {
        "responses": total,
        "flagged": flagged,
        "per_label": {c.value: per_label[c] for c in CLASS_ORDER},
        "per_pair": {name: len(items) for name, items in group_explanations(explanations)},
    }


def build_report(dialogues, predictions, explanations, format="md"):
    """Designer-facing report as a Markdown or JSON string.

    ``predictions`` maps (dialogue_id, turn_index) to a label for every
    chatbot response; ``explanations`` should cover the flagged ones.
    """
    dialogues = list(dialogues)
    explanations = list(explanations)
    summary = _summary(dialogues, predictions, explanations)
    groups = group_explanations(explanations)
    if format == "json":
        doc = {
            "summary": summary,
            "groups": [
                {
                    "user_da": items[0].user_da.value if items[0].user_da is not None else None,
                    "chatbot_da": items[0].chatbot_da.value,
                    "count": len(items),
                    "compatible": items[0].compatible,
                    "expected_das": [da.value for da in items[0].expected_das],
                    "examples": [e.to_dict() for e in items[:MAX_EXAMPLES_PER_GROUP]],
                }
                for _, items in groups
            ],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if format != "md":
        raise ValueError(f"unknown report format {format!r}; use 'md' or 'json'")
    return _markdown(summary, groups)


def _markdown(summary, groups):
    lines = [
        "# Inappropriate chatbot responses",
        "",
        f"Flagged {summary['flagged']} of {summary['responses']} responses.",
        "",
        "| label | responses |",
        "|---|---|",
    ]
    lines += [f"| {label} | {n} |" for label, n in summary["per_label"].items()]
    if groups:
        lines += ["", "| user DA -> chatbot DA | flagged |", "|---|---|"]
        lines += [f"| {name} | {len(items)} |" for name, items in groups]
    for name, items in groups:
        first = items[0]
        lines += ["", f"## {name} ({len(items)})", ""]
        verdict = "compatible" if first.compatible else "incompatible"
        expected = ", ".join(da.value for da in first.expected_das) or "n/a"
        lines += [f"Pair is {verdict}. Expected chatbot DAs: {expected}.", ""]
        for e in items[:MAX_EXAMPLES_PER_GROUP]:
            margin = f", vote margin {e.vote_margin}" if e.vote_margin is not None else ""
            lines.append(f"### {e.dialogue_id}, turn {e.turn_index}{margin}")
            lines.append("")
            for t, speaker, text, da in e.context:
                marker = "**>**" if t == e.turn_index else "-"
                lines.append(f"{marker} [{t}] {speaker} ({da or 'unlabelled'}): {text}")
            lines += ["", e.narrative]
            for path in e.decision_paths:
                steps = "; ".join(f"{s['feature']}={s['value']:g} {s['op']} {s['threshold']:g}" for s in path["steps"])
                lines.append(f"- tree {path['tree']}: {steps or '(root is a leaf)'} -> {path['leaf_counts']}")
            lines.append("")
        if len(items) > MAX_EXAMPLES_PER_GROUP:
            lines.append(f"...and {len(items) - MAX_EXAMPLES_PER_GROUP} more.")
    return "\n".join(lines).rstrip() + "\n"
