"""Dialogue data model and line-delimited JSON transcript I/O.

One dialogue per line::

    {"id": "d1", "topic_id": "Q1", "question_text": "What hobbies ...?",
     "utterances": [{"speaker": "chatbot", "text": "...", "chatbot_da": "...",
                     "gold_label": "neutral"}, ...]}

``swda_tag``, ``user_da``, ``chatbot_da`` and ``gold_label`` are optional and
omitted from the output when unset.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import TranscriptError
from .taxonomy import ChatbotDA, SwdaTag, UserDA


class TranscriptWarning(UserWarning):
    """A conversational convention is violated; the data is still usable."""


class Speaker(str, Enum):
    USER = "user"
    CHATBOT = "chatbot"


class Appropriateness(str, Enum):
    # Declaration order is the class order used by metrics and tie-breaking.
    INAPPROPRIATE = "inappropriate"
    NEUTRAL = "neutral"
    APPROPRIATE = "appropriate"

    @property
    def index(self):
        return CLASS_ORDER.index(self)


CLASS_ORDER = tuple(Appropriateness)


@dataclass(frozen=True)
class TopicRef:
    topic_id: str
    question_text: str

    def __post_init__(self):
        if not self.question_text or not self.question_text.strip():
            raise TranscriptError("topic question_text must be non-empty", field="question_text")


@dataclass(frozen=True)
class Topic:
    """A registered interview topic with its relevance seed keywords."""

    topic_id: str
    question_text: str
    keywords: tuple

    @property
    def ref(self):
        return TopicRef(self.topic_id, self.question_text)


@lru_cache(maxsize=None)
def topic_registry():
    """The bundled interview topics, keyed by topic id."""
    raw = json.loads(resources.files("dadebug.data").joinpath("topics.json").read_text("utf-8"))
    return {
        t["topic_id"]: Topic(t["topic_id"], t["question_text"], tuple(t["keywords"]))
        for t in raw["topics"]
    }


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    text: str
    turn_index: int
    swda_tag: SwdaTag | None = None
    user_da: UserDA | None = None
    chatbot_da: ChatbotDA | None = None
    gold_label: Appropriateness | None = None

    def __post_init__(self):
        if self.user_da is not None and self.speaker is not Speaker.USER:
            raise TranscriptError("user_da is only allowed on user utterances", field="user_da")
        if self.chatbot_da is not None and self.speaker is not Speaker.CHATBOT:
            raise TranscriptError("chatbot_da is only allowed on chatbot utterances", field="chatbot_da")
        if self.gold_label is not None and self.speaker is not Speaker.CHATBOT:
            raise TranscriptError("gold_label is only allowed on chatbot utterances", field="gold_label")

    @property
    def is_user(self):
        return self.speaker is Speaker.USER

    @property
    def is_chatbot(self):
        return self.speaker is Speaker.CHATBOT


@dataclass(frozen=True)
class Dialogue:
    id: str
    topic: TopicRef
    utterances: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if not self.utterances:
            raise TranscriptError(f"dialogue {self.id!r} has no utterances", field="utterances")
        for i, u in enumerate(self.utterances):
            if u.turn_index != i:
                raise TranscriptError(
                    f"dialogue {self.id!r}: turn_index {u.turn_index} at position {i}",
                    field="turn_index",
                )
        if not any(u.is_chatbot for u in self.utterances):
            raise TranscriptError(f"dialogue {self.id!r} has no chatbot utterance", field="utterances")

    def chatbot_turns(self):
        return [u.turn_index for u in self.utterances if u.is_chatbot]

    def with_utterances(self, utterances):
        return replace(self, utterances=tuple(utterances))


def check_conventions(dialogue):
    """Warn (not fail) when the dialogue does not open with the interview question."""
    first = dialogue.utterances[0]
    if not first.is_chatbot or not first.text.rstrip().endswith("?"):
        warnings.warn(
            f"dialogue {dialogue.id!r} does not open with a chatbot interview question",
            TranscriptWarning,
            stacklevel=3,
        )


def _optional_enum(enum_cls, raw, name):
    if raw is None:
        return None
    try:
        return enum_cls(raw)
    except ValueError:
        raise TranscriptError(f"invalid value {raw!r}", field=name) from None


def dialogue_from_dict(record):
    if not isinstance(record, dict):
        raise TranscriptError("record is not a JSON object")
    for name in ("id", "topic_id", "question_text", "utterances"):
        if name not in record:
            raise TranscriptError("missing required field", field=name)
    if not isinstance(record["id"], str) or not record["id"]:
        raise TranscriptError("dialogue id must be a non-empty string", field="id")
    if not isinstance(record["utterances"], list):
        raise TranscriptError("utterances must be a list", field="utterances")
    utterances = []
    for i, raw in enumerate(record["utterances"]):
        if not isinstance(raw, dict):
            raise TranscriptError(f"utterance {i} is not an object", field="utterances")
        if not isinstance(raw.get("text"), str):
            raise TranscriptError(f"utterance {i} needs a string text", field="text")
        speaker = _optional_enum(Speaker, raw.get("speaker"), "speaker")
        if speaker is None:
            raise TranscriptError(f"utterance {i} has no speaker", field="speaker")
        swda = raw.get("swda_tag")
        utterances.append(
            Utterance(
                speaker=speaker,
                text=raw["text"],
                turn_index=i,
                swda_tag=_optional_enum(SwdaTag, swda, "swda_tag"),
                user_da=_optional_enum(UserDA, raw.get("user_da"), "user_da"),
                chatbot_da=_optional_enum(ChatbotDA, raw.get("chatbot_da"), "chatbot_da"),
                gold_label=_optional_enum(Appropriateness, raw.get("gold_label"), "gold_label"),
            )
        )
    topic = TopicRef(str(record["topic_id"]), record["question_text"])
    return Dialogue(id=record["id"], topic=topic, utterances=utterances)


def dialogue_to_dict(dialogue):
    utterances = []
    for u in dialogue.utterances:
        item = {"speaker": u.speaker.value, "text": u.text}
        if u.swda_tag is not None:
            item["swda_tag"] = u.swda_tag.value
        if u.user_da is not None:
            item["user_da"] = u.user_da.value
        if u.chatbot_da is not None:
            item["chatbot_da"] = u.chatbot_da.value
        if u.gold_label is not None:
            item["gold_label"] = u.gold_label.value
        utterances.append(item)
    return {
        "id": dialogue.id,
        "topic_id": dialogue.topic.topic_id,
        "question_text": dialogue.topic.question_text,
        "utterances": utterances,
    }


class TranscriptSet(list):
    """List of dialogues; ``skipped`` holds ``(line, message)`` for dropped records."""

    def __init__(self, dialogues=(), skipped=()):
        super().__init__(dialogues)
        self.skipped = list(skipped)


def load_transcripts(path, strict=True):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"transcript file not found: {path}")
    result = TranscriptSet()
    seen = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TranscriptError(f"invalid JSON ({exc.msg})") from None
                dialogue = dialogue_from_dict(record)
            except TranscriptError as exc:
                if strict:
                    raise TranscriptError(exc.message, line=lineno, field=exc.field) from None
                result.skipped.append((lineno, str(exc)))
                continue
            if dialogue.id in seen:
                raise TranscriptError(
                    f"duplicate dialogue id {dialogue.id!r} (first seen on line {seen[dialogue.id]})",
                    line=lineno,
                    field="id",
                )
            seen[dialogue.id] = lineno
            check_conventions(dialogue)
            result.append(dialogue)
    return result


def write_transcripts(dialogues, path):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for d in dialogues:
            fh.write(json.dumps(dialogue_to_dict(d), ensure_ascii=False))
            fh.write("\n")
