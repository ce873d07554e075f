"""Feature vectors for chatbot responses in context.

Column layout (259 fixed columns followed by one count per vocabulary token)::

    offset  size  block
         0    14  t_chatbot_*    target chatbot DA, one-hot
        14    14  prev_chatbot_* chatbot DAs before the target, multi-hot
        28    14  next_chatbot_* chatbot DAs after the target, multi-hot
        42    12  last_user_*    closest user DA before the target, one-hot
        54    12  prev_user_*    user DAs before the target, multi-hot
        66    12  next_user_*    closest user DA after the target, one-hot
        78    12  foll_user_*    user DAs after the target, multi-hot
        90   168  x_pair_*       (last user DA, target chatbot DA), one-hot at 12*chatbot + user
       258     1  ordinal        1-based rank of the target among chatbot turns
       259   |V|  bow_*          token counts of topic question + target text
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import FeatureError, SchemaMismatchError
from .taxonomy import ChatbotDA, UserDA
from .text import tokenize
from .transcript import Appropriateness

N_CHATBOT = len(ChatbotDA)
N_USER = len(UserDA)
_CHATBOT_INDEX = {da: i for i, da in enumerate(ChatbotDA)}
_USER_INDEX = {da: i for i, da in enumerate(UserDA)}

# (name, size, kind) for the fixed part of the layout.
FIXED_BLOCKS = (
    ("t_chatbot", N_CHATBOT, "one-hot"),
    ("prev_chatbot", N_CHATBOT, "multi-hot"),
    ("next_chatbot", N_CHATBOT, "multi-hot"),
    ("last_user", N_USER, "one-hot"),
    ("prev_user", N_USER, "multi-hot"),
    ("next_user", N_USER, "one-hot"),
    ("foll_user", N_USER, "multi-hot"),
    ("x_pair", N_USER * N_CHATBOT, "one-hot"),
    ("ordinal", 1, "numeric"),
)
FIXED_DIM = sum(size for _, size, _ in FIXED_BLOCKS)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple
    min_count: int = 2
    max_size: int = 5000
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        index = {t: i for i, t in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise FeatureError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "index", index)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


def build_vocabulary(dialogues, min_count=2, max_size=5000):
    """Vocabulary over topic questions and chatbot turns of the training split.

    Each dialogue contributes its topic question once plus every chatbot
    utterance; user text is excluded. Tokens are ranked by descending count,
    ties alphabetical.
    """
    dialogues = list(dialogues)
    if not dialogues:
        raise FeatureError("cannot build a vocabulary from an empty training split")
    counts = Counter()
    for d in dialogues:
        counts.update(tokenize(d.topic.question_text))
        for u in d.utterances:
            if u.is_chatbot:
                counts.update(tokenize(u.text))
    ranked = sorted((t for t, n in counts.items() if n >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(tuple(ranked[:max_size]), min_count=min_count, max_size=max_size)


@dataclass(frozen=True)
class FeatureSchema:
    vocabulary: Vocabulary

    @property
    def dimension(self):
        return FIXED_DIM + len(self.vocabulary)

    def offset(self, block):
        pos = 0
        for name, size, _ in FIXED_BLOCKS:
            if name == block:
                return pos
            pos += size
        if block == "bow":
            return FIXED_DIM
        raise KeyError(block)

    def blocks(self):
        """(name, offset, size, kind) for every block including bag-of-words."""
        out, pos = [], 0
        for name, size, kind in FIXED_BLOCKS:
            out.append((name, pos, size, kind))
            pos += size
        out.append(("bow", pos, len(self.vocabulary), "count"))
        return out

    def column_names(self):
        names = []
        names += [f"t_chatbot_{da.value}" for da in ChatbotDA]
        names += [f"prev_chatbot_{da.value}" for da in ChatbotDA]
        names += [f"next_chatbot_{da.value}" for da in ChatbotDA]
        names += [f"last_user_{da.value}" for da in UserDA]
        names += [f"prev_user_{da.value}" for da in UserDA]
        names += [f"next_user_{da.value}" for da in UserDA]
        names += [f"foll_user_{da.value}" for da in UserDA]
        names += [f"x_pair_{u.value}__{c.value}" for c in ChatbotDA for u in UserDA]
        names.append("ordinal")
        names += [f"bow_{t}" for t in self.vocabulary.tokens]
        return names

    @property
    def fingerprint(self):
        cached = self.__dict__.get("_fingerprint")
        if cached is None:
            payload = json.dumps(self.column_names(), ensure_ascii=False).encode("utf-8")
            cached = hashlib.sha256(payload).hexdigest()
            object.__setattr__(self, "_fingerprint", cached)
        return cached


def pair_index(user_da, chatbot_da):
    """Position of the exchange pair inside the x_pair block."""
    return N_USER * _CHATBOT_INDEX[chatbot_da] + _USER_INDEX[user_da]


@dataclass(frozen=True)
class FeatureVector:
    values: dict
    dimension: int
    schema_fingerprint: str
    label: Appropriateness | None = None
    dialogue_id: str = ""
    turn_index: int = -1

    @property
    def provenance(self):
        return (self.dialogue_id, self.turn_index)

    def dense(self):
        x = np.zeros(self.dimension)
        for i, v in self.values.items():
            x[i] = v
        return x


def extract(dialogue, target_index, schema):
    utterances = dialogue.utterances
    if not 0 <= target_index < len(utterances) or not utterances[target_index].is_chatbot:
        raise FeatureError(f"dialogue {dialogue.id!r}: turn {target_index} is not a chatbot turn")
    for u in utterances:
        if (u.is_chatbot and u.chatbot_da is None) or (u.is_user and u.user_da is None):
            raise FeatureError(f"dialogue {dialogue.id!r} is not fully DA-annotated (turn {u.turn_index})")

    target = utterances[target_index]
    before, after = utterances[:target_index], utterances[target_index + 1:]
    values = {}

    def put(block, position, value=1):
        values[schema.offset(block) + position] = value

    put("t_chatbot", _CHATBOT_INDEX[target.chatbot_da])
    for u in before:
        if u.is_chatbot:
            put("prev_chatbot", _CHATBOT_INDEX[u.chatbot_da])
        else:
            put("prev_user", _USER_INDEX[u.user_da])
    for u in after:
        if u.is_chatbot:
            put("next_chatbot", _CHATBOT_INDEX[u.chatbot_da])
        else:
            put("foll_user", _USER_INDEX[u.user_da])

    last_user = next((u for u in reversed(before) if u.is_user), None)
    if last_user is not None:
        put("last_user", _USER_INDEX[last_user.user_da])
        put("x_pair", pair_index(last_user.user_da, target.chatbot_da))
    next_user = next((u for u in after if u.is_user), None)
    if next_user is not None:
        put("next_user", _USER_INDEX[next_user.user_da])

    put("ordinal", 0, sum(1 for u in utterances[: target_index + 1] if u.is_chatbot))

    vocab = schema.vocabulary
    bow = Counter(t for t in tokenize(dialogue.topic.question_text) + tokenize(target.text) if t in vocab)
    for token, n in bow.items():
        put("bow", vocab.index[token], n)

    return FeatureVector(
        values=dict(sorted(values.items())),
        dimension=schema.dimension,
        schema_fingerprint=schema.fingerprint,
        label=target.gold_label,
        dialogue_id=dialogue.id,
        turn_index=target_index,
    )


def extract_all(dialogues, schema):
    return [extract(d, i, schema) for d in dialogues for i in d.chatbot_turns()]


@dataclass
class Dataset:
    """Dense design matrix with labels (class indices, -1 when unlabelled)."""

    X: np.ndarray
    y: np.ndarray
    keys: list
    schema_fingerprint: str

    def __len__(self):
        return len(self.keys)

    @property
    def labelled(self):
        return bool(len(self.y)) and bool(np.all(self.y >= 0))

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.X[rows], self.y[rows], [self.keys[i] for i in rows], self.schema_fingerprint)


def to_dataset(vectors, schema):
    X = np.zeros((len(vectors), schema.dimension))
    y = np.full(len(vectors), -1, dtype=np.int64)
    for row, v in enumerate(vectors):
        if v.schema_fingerprint != schema.fingerprint:
            raise SchemaMismatchError(f"vector {v.provenance} was built with a different schema")
        for i, value in v.values.items():
            X[row, i] = value
        if v.label is not None:
            y[row] = v.label.index
    return Dataset(X, y, [v.provenance for v in vectors], schema.fingerprint)


def featurize(dialogues, schema):
    return to_dataset(extract_all(dialogues, schema), schema)


def export_csv(vectors, schema, path):
    """Header row of schema column names, label in the final column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.column_names() + ["label"])
        for v in vectors:
            row = [0] * schema.dimension
            for i, value in v.values.items():
                row[i] = value
            writer.writerow(row + [v.label.value if v.label is not None else ""])
