"""Two-stage dialogue-act annotation.

Stage 1 assigns a Switchboard-DAMSL tag to each user turn, either from the
transcript (pre-tagged by an external classifier) or from surface heuristics.
Stage 2 maps (tag, topical relevance, position) to a context-aware user DA
through the ruleset. Chatbot turns without designer-provided labels get a
DA from ordered lexicon heuristics.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import TaggerError
from .taxonomy import ChatbotDA, Context, Relevance, SwdaTag, UserDA
from .text import STOPWORDS, content_tokens, edit_similarity, normalize, tokenize
from .transcript import topic_registry

WH_WORDS = frozenset("what why how when where who whom whose which".split())

# Sentence punctuation is ignored when measuring the non-alphabetic share.
_SOFT_PUNCT = frozenset(".,!?;:'’\"-")

LEXICON_NAMES = (
    "imperative_verbs",
    "directive_phrases",
    "thanks",
    "apologies",
    "greetings",
    "complaints",
    "excuses",
    "agreements",
    "backchannels",
    "appreciation",
    "chatbot_fallback",
    "chatbot_acknowledgments",
)

# Checked in this order; earlier categories win on overlapping phrases.
HANDLER_ORDER = (
    ChatbotDA.HANDLE_GIBBERISH,
    ChatbotDA.HANDLE_COMPLAIN,
    ChatbotDA.HANDLE_QUESTION_IRRELEVANT,
    ChatbotDA.HANDLE_REQUEST,
    ChatbotDA.HANDLE_COMMAND,
    ChatbotDA.ECHO_RESPOND_IRRELEVANT,
    ChatbotDA.HANDLE_EXCUSES,
    ChatbotDA.SOCIAL_OBLIGATIONS,
    ChatbotDA.RESPOND_RELEVANT,
)


class TaggerMode(str, Enum):
    HEURISTIC = "heuristic"
    PRETAGGED = "pretagged"


@dataclass(frozen=True)
class TaggerConfig:
    mode: TaggerMode = TaggerMode.HEURISTIC
    gibberish_nonalpha_threshold: float = 0.5
    gibberish_oov_threshold: float = 0.8
    relevance_threshold: float = 0.15
    repeat_similarity_threshold: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "mode", TaggerMode(self.mode))
        for name in (
            "gibberish_nonalpha_threshold",
            "gibberish_oov_threshold",
            "relevance_threshold",
            "repeat_similarity_threshold",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _read_list(text):
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(normalize(line))
    return frozenset(e for e in entries if e)


@dataclass(frozen=True)
class Lexicons:
    lists: dict
    handlers: dict
    known_words: frozenset

    def __getitem__(self, name):
        return self.lists[name]


def _bundled(name):
    return resources.files("dadebug.data").joinpath(name).read_text("utf-8")


@lru_cache(maxsize=None)
def _known_words():
    words = set(_read_list(_bundled("english_words.txt")))
    for topic in topic_registry().values():
        words.update(topic.keywords)
        words.update(tokenize(topic.question_text))
    return frozenset(words)


def load_lexicons(directory=None):
    """Bundled lexicons, with any same-named ``.txt`` file in ``directory`` taking precedence."""
    override = Path(directory) if directory is not None else None
    if override is not None and not override.is_dir():
        raise FileNotFoundError(f"lexicon directory not found: {override}")

    def read(filename):
        if override is not None and (override / filename).is_file():
            return _read_list((override / filename).read_text("utf-8"))
        return _read_list(_bundled(f"lexicons/{filename}"))

    lists = {name: read(f"{name}.txt") for name in LEXICON_NAMES}
    handlers = {da: read(f"handler_{da.value}.txt") for da in HANDLER_ORDER}
    return Lexicons(lists=lists, handlers=handlers, known_words=_known_words())


@lru_cache(maxsize=1)
def default_lexicons():
    return load_lexicons()


def _contains_phrase(norm, phrases):
    padded = f" {norm} "
    return any(f" {p} " in padded for p in phrases)


def is_gibberish(text, config=TaggerConfig(), lexicons=None):
    """Non-alphabetic share above threshold, or mostly out-of-vocabulary words."""
    lexicons = lexicons or default_lexicons()
    chars = [c for c in text if not c.isspace() and c not in _SOFT_PUNCT]
    if not chars:
        return True
    nonalpha = sum(1 for c in chars if not c.isalpha()) / len(chars)
    if nonalpha > config.gibberish_nonalpha_threshold:
        return True
    words = [t for t in tokenize(text) if t.isalpha()]
    if not words:
        return False
    oov = sum(1 for w in words if w not in lexicons.known_words) / len(words)
    return oov >= config.gibberish_oov_threshold


def _last_sentence(text):
    body = text.strip().rstrip("?!. ")
    for sep in ".!?":
        body = body.rsplit(sep, 1)[-1]
    return body


def heuristic_tag(text, config=TaggerConfig(), lexicons=None):
    lexicons = lexicons or default_lexicons()
    if is_gibberish(text, config, lexicons):
        return SwdaTag.ABANDONED
    norm = normalize(text)
    tokens = norm.split()
    if text.rstrip().endswith("?"):
        if WH_WORDS.intersection(tokenize(_last_sentence(text))):
            return SwdaTag.WH_QUESTION
        return SwdaTag.YES_NO_QUESTION
    if tokens[0] in lexicons["imperative_verbs"] or _contains_phrase(norm, lexicons["directive_phrases"]):
        return SwdaTag.ACTION_DIRECTIVE
    if _contains_phrase(norm, lexicons["thanks"]):
        return SwdaTag.THANKING
    if _contains_phrase(norm, lexicons["apologies"]):
        return SwdaTag.APOLOGY
    if _contains_phrase(norm, lexicons["greetings"]):
        return SwdaTag.CONVENTIONAL_CLOSING
    if _contains_phrase(norm, lexicons["complaints"]):
        return SwdaTag.REJECT
    if _contains_phrase(norm, lexicons["excuses"]):
        return SwdaTag.HOLD
    if norm in lexicons["agreements"]:
        return SwdaTag.AGREE_ACCEPT
    if norm in lexicons["backchannels"]:
        return SwdaTag.BACKCHANNEL
    if norm in lexicons["appreciation"]:
        return SwdaTag.APPRECIATION
    return SwdaTag.STATEMENT_NON_OPINION


def tag_stage1(utterance, dialogue=None, config=TaggerConfig(), lexicons=None):
    if not utterance.is_user:
        raise TaggerError(f"turn {utterance.turn_index} is not a user utterance")
    if config.mode is TaggerMode.PRETAGGED:
        if utterance.swda_tag is None:
            where = f"dialogue {dialogue.id!r} " if dialogue is not None else ""
            raise TaggerError(f"{where}turn {utterance.turn_index}: pretagged mode needs a swda_tag")
        return utterance.swda_tag
    return heuristic_tag(utterance.text, config, lexicons)


def is_question(text):
    return text.rstrip().endswith("?")


def positional_context(dialogue, turn_index):
    """AFTER_QUESTION when the closest earlier chatbot turn asks a question."""
    for u in reversed(dialogue.utterances[:turn_index]):
        if u.is_chatbot:
            return Context.AFTER_QUESTION if is_question(u.text) else Context.AFTER_STATEMENT
    return Context.AFTER_STATEMENT


def topic_terms(topic):
    """Binary topic vector terms: question content words plus registry seeds."""
    terms = set(content_tokens(topic.question_text))
    registered = topic_registry().get(topic.topic_id)
    if registered is not None:
        terms.update(registered.keywords)
        terms.update(_meta_keywords())
    return terms


@lru_cache(maxsize=1)
def _meta_keywords():
    return tuple(json.loads(_bundled("topics.json"))["meta_keywords"])


def cosine_to_terms(text, terms):
    counts = Counter(content_tokens(text))
    if not counts or not terms:
        return 0.0
    dot = sum(n for tok, n in counts.items() if tok in terms)
    norm2 = sum(n * n for n in counts.values()) * len(terms)
    return min(1.0, dot / math.sqrt(norm2))


class _RelevanceTracker:
    def __init__(self, topic, config):
        self.terms = topic_terms(topic)
        self.config = config

    def score(self, text):
        return cosine_to_terms(text, self.terms)

    def judge(self, text, context):
        score = self.score(text)
        if context is not Context.AFTER_QUESTION:
            return score, Relevance.NOT_APPLICABLE
        if score >= self.config.relevance_threshold:
            # On-topic answers widen the topic vector for later turns.
            self.terms.update(t for t in content_tokens(text) if t not in STOPWORDS)
            return score, Relevance.RELEVANT
        return score, Relevance.IRRELEVANT


def score_relevance(utterance_text, topic, dialogue=None, turn_index=None, config=TaggerConfig()):
    """Cosine relevance of a user turn to the topic.

    Without a ``turn_index`` the text is judged as a direct reply to the
    interview question. With one, earlier relevant user answers in
    ``dialogue`` extend the topic vector, and turns that do not follow a
    chatbot question are ``NOT_APPLICABLE``.
    """
    tracker = _RelevanceTracker(topic, config)
    if dialogue is None or turn_index is None:
        return tracker.judge(utterance_text, Context.AFTER_QUESTION)
    for u in dialogue.utterances[:turn_index]:
        if u.is_user:
            tracker.judge(u.text, positional_context(dialogue, u.turn_index))
    return tracker.judge(utterance_text, positional_context(dialogue, turn_index))


def annotate_user_das(dialogue, ruleset, config=TaggerConfig(), lexicons=None, overwrite=True):
    """Fill ``user_da`` on every user turn; chatbot turns are left untouched.

    ``overwrite=False`` keeps labels already present in the transcript.
    """
    lexicons = lexicons or default_lexicons()
    tracker = _RelevanceTracker(dialogue.topic, config)
    out = []
    for u in dialogue.utterances:
        if not u.is_user:
            out.append(u)
            continue
        context = positional_context(dialogue, u.turn_index)
        _, relevance = tracker.judge(u.text, context)
        if u.user_da is not None and not overwrite:
            out.append(u)
            continue
        tag = tag_stage1(u, dialogue, config, lexicons)
        out.append(replace(u, user_da=ruleset.map(tag, relevance, context)))
    return dialogue.with_utterances(out)


def heuristic_chatbot_da(dialogue, turn_index, config=TaggerConfig(), lexicons=None):
    lexicons = lexicons or default_lexicons()
    u = dialogue.utterances[turn_index]
    earlier = dialogue.utterances[:turn_index]
    for prev in earlier:
        if prev.is_chatbot and edit_similarity(prev.text, u.text) >= config.repeat_similarity_threshold:
            return ChatbotDA.REPEAT
    norm = normalize(u.text)
    if _contains_phrase(norm, lexicons["chatbot_fallback"]):
        return ChatbotDA.DEFAULT_FALLBACK
    last_user = next((p for p in reversed(earlier) if p.is_user), None)
    if is_question(u.text) and last_user is not None and last_user.user_da is UserDA.ANSWER_RELEVANT:
        return ChatbotDA.ASK_FOLLOWUP
    if norm in lexicons["chatbot_acknowledgments"]:
        return ChatbotDA.ACKNOWLEDGE
    for da in HANDLER_ORDER:
        if _contains_phrase(norm, lexicons.handlers[da]):
            return da
    return ChatbotDA.OTHER


def annotate_chatbot_das(dialogue, config=TaggerConfig(), lexicons=None):
    """Label chatbot turns lacking a designer-provided DA; existing labels are kept."""
    out = list(dialogue.utterances)
    for i, u in enumerate(out):
        if u.is_chatbot and u.chatbot_da is None:
            current = dialogue.with_utterances(out)
            out[i] = replace(u, chatbot_da=heuristic_chatbot_da(current, i, config, lexicons))
    return dialogue.with_utterances(out)


def annotate(dialogue, ruleset, config=TaggerConfig(), lexicons=None, overwrite_user=True):
    dialogue = annotate_user_das(dialogue, ruleset, config, lexicons, overwrite=overwrite_user)
    return annotate_chatbot_das(dialogue, config, lexicons)


def annotate_all(dialogues, ruleset, config=TaggerConfig(), lexicons=None, overwrite_user=True, threads=1):
    """Annotate dialogues independently; output order and content do not depend on ``threads``."""
    lexicons = lexicons or default_lexicons()

    def work(d):
        return annotate(d, ruleset, config, lexicons, overwrite_user)

    if threads <= 1:
        return [work(d) for d in dialogues]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, dialogues))
