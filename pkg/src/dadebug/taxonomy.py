"""Dialogue-act label spaces, the tag-to-user-DA rule mapping, and the
user/chatbot DA compatibility matrix.

The mapping and matrix live in a JSON ruleset so they can be revised without
code changes; ``default_ruleset()`` loads the bundled copy.
"""

from __future__ import annotations

import itertools
import json
import os
import warnings
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import RulesetError

RULESET_ENV_VAR = "DADEBUG_RULESET"


class UserDA(str, Enum):
    ANSWER_RELEVANT = "user-answer-relevant"
    QUESTION_RELEVANT = "user-question-relevant"
    RESPOND_IRRELEVANT = "user-respond-irrelevant"
    QUESTION_IRRELEVANT = "user-question-irrelevant"
    EXCUSES = "user-excuses"
    ACKNOWLEDGE = "user-acknowledge"
    REQUEST = "user-request"
    COMMAND = "user-command"
    COMPLAIN = "user-complain"
    SOCIAL_OBLIGATIONS = "user-social-obligations"
    GIBBERISH = "user-gibberish"
    OTHER = "user-other"


class ChatbotDA(str, Enum):
    RESPOND_RELEVANT = "chatbot-respond-relevant"
    ACKNOWLEDGE = "chatbot-acknowledge"
    ASK_FOLLOWUP = "chatbot-ask-followup"
    HANDLE_QUESTION_IRRELEVANT = "chatbot-handle-user-question-irrelevant"
    HANDLE_EXCUSES = "chatbot-handle-user-excuses"
    HANDLE_REQUEST = "chatbot-handle-user-request"
    HANDLE_COMMAND = "chatbot-handle-user-command"
    ECHO_RESPOND_IRRELEVANT = "chatbot-echo-user-respond-irrelevant"
    HANDLE_COMPLAIN = "chatbot-handle-user-complain"
    SOCIAL_OBLIGATIONS = "chatbot-social-obligations"
    DEFAULT_FALLBACK = "chatbot-respond-default-fallback"
    REPEAT = "chatbot-repeat"
    HANDLE_GIBBERISH = "chatbot-handle-gibberish"
    OTHER = "chatbot-other"


class SwdaTag(str, Enum):
    """The 43 SWBD-DAMSL dialogue-behavior tags."""

    STATEMENT_NON_OPINION = "sd"
    BACKCHANNEL = "b"
    STATEMENT_OPINION = "sv"
    AGREE_ACCEPT = "aa"
    ABANDONED = "%"
    APPRECIATION = "ba"
    YES_NO_QUESTION = "qy"
    NON_VERBAL = "x"
    YES_ANSWER = "ny"
    CONVENTIONAL_CLOSING = "fc"
    WH_QUESTION = "qw"
    NO_ANSWER = "nn"
    RESPONSE_ACKNOWLEDGEMENT = "bk"
    HEDGE = "h"
    DECLARATIVE_YES_NO_QUESTION = "qy^d"
    OTHER = 'fo_o_fw_"_by_bc'
    BACKCHANNEL_QUESTION = "bh"
    QUOTATION = "^q"
    SUMMARIZE_REFORMULATE = "bf"
    AFFIRMATIVE_NON_YES = "na"
    ACTION_DIRECTIVE = "ad"
    COLLABORATIVE_COMPLETION = "^2"
    REPEAT_PHRASE = "b^m"
    OPEN_QUESTION = "qo"
    RHETORICAL_QUESTION = "qh"
    HOLD = "^h"
    REJECT = "ar"
    NEGATIVE_NON_NO = "ng"
    SIGNAL_NON_UNDERSTANDING = "br"
    OTHER_ANSWER = "no"
    CONVENTIONAL_OPENING = "fp"
    OR_CLAUSE = "qrr"
    DISPREFERRED_ANSWER = "arp_nd"
    THIRD_PARTY_TALK = "t3"
    OFFER_OPTION_COMMIT = "oo_co_cc"
    SELF_TALK = "t1"
    DOWNPLAYER = "bd"
    MAYBE_ACCEPT_PART = "aap_am"
    TAG_QUESTION = "^g"
    DECLARATIVE_WH_QUESTION = "qw^d"
    APOLOGY = "fa"
    THANKING = "ft"
    CONTINUATION = "+"


def parse_swda_tag(value):
    """Parse a tag string; unknown tags fall back to ``%`` with a warning."""
    if isinstance(value, SwdaTag):
        return value
    try:
        return SwdaTag(value.strip())
    except (ValueError, AttributeError):
        warnings.warn(f"unknown Switchboard-DAMSL tag {value!r}; using '%'", stacklevel=2)
        return SwdaTag.ABANDONED


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    NOT_APPLICABLE = "not-applicable"


class Context(str, Enum):
    AFTER_QUESTION = "after-question"
    AFTER_STATEMENT = "after-statement"


class RelevanceCondition(str, Enum):
    REQUIRES_RELEVANT = "relevant"
    REQUIRES_IRRELEVANT = "irrelevant"
    ANY = "any"

    def matches(self, relevance):
        if self is RelevanceCondition.ANY:
            return True
        return self.value == relevance.value


class ContextCondition(str, Enum):
    AFTER_QUESTION = "after-question"
    AFTER_STATEMENT = "after-statement"
    ANY = "any"

    def matches(self, context):
        return self is ContextCondition.ANY or self.value == context.value


@dataclass(frozen=True)
class MappingRule:
    """One stage-2 rule. ``swda_tag=None`` is the wildcard used by the catch-all."""

    swda_tag: SwdaTag | None
    relevance_condition: RelevanceCondition
    context_condition: ContextCondition
    result: UserDA
    priority: int

    def matches(self, tag, relevance, context):
        return (
            (self.swda_tag is None or self.swda_tag is tag)
            and self.relevance_condition.matches(relevance)
            and self.context_condition.matches(context)
        )

    @property
    def is_catch_all(self):
        return (
            self.swda_tag is None
            and self.relevance_condition is RelevanceCondition.ANY
            and self.context_condition is ContextCondition.ANY
        )


def all_cells():
    """Every (tag, relevance, context) combination: 43 x 3 x 2 = 258 cells."""
    return list(itertools.product(SwdaTag, Relevance, Context))


def apply_mapping(tag, relevance, context, rules):
    """Return the result of the highest-priority rule matching the cell."""
    best = None
    for rule in rules:
        if rule.matches(tag, relevance, context) and (best is None or rule.priority > best.priority):
            best = rule
    if best is None:
        raise RulesetError(f"no mapping rule covers cell {_cell_name((tag, relevance, context))}")
    return best.result


def is_compatible(user_da, chatbot_da, matrix):
    return chatbot_da in matrix[user_da]


def _cell_name(cell):
    tag, relevance, context = cell
    return f"({tag.value}, {relevance.value}, {context.value})"


def validate_rules(rules):
    """Enforce a catch-all rule and exactly one winning rule per cell."""
    for cell in all_cells():
        matching = [r for r in rules if r.matches(*cell)]
        if not matching:
            raise RulesetError(
                f"ruleset has no catch-all rule; uncovered cell {_cell_name(cell)}"
            )
        top = max(r.priority for r in matching)
        winners = [r for r in matching if r.priority == top]
        if len(winners) > 1:
            raise RulesetError(
                f"{len(winners)} rules cover cell {_cell_name(cell)} at priority {top}"
            )
    if not any(r.is_catch_all for r in rules):
        raise RulesetError("ruleset has no catch-all rule (swda_tag '*', relevance 'any', context 'any')")


def validate_matrix(matrix):
    for user_da in UserDA:
        row = matrix.get(user_da)
        if row is None:
            raise RulesetError(f"compatibility matrix is missing row {user_da.value}")
        if not row:
            raise RulesetError(f"compatibility matrix row {user_da.value} is empty")
    if matrix[UserDA.OTHER] != frozenset(ChatbotDA):
        raise RulesetError("compatibility row user-other must contain every chatbot DA")


@dataclass(frozen=True)
class Ruleset:
    rules: tuple
    compatibility: dict

    def __post_init__(self):
        # Resolve every cell once; lookups during annotation are then O(1).
        table = {cell: apply_mapping(*cell, self.rules) for cell in all_cells()}
        object.__setattr__(self, "_table", table)

    def map(self, tag, relevance, context):
        return self._table[(tag, relevance, context)]

    def is_compatible(self, user_da, chatbot_da):
        return is_compatible(user_da, chatbot_da, self.compatibility)

    def expected(self, user_da):
        return self.compatibility[user_da]

    def to_dict(self):
        return {
            "mapping_rules": [
                {
                    "swda_tag": "*" if r.swda_tag is None else r.swda_tag.value,
                    "relevance": r.relevance_condition.value,
                    "context": r.context_condition.value,
                    "result": r.result.value,
                    "priority": r.priority,
                }
                for r in self.rules
            ],
            "compatibility": {
                u.value: [c.value for c in ChatbotDA if c in self.compatibility[u]]
                for u in UserDA
            },
        }


def _enum_field(enum_cls, raw, where):
    try:
        return enum_cls(raw)
    except ValueError:
        raise RulesetError(f"{where}: invalid {enum_cls.__name__} value {raw!r}") from None


def parse_ruleset(data):
    """Build and validate a :class:`Ruleset` from its decoded JSON form."""
    if not isinstance(data, dict) or "mapping_rules" not in data or "compatibility" not in data:
        raise RulesetError("ruleset must be an object with 'mapping_rules' and 'compatibility'")
    rules = []
    for i, raw in enumerate(data["mapping_rules"]):
        where = f"mapping_rules[{i}]"
        try:
            tag_raw = raw["swda_tag"]
            tag = None if tag_raw == "*" else _enum_field(SwdaTag, tag_raw, where)
            rules.append(
                MappingRule(
                    swda_tag=tag,
                    relevance_condition=_enum_field(RelevanceCondition, raw.get("relevance", "any"), where),
                    context_condition=_enum_field(ContextCondition, raw.get("context", "any"), where),
                    result=_enum_field(UserDA, raw["result"], where),
                    priority=int(raw["priority"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise RulesetError(f"{where}: malformed rule ({exc})") from None
    matrix = {}
    for key, values in data["compatibility"].items():
        user_da = _enum_field(UserDA, key, "compatibility")
        matrix[user_da] = frozenset(_enum_field(ChatbotDA, v, f"compatibility[{key}]") for v in values)
    validate_rules(rules)
    validate_matrix(matrix)
    return Ruleset(rules=tuple(rules), compatibility=matrix)


def load_ruleset(path=None):
    """Load a ruleset file.

    With no path, ``$DADEBUG_RULESET`` is consulted before the bundled default.
    """
    if path is None:
        path = os.environ.get(RULESET_ENV_VAR)
    if path is None:
        text = resources.files("dadebug.data").joinpath("default_ruleset.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RulesetError(f"ruleset is not valid JSON: {exc}") from None
    return parse_ruleset(data)


_DEFAULT = None


def default_ruleset():
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("dadebug.data").joinpath("default_ruleset.json").read_text("utf-8")
        _DEFAULT = parse_ruleset(json.loads(text))
    return _DEFAULT
