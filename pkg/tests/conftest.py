from pathlib import Path

import pytest

from dadebug.corpus import GenSpec, generate_corpus
from dadebug.taxonomy import ChatbotDA, UserDA, default_ruleset
from dadebug.transcript import Appropriateness, Dialogue, Speaker, TopicRef, Utterance, topic_registry

DATA = Path(__file__).parent / "data"


def dialogue(turns, topic="Q1", dialogue_id="d1"):
    """Build a dialogue from (speaker, text, da, label) tuples; da/label may be None."""
    utterances = []
    for i, (speaker, text, da, label) in enumerate(turns):
        speaker = Speaker(speaker)
        kwargs = {}
        if da is not None:
            kwargs["user_da" if speaker is Speaker.USER else "chatbot_da"] = (
                UserDA(da) if speaker is Speaker.USER else ChatbotDA(da)
            )
        if label is not None:
            kwargs["gold_label"] = Appropriateness(label)
        utterances.append(Utterance(speaker, text, i, **kwargs))
    ref = topic_registry()[topic].ref if topic in topic_registry() else TopicRef(topic, "Custom question?")
    return Dialogue(dialogue_id, ref, utterances)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def ruleset():
    return default_ruleset()


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(GenSpec(60, seed=3))


# One line per acceptance criterion, filled by tests/test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
