"""Seeded synthetic interview corpus with gold DAs and appropriateness labels.

Dialogues follow the interview pattern (question, user turn, chatbot
response...). Every chatbot response is first drawn from the compatible
replies for the preceding user DA; afterwards a fixed share of all chatbot
turns is overwritten with an incompatible DA and labelled inappropriate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .taxonomy import ChatbotDA, UserDA, default_ruleset
from .transcript import Appropriateness, Dialogue, Speaker, Utterance, topic_registry

_HOBBIES = [
    "swimming", "reading", "dance", "dancing", "music", "guitar", "piano", "painting",
    "drawing", "hiking", "cooking", "baking", "gaming", "soccer", "basketball", "tennis",
    "running", "photography", "yoga", "chess", "singing", "gardening",
]
_JOBS = [
    "engineer", "teacher", "nurse", "doctor", "developer", "accountant", "manager", "designer",
]
_QUALITIES = [
    "loyal", "honest", "kind", "caring", "supportive", "funny", "trustworthy", "reliable",
    "patient", "generous", "empathetic", "dependable", "thoughtful", "helpful",
]

_ANSWERS = {
    "Q1": [
        "I like {h}", "{H}", "I really enjoy {h}.", "{H} and {h2}.", "Mostly {h}.",
        "I love {h} and {h2}.", "{H}, {h2} and {h3}.", "My hobbies are {h} and {h2}.",
        "{H} I guess.", "I am into {h}.",
    ],
    "Q2": [
        "I work as a {j}.", "I'm a {j}.", "I am a college student.", "Studying at university.",
        "I work as a {j} at a software company.", "{J} at a hospital.", "I'm a student studying to be a {j}.",
        "I work in retail sales.", "I'm retired now.", "I do freelance design work.",
        "I work at a restaurant.", "I'm a {j} at a small company.",
    ],
    "Q3": [
        "I am {q}.", "I'm {q} and {q2}.", "My friends say I'm {q}.", "Being a {q} friend.",
        "I am {q}, {q2} and {q3}.", "{Q} and {q2}.", "I'm a good listener and {q}.",
        "I'm always there for my friends.", "Loyalty and honesty.", "I give good advice and I'm {q}.",
    ],
    "Q4": [
        "I failed my exams but my family helped me through.",
        "When I was sick I didn't know if I would make it, but I recovered.",
        "I had surgery last year and struggled, but my family's support helped.",
        "I lost my job and was stressed about debt, but I pushed through.",
        "Finals were really hard and stressful but I persevered.",
        "I moved to a new country alone, it was tough but I overcame it.",
        "After my injury it was a difficult time, but support from friends helped.",
        "I had a lot of anxiety and pressure at work but I pushed through it.",
        "Deadline pressure at work was tough, I overcame it by asking for help.",
    ],
}

_USER_BANK = {
    UserDA.RESPOND_IRRELEVANT: [
        "I like blue most.", "My cat is sleeping.", "The weather is nice today.", "Pizza.",
        "I had pasta for lunch.", "Blue is my favorite color.", "It is raining here.",
        "I felt lonely sometimes.", "My brother is tall.", "I just woke up.",
    ],
    UserDA.QUESTION_RELEVANT: [
        "Why are you asking?", "Why do you ask?", "What do you mean by that question?",
        "Why this question?", "What do you mean?",
    ],
    UserDA.QUESTION_IRRELEVANT: [
        "What are your capabilities?", "How are you feeling?", "Are you a robot?",
        "What is your name?", "Who made you?", "How old are you?", "Do you have feelings?",
        "Where do you live?",
    ],
    UserDA.EXCUSES: [
        "This is personal.", "I don't know.", "I'd rather not say.", "No comment.", "Not sure.",
        "I can't think of anything.", "That's private.", "Maybe later.",
    ],
    UserDA.ACKNOWLEDGE: [
        "Got it!", "Okay.", "Sure.", "I see.", "Alright.", "Makes sense.", "Cool.", "Ok thanks.",
    ],
    UserDA.REQUEST: [
        "Tell me a joke.", "Sing me a song.", "Tell me a story.", "Give me a fun fact.",
        "Show me something cool.", "Tell me something interesting.",
    ],
    UserDA.COMMAND: [
        "Next question.", "Skip this one.", "I want to skip the current questions.",
        "Move on please.", "Let's move on.", "Go to the next question.",
    ],
    UserDA.COMPLAIN: [
        "You didn't listen. I just answered it.", "I already told you.", "This is boring.",
        "You don't understand me.", "I already answered that.", "This is a waste of time.",
    ],
    UserDA.SOCIAL_OBLIGATIONS: [
        "Thank you!", "Thanks.", "Sorry.", "Hello!", "Bye!", "Thanks a lot.", "Thank you so much.",
    ],
    UserDA.GIBBERISH: [
        "blea blahe", "5", "xzqv", "jjjj kkkk", "sdfghj", "qwfp zxcv", "...", "123",
        "hjkl hjkl", "zzzzz", "aaaaaa bbb",
    ],
    UserDA.OTHER: ["Wow.", "Haha.", "Interesting.", "Whoa.", "Awesome."],
}

_CHATBOT_BANK = {
    ChatbotDA.RESPOND_RELEVANT: [
        "Thanks for sharing. I'm sorry you had to go through that.", "That sounds fun!",
        "That's great to hear.", "Good for you!", "Thanks for sharing that with me.",
        "That's wonderful.",
    ],
    ChatbotDA.ACKNOWLEDGE: ["Okay.", "I see.", "Got it.", "Alright.", "Noted."],
    ChatbotDA.ASK_FOLLOWUP: [
        "Do you mind saying a bit more?", "Could you tell me more about that?",
        "What do you like most about it?", "How did you get started?",
    ],
    ChatbotDA.HANDLE_QUESTION_IRRELEVANT: [
        "Thank you for asking. I feel great!",
        "I'm a chatbot, so I can chat with you about many things.",
        "I'm doing well. Let's get back to our chat.",
    ],
    ChatbotDA.HANDLE_EXCUSES: [
        "I understand. We'll continue then.", "No worries, take your time.",
        "That's fine, we can come back to it later.",
    ],
    ChatbotDA.HANDLE_REQUEST: [
        "Why was the math book sad? Because it had too many problems..",
        "I wish I could... but I have no feet :-)",
        "Here's a fun fact: honey never spoils.",
        "Once upon a time, there was a curious chatbot.",
    ],
    ChatbotDA.HANDLE_COMMAND: [
        "That's okay. Let's move on then.", "Sure, let's skip this one.",
        "As you wish, on to the next one.",
    ],
    ChatbotDA.ECHO_RESPOND_IRRELEVANT: [
        "If you need urgent help, please call 911 or your doctor directly. I'd love to cheer you up if I could.",
        "Interesting choice! Good to know though.", "That's interesting though.",
    ],
    ChatbotDA.HANDLE_COMPLAIN: [
        "Sorry, I must have missed it.", "My apologies, I'll try to do better.",
        "Sorry about that, thanks for your patience.",
    ],
    ChatbotDA.SOCIAL_OBLIGATIONS: [
        "You're most welcome, friend.", "You're welcome!", "My pleasure.", "Have a great day!",
    ],
    ChatbotDA.DEFAULT_FALLBACK: [
        "My bad, I didn't recognize your inputs. Let's try again.",
        "Sorry, I didn't catch that.", "Please rephrase that.",
    ],
    ChatbotDA.HANDLE_GIBBERISH: [
        "Sorry I didn't understand. Please use English.",
        "That doesn't look like English to me.",
    ],
    ChatbotDA.OTHER: ["Sorry I got disconnected. Let's continue."],
}

QUESTION_DAS = frozenset({ChatbotDA.ASK_FOLLOWUP, ChatbotDA.REPEAT})

_AFTER_QUESTION = {
    UserDA.ANSWER_RELEVANT: 40, UserDA.RESPOND_IRRELEVANT: 9, UserDA.QUESTION_RELEVANT: 6,
    UserDA.QUESTION_IRRELEVANT: 7, UserDA.EXCUSES: 7, UserDA.COMMAND: 6, UserDA.COMPLAIN: 4,
    UserDA.GIBBERISH: 8, UserDA.OTHER: 4, UserDA.ACKNOWLEDGE: 3, UserDA.SOCIAL_OBLIGATIONS: 3,
    UserDA.REQUEST: 3,
}
_AFTER_STATEMENT = {
    UserDA.ACKNOWLEDGE: 30, UserDA.SOCIAL_OBLIGATIONS: 25, UserDA.REQUEST: 20,
    UserDA.QUESTION_IRRELEVANT: 15, UserDA.COMPLAIN: 10,
}
_REPLY_WEIGHTS = {
    UserDA.ANSWER_RELEVANT: {ChatbotDA.RESPOND_RELEVANT: 40, ChatbotDA.ACKNOWLEDGE: 35, ChatbotDA.ASK_FOLLOWUP: 25},
    UserDA.RESPOND_IRRELEVANT: {ChatbotDA.ECHO_RESPOND_IRRELEVANT: 60, ChatbotDA.REPEAT: 40},
    UserDA.GIBBERISH: {ChatbotDA.HANDLE_GIBBERISH: 50, ChatbotDA.DEFAULT_FALLBACK: 30, ChatbotDA.REPEAT: 20},
    UserDA.ACKNOWLEDGE: {ChatbotDA.ASK_FOLLOWUP: 40, ChatbotDA.ACKNOWLEDGE: 30, ChatbotDA.SOCIAL_OBLIGATIONS: 30},
    UserDA.OTHER: {ChatbotDA.ACKNOWLEDGE: 50, ChatbotDA.ASK_FOLLOWUP: 50},
}


@dataclass(frozen=True)
class GenSpec:
    n_dialogues: int
    seed: int = 0
    mismatch_rate: float = 0.15

    def __post_init__(self):
        if self.n_dialogues < 0:
            raise ValueError("n_dialogues must be non-negative")
        if not 0.0 <= self.mismatch_rate <= 1.0:
            raise ValueError("mismatch_rate must lie in [0, 1]")


def _weighted(rng, weights):
    keys = list(weights)
    return rng.choices(keys, weights=[weights[k] for k in keys], k=1)[0]


def _answer(rng, topic_id):
    template = rng.choice(_ANSWERS[topic_id])
    pools = {"h": _HOBBIES, "j": _JOBS, "q": _QUALITIES}
    values = {}
    for key, pool in pools.items():
        picks = rng.sample(pool, 3)
        for i, suffix in enumerate(("", "2", "3")):
            values[key + suffix] = picks[i]
            values[key.upper() + suffix] = picks[i].capitalize()
    return template.format(**values)


def _user_text(rng, user_da, topic_id):
    if user_da is UserDA.ANSWER_RELEVANT:
        return _answer(rng, topic_id)
    return rng.choice(_USER_BANK[user_da])


def _chatbot_text(rng, chatbot_da, question):
    if chatbot_da is ChatbotDA.REPEAT:
        return question
    return rng.choice(_CHATBOT_BANK[chatbot_da])


def _label(user_da, chatbot_da, compatibility):
    if user_da is not None and chatbot_da not in compatibility[user_da]:
        return Appropriateness.INAPPROPRIATE
    if chatbot_da is ChatbotDA.ACKNOWLEDGE:
        return Appropriateness.NEUTRAL
    return Appropriateness.APPROPRIATE


def _compatible_reply(rng, user_da, compatibility):
    weights = _REPLY_WEIGHTS.get(user_da)
    if weights is None:
        return min(compatibility[user_da], key=list(ChatbotDA).index)
    return _weighted(rng, weights)


def _skeleton(rng, index, seed, compatibility):
    """One dialogue as a list of mutable turn records (before planting)."""
    topic = rng.choice(sorted(topic_registry().values(), key=lambda t: t.topic_id))
    turns = [{"speaker": Speaker.CHATBOT, "text": topic.question_text, "chatbot_da": ChatbotDA.OTHER,
              "user_da": None, "after": None}]
    after_question = True
    for _ in range(rng.choices([1, 2, 3], weights=[35, 40, 25], k=1)[0]):
        user_da = _weighted(rng, _AFTER_QUESTION if after_question else _AFTER_STATEMENT)
        turns.append({"speaker": Speaker.USER, "text": _user_text(rng, user_da, topic.topic_id),
                      "user_da": user_da, "chatbot_da": None, "after": None})
        reply = _compatible_reply(rng, user_da, compatibility)
        replies = [reply]
        if user_da is UserDA.ANSWER_RELEVANT and reply is not ChatbotDA.ASK_FOLLOWUP and rng.random() < 0.3:
            replies.append(ChatbotDA.ASK_FOLLOWUP)
        for da in replies:
            turns.append({"speaker": Speaker.CHATBOT, "text": _chatbot_text(rng, da, topic.question_text),
                          "chatbot_da": da, "user_da": None, "after": user_da})
        after_question = replies[-1] in QUESTION_DAS
    return {"id": f"gen-{seed}-{index:05d}", "topic": topic, "turns": turns}


def _mismatch_candidates(user_da, chatbot_da, compatibility):
    # Keep the question/statement form so the following user turn stays coherent.
    wants_question = chatbot_da in QUESTION_DAS
    return [
        da for da in ChatbotDA
        if da not in compatibility[user_da] and (da in QUESTION_DAS) == wants_question
    ]


def generate_corpus(spec, ruleset=None):
    """Deterministic synthetic corpus; the inappropriate share is ``round(rate * responses) / responses``."""
    compatibility = (ruleset or default_ruleset()).compatibility
    rng = random.Random(spec.seed)
    skeletons = [_skeleton(rng, i, spec.seed, compatibility) for i in range(spec.n_dialogues)]

    slots = []
    total = 0
    for d, sk in enumerate(skeletons):
        for t, turn in enumerate(sk["turns"]):
            if turn["speaker"] is not Speaker.CHATBOT:
                continue
            total += 1
            user_da = turn["after"]
            if user_da is None or user_da is UserDA.OTHER:
                continue
            if _mismatch_candidates(user_da, turn["chatbot_da"], compatibility):
                slots.append((d, t))
    n_planted = min(len(slots), round(spec.mismatch_rate * total))
    for d, t in sorted(rng.sample(slots, n_planted)):
        sk = skeletons[d]
        turn = sk["turns"][t]
        da = rng.choice(_mismatch_candidates(turn["after"], turn["chatbot_da"], compatibility))
        turn["chatbot_da"] = da
        turn["text"] = _chatbot_text(rng, da, sk["topic"].question_text)

    dialogues = []
    for sk in skeletons:
        utterances = []
        for i, turn in enumerate(sk["turns"]):
            if turn["speaker"] is Speaker.USER:
                utterances.append(Utterance(Speaker.USER, turn["text"], i, user_da=turn["user_da"]))
            else:
                if turn["after"] is None:
                    label = Appropriateness.NEUTRAL
                else:
                    label = _label(turn["after"], turn["chatbot_da"], compatibility)
                utterances.append(
                    Utterance(Speaker.CHATBOT, turn["text"], i, chatbot_da=turn["chatbot_da"], gold_label=label)
                )
        dialogues.append(Dialogue(sk["id"], sk["topic"].ref, utterances))
    return dialogues
