"""Tokenization and small string utilities shared by the tagger and features."""

import re

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Function words plus a few sentiment fillers ("like", "love", "enjoy") that
# carry no topical content in short interview answers.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been
    before being below between both but by can could did do does doing done down
    during each few for from further get got had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more most my
    myself no nor not now of off on once only or other our ours ourselves out over
    own same she should so some such than that the their theirs them themselves then
    these they this those through to too under until up very was we were what when
    where which while who whom will with would you your yours yourself yourselves
    s t m re ve ll d like love enjoy really lot lots much many also well oh um uh
    yes yeah ok okay sure thing things pretty
    """.split()
)


def tokenize(text):
    """Lowercase, split on non-alphanumeric runs; no stemming."""
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text):
    return [t for t in tokenize(text) if t not in STOPWORDS]


def normalize(text):
    return " ".join(tokenize(text))


def levenshtein(a, b):
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def edit_similarity(a, b):
    """1 - edit distance / longer length, on normalized text; 1.0 for two empties."""
    a, b = normalize(a), normalize(b)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest
