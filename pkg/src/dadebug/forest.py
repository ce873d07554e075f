"""Decision trees and random forests, written for exact reproducibility.

Splits maximise Gini gain over a per-node random subset of features; the
candidate thresholds of a feature are the midpoints between its consecutive
distinct values at the node, and equal gains are resolved towards the lower
feature index and then the lower threshold. Features that are constant at a
node are skipped without counting against the subset size, and a feature
found constant at a node is not drawn again anywhere below it.

Every tree draws its bootstrap sample and its feature-sampling stream from a
seed derived from ``(seed, tree ordinal)`` alone, so a forest is identical no
matter how many worker threads build it, and the first ``k`` trees of an
``n``-tree forest are exactly a ``k``-tree forest.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numba
import numpy as np

from .errors import ModelFormatError, SchemaMismatchError
from .transcript import CLASS_ORDER, Appropriateness

FORMAT_VERSION = 1
N_CLASSES = len(CLASS_ORDER)


class FeaturesPerSplit(str, Enum):
    SQRT = "sqrt"
    LOG2 = "log2"
    ALL = "all"

    def count(self, n_features):
        if self is FeaturesPerSplit.SQRT:
            return max(1, int(math.sqrt(n_features)))
        if self is FeaturesPerSplit.LOG2:
            return max(1, int(math.log2(n_features))) if n_features > 1 else 1
        return n_features


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 500
    max_depth: int = 45
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    features_per_split: FeaturesPerSplit = FeaturesPerSplit.SQRT
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        object.__setattr__(self, "features_per_split", FeaturesPerSplit(self.features_per_split))
        for name in ("n_trees", "max_depth", "min_samples_leaf", "min_samples_split"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    def to_dict(self):
        d = asdict(self)
        d["features_per_split"] = self.features_per_split.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def default_grid(seed=0):
    return [
        Hyperparams(n_trees=n, max_depth=depth, min_samples_leaf=leaf, features_per_split=fps, seed=seed)
        for n in (100, 300, 500)
        for depth in (15, 30, 45)
        for leaf in (1, 5)
        for fps in (FeaturesPerSplit.SQRT, FeaturesPerSplit.LOG2)
    ]


def gini(class_counts):
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini needs at least one positive count")
    p = counts / total
    return float(1.0 - np.sum(p * p))


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _proxy(left_counts, total_counts, n_left, n_right):
    sl = 0.0
    sr = 0.0
    for c in range(left_counts.shape[0]):
        sl += left_counts[c] * left_counts[c]
        r = total_counts[c] - left_counts[c]
        sr += r * r
    return (sl * n_right + sr * n_left) / (n_left * n_right)


@numba.njit(cache=True, nogil=True)
def _scan_small(row, lab, idx, start, end, min_leaf, hist, left_counts, total_counts):
    """Histogram split search for a column of small non-negative integers.

    Returns (proxy, threshold, is_constant); proxy is -1 when no admissible
    threshold exists. Maximising proxy = sum(left^2)/n_left + sum(right^2)/n_right
    is the same as maximising Gini gain.
    """
    n_classes = left_counts.shape[0]
    lo = 255
    hi = 0
    for k in range(start, end):
        v = row[idx[k]]
        hist[v, lab[k]] += 1
        lo = min(lo, v)
        hi = max(hi, v)
    if lo == hi:
        for c in range(n_classes):
            hist[lo, c] = 0
        return -1.0, 0.0, True

    n = end - start
    best_proxy = -1.0
    best_thr = 0.0
    for c in range(n_classes):
        left_counts[c] = 0
    n_left = 0
    prev = lo
    for v in range(lo, hi + 1):
        present = 0
        for c in range(n_classes):
            present += hist[v, c]
        if present == 0:
            continue
        if v > lo:
            n_right = n - n_left
            if n_left >= min_leaf and n_right >= min_leaf:
                proxy = _proxy(left_counts, total_counts, n_left, n_right)
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_thr = (prev + v) / 2.0
        for c in range(n_classes):
            left_counts[c] += hist[v, c]
            hist[v, c] = 0
        n_left += present
        prev = v
    return best_proxy, best_thr, False


@numba.njit(cache=True, nogil=True)
def _scan_sorted(row, lab, idx, start, end, min_leaf, left_counts, total_counts):
    """Sort-based split search for arbitrary real-valued columns; same contract as _scan_small."""
    n = end - start
    vals = np.empty(n)
    for k in range(n):
        vals[k] = row[idx[start + k]]
    order = np.argsort(vals, kind="mergesort")
    if vals[order[0]] == vals[order[n - 1]]:
        return -1.0, 0.0, True
    best_proxy = -1.0
    best_thr = 0.0
    for c in range(left_counts.shape[0]):
        left_counts[c] = 0
    for k in range(n - 1):
        left_counts[lab[start + order[k]]] += 1
        a = vals[order[k]]
        b = vals[order[k + 1]]
        if a == b:
            continue
        n_left = k + 1
        n_right = n - n_left
        if n_left < min_leaf or n_right < min_leaf:
            continue
        proxy = _proxy(left_counts, total_counts, n_left, n_right)
        if proxy > best_proxy:
            best_proxy = proxy
            best_thr = (a + b) / 2.0
    return best_proxy, best_thr, False


@numba.njit(cache=True, nogil=True)
def _build(Xt, Xs, small, y, samples, n_classes, max_depth, min_split, min_leaf, max_features, seed):
    n_samples = samples.shape[0]
    n_features = Xt.shape[0]
    capacity = 2 * n_samples + 1
    feature = np.full(capacity, -1, dtype=np.int64)
    threshold = np.zeros(capacity)
    left = np.full(capacity, -1, dtype=np.int64)
    right = np.full(capacity, -1, dtype=np.int64)
    counts = np.zeros((capacity, n_classes), dtype=np.int64)

    idx = samples.copy()
    lab = np.empty(n_samples, dtype=np.int64)
    for k in range(n_samples):
        lab[k] = y[idx[k]]
    perm = np.empty(n_features, dtype=np.int64)
    # known_constant[d] holds the features found constant at the node being
    # expanded at depth d; children inherit it from known_constant[d - 1].
    # Depth-first order keeps the parent's row intact until both children ran.
    levels = min(max_depth, capacity) + 1
    known_constant = np.zeros((levels, n_features), dtype=np.bool_)
    hist = np.zeros((256, n_classes), dtype=np.int64)
    left_counts = np.zeros(n_classes, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed

    stack = np.empty((capacity, 4), dtype=np.int64)  # node, start, end, depth
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_samples
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n = end - start
        for k in range(start, end):
            counts[node, lab[k]] += 1
        nonzero = 0
        sq = 0.0
        for c in range(n_classes):
            if counts[node, c] > 0:
                nonzero += 1
            sq += counts[node, c] * counts[node, c]
        if depth >= max_depth or n < min_split or n < 2 * min_leaf or nonzero <= 1:
            continue

        n_cand = 0
        for f in range(n_features):
            if depth == 0 or not known_constant[depth - 1, f]:
                perm[n_cand] = f
                n_cand += 1
                known_constant[depth, f] = False
            else:
                known_constant[depth, f] = True

        best_f = -1
        best_thr = 0.0
        best_proxy = -1.0
        visited = 0
        for k in range(n_cand):
            j = k + np.int64(_splitmix(state) % np.uint64(n_cand - k))
            tmp = perm[k]
            perm[k] = perm[j]
            perm[j] = tmp
            f = perm[k]
            if small[f]:
                proxy, thr, constant = _scan_small(
                    Xs[f], lab, idx, start, end, min_leaf, hist, left_counts, counts[node]
                )
            else:
                proxy, thr, constant = _scan_sorted(
                    Xt[f], lab, idx, start, end, min_leaf, left_counts, counts[node]
                )
            if constant:
                known_constant[depth, f] = True
                continue
            if proxy >= 0.0:
                if (
                    proxy > best_proxy
                    or (proxy == best_proxy and (f < best_f or (f == best_f and thr < best_thr)))
                ):
                    best_proxy = proxy
                    best_f = f
                    best_thr = thr
            visited += 1
            if visited >= max_features:
                break
        if best_f < 0:
            continue

        # Partition idx[start:end] so samples going left come first.
        i = start
        j = end - 1
        while i <= j:
            if Xt[best_f, idx[i]] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                tmp = lab[i]
                lab[i] = lab[j]
                lab[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # Right pushed first so the left subtree is numbered and built first.
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = i
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = n_nodes
        stack[top + 1, 1] = start
        stack[top + 1, 2] = i
        stack[top + 1, 3] = depth + 1
        top += 2
        n_nodes += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], counts[:n_nodes]


@numba.njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


# ---------------------------------------------------------------------------
# trees


@dataclass
class Tree:
    """Array-backed binary tree; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    _leaf_class: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # Lowest class index wins a tie, which prefers flagging.
        self._leaf_class = np.argmax(self.counts, axis=1)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def is_leaf(self, node):
        return self.feature[node] < 0

    def depth(self):
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    def apply(self, X):
        return _apply(self.feature, self.threshold, self.left, self.right, np.asarray(X, dtype=float))

    def predict(self, X):
        return self._leaf_class[self.apply(X)]

    def decision_path(self, x):
        """List of (feature, threshold, went_left) from root to leaf, then the leaf counts."""
        steps, node = [], 0
        while self.feature[node] >= 0:
            f, t = int(self.feature[node]), float(self.threshold[node])
            go_left = bool(x[f] <= t)
            steps.append((f, t, go_left))
            node = self.left[node] if go_left else self.right[node]
        return steps, [int(c) for c in self.counts[node]]

    def to_dict(self, node=0):
        if self.feature[node] < 0:
            return {"counts": [int(c) for c in self.counts[node]]}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, root):
        feature, threshold, left, right, counts = [], [], [], [], []

        def add(d):
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append([0] * N_CLASSES)
            if "counts" in d:
                if len(d["counts"]) != N_CLASSES:
                    raise ModelFormatError("leaf counts have the wrong number of classes")
                counts[node] = [int(c) for c in d["counts"]]
            else:
                feature[node] = int(d["feature"])
                threshold[node] = float(d["threshold"])
                left[node] = add(d["left"])
                right[node] = add(d["right"])
                counts[node] = [a + b for a, b in zip(counts[left[node]], counts[right[node]])]
            return node

        add(root)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(counts, dtype=np.int64).reshape(-1, N_CLASSES),
        )


def _check_training_data(X, y):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training needs a non-empty 2-d feature matrix")
    if len(y) != len(X):
        raise ValueError("X and y differ in length")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValueError("every training sample needs a label")
    return X, y


class _Columns:
    """Feature-major copies of X; small non-negative integer columns also as uint8."""

    def __init__(self, X):
        self.Xt = np.ascontiguousarray(X.T)
        self.small = np.all((self.Xt >= 0) & (self.Xt <= 255) & (self.Xt == np.floor(self.Xt)), axis=1)
        self.Xs = np.where(self.small[:, None], self.Xt, 0).astype(np.uint8)

    @property
    def n_features(self):
        return self.Xt.shape[0]


def _grow(cols, y, hyperparams, tree_seed, samples):
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    max_features = hyperparams.features_per_split.count(cols.n_features)
    arrays = _build(
        cols.Xt, cols.Xs, cols.small, y, samples, N_CLASSES, hyperparams.max_depth,
        hyperparams.min_samples_split, hyperparams.min_samples_leaf, max_features,
        np.uint64(tree_seed % 2**64),
    )
    # Copy out so trees do not pin the full-capacity build buffers.
    return Tree(*(np.array(a) for a in arrays))


def train_tree(X, y, hyperparams=Hyperparams(), tree_seed=0, samples=None):
    """Grow one tree on ``samples`` (row indices, repeats allowed; default all rows)."""
    X, y = _check_training_data(X, y)
    if samples is None:
        samples = np.arange(len(X))
    return _grow(_Columns(X), y, hyperparams, tree_seed, samples)


def tree_seeds(seed, ordinal):
    """(bootstrap seed sequence, node-sampling seed) for one tree of a forest."""
    seq = np.random.SeedSequence(entropy=seed % 2**64, spawn_key=(ordinal,))
    node_seed = int(seq.generate_state(1, dtype=np.uint64)[0])
    return seq, node_seed


def bootstrap_indices(n_samples, seed, ordinal):
    seq, _ = tree_seeds(seed, ordinal)
    return np.random.Generator(np.random.PCG64(seq)).integers(0, n_samples, size=n_samples)


def _train_ordinal(cols, y, hyperparams, ordinal):
    _, node_seed = tree_seeds(hyperparams.seed, ordinal)
    n = len(y)
    samples = bootstrap_indices(n, hyperparams.seed, ordinal) if hyperparams.bootstrap else np.arange(n)
    return _grow(cols, y, hyperparams, node_seed, samples)


def _train_trees(X, y, hyperparams, threads=1):
    X, y = _check_training_data(X, y)
    cols = _Columns(X)
    ordinals = range(hyperparams.n_trees)
    if threads <= 1:
        return [_train_ordinal(cols, y, hyperparams, t) for t in ordinals]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: _train_ordinal(cols, y, hyperparams, t), ordinals))


# ---------------------------------------------------------------------------
# forests


@dataclass
class ForestModel:
    trees: list
    hyperparams: Hyperparams
    vocabulary: dict
    schema_fingerprint: str
    class_order: tuple = CLASS_ORDER
    format_version: int = FORMAT_VERSION

    @property
    def n_nodes(self):
        return sum(t.n_nodes for t in self.trees)

    @property
    def n_parameters(self):
        """Stored numbers: feature and threshold per split node, class counts per leaf."""
        leaves = sum(t.n_leaves for t in self.trees)
        return 2 * (self.n_nodes - leaves) + N_CLASSES * leaves

    def max_depth(self):
        return max((t.depth() for t in self.trees), default=0)

    def _check(self, fingerprint):
        if fingerprint is not None and fingerprint != self.schema_fingerprint:
            raise SchemaMismatchError(
                "feature schema fingerprint does not match the model "
                f"({fingerprint[:12]}... vs {self.schema_fingerprint[:12]}...)"
            )

    def votes(self, X, schema_fingerprint=None):
        self._check(schema_fingerprint)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros((len(X), N_CLASSES), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1
        return votes

    def predict_indices(self, X, schema_fingerprint=None):
        return np.argmax(self.votes(X, schema_fingerprint), axis=1)

    def predict_dataset(self, dataset):
        return self.predict_indices(dataset.X, dataset.schema_fingerprint)

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "hyperparams": self.hyperparams.to_dict(),
            "class_order": [c.value for c in self.class_order],
            "vocabulary": self.vocabulary,
            "schema_fingerprint": self.schema_fingerprint,
            "trees": [t.to_dict() for t in self.trees],
        }


def train_forest(X, y, hyperparams=Hyperparams(), vocabulary=None, schema_fingerprint="", threads=1):
    trees = _train_trees(X, y, hyperparams, threads)
    return ForestModel(trees, hyperparams, vocabulary or {}, schema_fingerprint)


def predict(model, vector):
    """Plurality label and per-class votes for one feature vector."""
    x = vector.dense() if hasattr(vector, "dense") else np.asarray(vector, dtype=float)
    fingerprint = getattr(vector, "schema_fingerprint", None)
    votes = model.votes(x[None, :], fingerprint)[0]
    label = CLASS_ORDER[int(np.argmax(votes))]
    return label, {c: int(v) for c, v in zip(CLASS_ORDER, votes)}


def save_model(model, path):
    text = json.dumps(model.to_dict(), ensure_ascii=False, separators=(",", ":"))
    Path(path).write_text(text, encoding="utf-8")
    return len(text.encode("utf-8"))


def load_model(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "format_version" not in data:
        raise ModelFormatError(f"model file {path} has no format_version")
    if data["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"model file {path} has format_version {data['format_version']!r}; "
            f"this version reads format_version {FORMAT_VERSION}"
        )
    try:
        class_order = tuple(Appropriateness(c) for c in data["class_order"])
        if class_order != CLASS_ORDER:
            raise ModelFormatError(f"unexpected class order {data['class_order']}")
        hyperparams = Hyperparams.from_dict(data["hyperparams"])
        trees = [Tree.from_dict(t) for t in data["trees"]]
        return ForestModel(trees, hyperparams, data["vocabulary"], data["schema_fingerprint"], class_order)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file {path} is corrupt: {exc}") from None


# ---------------------------------------------------------------------------
# model selection


def grid_search(train, dev, grid, threads=1):
    """Pick the config with the best support-weighted dev F1.

    ``train`` and ``dev`` are :class:`~dadebug.features.Dataset` objects. Ties
    go to fewer trees, then smaller max_depth, then grid order. Configs that
    differ only in ``n_trees`` share one trained forest, since a smaller
    forest is a prefix of a larger one.
    """
    from .metrics import evaluate

    grid = list(grid)
    if not grid:
        raise ValueError("grid search needs at least one configuration")
    if len(train) == 0 or len(dev) == 0:
        raise ValueError("grid search needs non-empty train and dev splits")

    groups = {}
    for i, hp in enumerate(grid):
        key = (hp.max_depth, hp.min_samples_leaf, hp.min_samples_split, hp.features_per_split, hp.seed, hp.bootstrap)
        groups.setdefault(key, []).append(i)

    report = [None] * len(grid)
    gold = [CLASS_ORDER[i] for i in dev.y]
    rows = np.arange(len(dev))
    for members in groups.values():
        largest = max(grid[i].n_trees for i in members)
        base = grid[members[0]]
        hp = Hyperparams(largest, base.max_depth, base.min_samples_leaf, base.min_samples_split,
                         base.features_per_split, base.seed, base.bootstrap)
        trees = _train_trees(train.X, train.y, hp, threads)
        votes = np.zeros((len(dev), N_CLASSES), dtype=np.int64)
        wanted = sorted({grid[i].n_trees for i in members})
        snapshots = {}
        for t, tree in enumerate(trees, start=1):
            votes[rows, tree.predict(dev.X)] += 1
            if t in wanted:
                snapshots[t] = np.argmax(votes, axis=1)
        for i in members:
            pred = [CLASS_ORDER[k] for k in snapshots[grid[i].n_trees]]
            result = evaluate(gold, pred)
            report[i] = {"hyperparams": grid[i].to_dict(), "weighted_f1": result.weighted["f1"],
                         "accuracy": result.accuracy}

    best = min(
        range(len(grid)),
        key=lambda i: (-report[i]["weighted_f1"], grid[i].n_trees, grid[i].max_depth, i),
    )
    return grid[best], report
