"""Depth-2 decision trees and one boosted stage with threshold calibration."""

import math
from dataclasses import dataclass, field

import numpy as np

from .annotation import Provenance

# impurity comparisons within this slack count as ties, broken by
# (lower feature index, lower threshold)
_TIE_TOL = 1e-12
_SPLIT_BLOCK = 64

MAX_TREE_DEPTH = 2


class TrainingError(RuntimeError):
    """Boosting could not produce a valid model."""


class NoPositivesError(ValueError):
    """Threshold calibration needs at least one positive sample."""


@dataclass(frozen=True)
class LabeledSample:
    """One training example: flat feature vector, class, and origin tag."""

    features: np.ndarray
    label: int
    provenance: Provenance

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: object  # x[feature] <= threshold
    right: object


def _node_depth(node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_node_depth(node.left), _node_depth(node.right))


def _node_leaves(node) -> int:
    if isinstance(node, Leaf):
        return 1
    return _node_leaves(node.left) + _node_leaves(node.right)


@dataclass(frozen=True)
class DecisionTree:
    """Binary classification tree with at most two split levels."""

    root: object

    def __post_init__(self):
        if _node_depth(self.root) > MAX_TREE_DEPTH:
            raise ValueError("tree exceeds two split levels")

    def predict(self, x) -> int:
        node = self.root
        while isinstance(node, Split):
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.label

    def predict_batch(self, X: np.ndarray, idx=None) -> np.ndarray:
        """Votes (+1/-1 as float64) for rows of X, or for X[idx]."""
        rows = np.arange(len(X)) if idx is None else np.asarray(idx)
        out = np.empty(len(rows), dtype=np.float64)
        stack = [(self.root, np.arange(len(rows)))]
        while stack:
            node, pos = stack.pop()
            if isinstance(node, Leaf):
                out[pos] = float(node.label)
            elif len(pos):
                went_left = X[rows[pos], node.feature] <= node.threshold
                stack.append((node.left, pos[went_left]))
                stack.append((node.right, pos[~went_left]))
        return out

    @property
    def n_leaves(self) -> int:
        return _node_leaves(self.root)


@dataclass(eq=False)
class StageModel:
    """One boosted stage: weighted tree votes against a pass threshold."""

    trees: tuple
    alphas: np.ndarray
    threshold: float
    n_features: int
    round_errors: tuple

    def __post_init__(self):
        self.trees = tuple(self.trees)
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.round_errors = tuple(float(e) for e in self.round_errors)
        if len(self.trees) < 1 or len(self.trees) != len(self.alphas):
            raise ValueError("need >= 1 tree with one alpha each")
        if np.any(self.alphas <= 0):
            raise ValueError("vote weights must be positive")

    def _check_dim(self, dim: int):
        if dim != self.n_features:
            raise ValueError(
                f"feature vector has {dim} values, stage expects "
                f"{self.n_features}"
            )

    def score(self, x) -> float:
        x = np.asarray(x)
        self._check_dim(x.shape[-1])
        return float(
            sum(a * t.predict(x) for a, t in zip(self.alphas, self.trees))
        )

    def scores_batch(self, X: np.ndarray, idx=None) -> np.ndarray:
        self._check_dim(X.shape[1])
        n = len(X) if idx is None else len(idx)
        out = np.zeros(n, dtype=np.float64)
        for alpha, tree in zip(self.alphas, self.trees):
            out += alpha * tree.predict_batch(X, idx)
        return out

    def accepts(self, x) -> bool:
        return self.score(x) >= self.threshold


@dataclass(frozen=True)
class StageConfig:
    """Knobs of one stage's boosting loop."""

    max_trees: int = 40
    target_stage_dr: float = 0.995
    target_stage_fpr: float = 0.5
    eps_min: float = 1e-10


@dataclass
class StageTrace:
    """Per-round telemetry of a training run, for audits and references."""

    errors: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    weights: list = field(default_factory=list)  # after each round's update
    stop_reason: str = ""


# ---------------------------------------------------------------------------
# split search

def _find_best_split(X, y, w, order, mask=None):
    """Best (feature, threshold) by weighted Gini over midpoint candidates.

    order holds per-column argsorts of X; mask selects the node's samples
    (None means all). Returns None when no candidate separates two distinct
    values.
    """
    n, d = X.shape
    wp_all = w * (y > 0)
    wn_all = w * (y < 0)
    k = n if mask is None else int(mask.sum())
    if k < 2:
        return None
    best = None
    best_imp = math.inf
    for c0 in range(0, d, _SPLIT_BLOCK):
        c1 = min(c0 + _SPLIT_BLOCK, d)
        cols = np.arange(c0, c1)
        ob = order[:, c0:c1].T  # (b, n), each row ascending by feature value
        if mask is None:
            idx = ob
        else:
            idx = ob[mask[ob]].reshape(c1 - c0, k)
        vals = X[idx, cols[:, None]]
        cp = np.cumsum(wp_all[idx], axis=1)
        cn = np.cumsum(wn_all[idx], axis=1)
        lp, ln = cp[:, :-1], cn[:, :-1]
        rp = cp[:, -1:] - lp
        rn = cn[:, -1:] - ln
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = lp + ln
            rw = rp + rn
            imp = np.where(lw > 0, 2.0 * lp * ln / lw, 0.0) + np.where(
                rw > 0, 2.0 * rp * rn / rw, 0.0
            )
        imp[~(vals[:, :-1] < vals[:, 1:])] = np.inf
        row_min = imp.min(axis=1)
        pos = np.argmax(imp <= row_min[:, None] + _TIE_TOL, axis=1)
        for r in np.flatnonzero(np.isfinite(row_min)):
            cand = float(imp[r, pos[r]])
            if best is None or cand < best_imp - _TIE_TOL:
                lo = vals[r, pos[r]]
                hi = vals[r, pos[r] + 1]
                t = (lo + hi) / 2.0
                if t == hi:  # midpoint rounded up to the right value
                    t = lo
                best = (int(c0 + r), float(t))
            if cand < best_imp:
                best_imp = cand
    return best


def _majority(y, w, mask) -> Leaf:
    sel_pos = (y > 0) if mask is None else mask & (y > 0)
    sel_neg = (y < 0) if mask is None else mask & (y < 0)
    wp = float(w[sel_pos].sum())
    wn = float(w[sel_neg].sum())
    return Leaf(1 if wp >= wn else -1), wp, wn


def _train_tree_presorted(X, y, w, order) -> DecisionTree:
    def build(mask, depth):
        leaf, wp, wn = _majority(y, w, mask)
        if depth >= MAX_TREE_DEPTH or wp == 0.0 or wn == 0.0:
            return leaf
        found = _find_best_split(X, y, w, order, mask)
        if found is None:
            return leaf
        feature, threshold = found
        went_left = X[:, feature] <= threshold
        left_mask = went_left if mask is None else mask & went_left
        right_mask = ~went_left if mask is None else mask & ~went_left
        return Split(
            feature,
            threshold,
            build(left_mask, depth + 1),
            build(right_mask, depth + 1),
        )

    return DecisionTree(build(None, 0))


def _stack_samples(samples):
    if not samples:
        raise ValueError("empty sample set")
    X = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([s.label for s in samples], dtype=np.float64)
    return X, y


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"need one weight per sample ({n}), got {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-6:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    return w


def train_tree(samples, weights) -> DecisionTree:
    """Greedy two-level tree minimizing weighted Gini impurity.

    Candidate thresholds are midpoints of consecutive distinct sorted
    feature values; impurity ties go to the lower feature index, then the
    lower threshold; leaf-majority ties go to +1.
    """
    X, y = _stack_samples(samples)
    w = _check_weights(weights, len(y))
    order = np.argsort(X, axis=0).astype(np.int32)
    return _train_tree_presorted(X, y, w, order)


def weighted_error_array(tree: DecisionTree, X, y, w) -> float:
    pred = tree.predict_batch(X)
    return float(w[pred != y].sum())


def weighted_error(tree: DecisionTree, samples, weights) -> float:
    """Total weight of the samples the tree misclassifies."""
    X, y = _stack_samples(samples)
    w = _check_weights(weights, len(y))
    return weighted_error_array(tree, X, y, w)


def _threshold_for_dr(scores: np.ndarray, target_dr: float) -> float:
    """Largest cutoff keeping at least target_dr of the scores accepted."""
    if not 0.0 < target_dr <= 1.0:
        raise ValueError(f"target detection rate must be in (0, 1], got {target_dr}")
    n = len(scores)
    if n == 0:
        raise NoPositivesError("no positive samples to calibrate on")
    k = max(1, math.ceil(target_dr * n - 1e-9))
    return float(np.sort(scores)[::-1][k - 1])


def calibrate_threshold(stage: StageModel, positives, target_dr: float) -> float:
    """Pass threshold accepting at least target_dr of the positive vectors."""
    rows = [np.asarray(getattr(p, "values", p), dtype=np.float64) for p in positives]
    if not rows:
        raise NoPositivesError("no positive samples to calibrate on")
    scores = np.array([stage.score(r) for r in rows])
    return _threshold_for_dr(scores, target_dr)


def train_stage_traced(X, y, config: StageConfig = StageConfig()):
    """Boosting loop over depth-2 trees; returns the stage and its trace.

    Each round fits a tree on the current weights, rejects it when its
    weighted error reaches 1/2, otherwise adds it with vote weight
    alpha = ln((1 - eps) / eps) / 2 and reweights so correctly classified
    samples lose weight. Rounds stop at max_trees, on a perfect tree, or
    once the calibrated stage passes the false-positive target.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if config.max_trees < 1:
        raise ValueError(f"max_trees must be >= 1, got {config.max_trees}")
    if n == 0:
        raise ValueError("empty sample set")
    pos = y > 0
    neg = y < 0
    if not pos.any() or not neg.any():
        raise ValueError("training needs samples of both labels")

    order = np.argsort(X, axis=0).astype(np.int32)
    w = np.full(n, 1.0 / n)
    scores = np.zeros(n)
    trees = []
    trace = StageTrace()

    for _ in range(config.max_trees):
        tree = _train_tree_presorted(X, y, w, order)
        pred = tree.predict_batch(X)
        eps = float(w[pred != y].sum())
        if eps >= 0.5:
            trace.stop_reason = "weak_learner_at_chance"
            break
        eps = max(eps, config.eps_min)
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        trees.append(tree)
        trace.errors.append(eps)
        trace.alphas.append(alpha)
        scores += alpha * pred
        w = w * np.exp(-alpha * y * pred)
        w /= w.sum()
        trace.weights.append(w.copy())
        # the update must leave the new tree at exactly chance level
        if abs(float(w[pred != y].sum()) - 0.5) > 1e-6:
            raise TrainingError("weight update failed to rebalance the round")
        if eps <= config.eps_min:
            trace.stop_reason = "perfect_tree"
            break
        thr = _threshold_for_dr(scores[pos], config.target_stage_dr)
        if float(np.mean(scores[neg] >= thr)) <= config.target_stage_fpr:
            trace.stop_reason = "stage_fpr_target_met"
            break
    else:
        trace.stop_reason = "max_trees"

    if not trees:
        raise TrainingError(
            "first weak learner is no better than chance; stage needs >= 1 tree"
        )

    threshold = _threshold_for_dr(scores[pos], config.target_stage_dr)
    stage = StageModel(
        trees=tuple(trees),
        alphas=np.array(trace.alphas),
        threshold=threshold,
        n_features=X.shape[1],
        round_errors=tuple(trace.errors),
    )

    # boosting guarantee: training error of the sign rule is bounded by
    # the product of the per-round 2*sqrt(eps*(1-eps)) factors
    err0 = float(np.mean(np.where(scores >= 0.0, 1.0, -1.0) != y))
    bound = stage_error_bound(stage)
    if err0 > bound + 1e-12:
        raise TrainingError(
            f"AdaBoost error bound violated: {err0} > {bound}"
        )
    return stage, trace


def stage_error_bound(stage: StageModel) -> float:
    """Product of 2*sqrt(eps*(1-eps)) over the stage's boosting rounds."""
    return float(
        np.prod([2.0 * math.sqrt(e * (1.0 - e)) for e in stage.round_errors])
    )


def train_stage_array(X, y, config: StageConfig = StageConfig()) -> StageModel:
    stage, _ = train_stage_traced(X, y, config)
    return stage


def train_stage(samples, config: StageConfig = StageConfig()) -> StageModel:
    """Train one stage from labeled samples (see train_stage_traced)."""
    X, y = _stack_samples(samples)
    return train_stage_array(X, y, config)


def stage_score(stage: StageModel, x) -> float:
    """Weighted vote sum of the stage's trees on one vector."""
    return stage.score(x)


def stage_accepts(stage: StageModel, x) -> bool:
    """True when the vote sum reaches the stage threshold."""
    return stage.accepts(x)


# ---------------------------------------------------------------------------
# serialization

def _node_to_dict(node):
    if isinstance(node, Leaf):
        return {"leaf": node.label}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d, n_features: int):
    if "leaf" in d:
        label = d["leaf"]
        if label not in (-1, 1):
            raise ValueError(f"leaf label must be +1/-1, got {label}")
        return Leaf(int(label))
    feature = int(d["feature"])
    if not 0 <= feature < n_features:
        raise ValueError(f"feature index {feature} out of range")
    return Split(
        feature,
        float(d["threshold"]),
        _node_from_dict(d["left"], n_features),
        _node_from_dict(d["right"], n_features),
    )


def stage_to_dict(stage: StageModel) -> dict:
    return {
        "n_features": stage.n_features,
        "threshold": stage.threshold,
        "alphas": [float(a) for a in stage.alphas],
        "round_errors": list(stage.round_errors),
        "trees": [_node_to_dict(t.root) for t in stage.trees],
    }


def stage_from_dict(d: dict) -> StageModel:
    n_features = int(d["n_features"])
    trees = tuple(
        DecisionTree(_node_from_dict(t, n_features)) for t in d["trees"]
    )
    return StageModel(
        trees=trees,
        alphas=np.array(d["alphas"], dtype=np.float64),
        threshold=float(d["threshold"]),
        n_features=n_features,
        round_errors=tuple(float(e) for e in d["round_errors"]),
    )
