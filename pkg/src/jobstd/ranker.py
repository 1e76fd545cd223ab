"""Phase-2 ranking: bootstrap linear model, gradient-boosted trees, top-k
selection, and the sentence-to-question-type classifier.

Training is single-threaded and fully deterministic given input order; models
serialize to versioned JSON so the registry can hot-swap them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .features import NUM_FEATURES, SCHEMA_VERSION, EmbeddingTable, FeatureVector, MarketStats, SentenceEncoder, extract
from .tagger import JobPosting, question_sentence_candidates
from .taxonomy import EntityType, Taxonomy

NONE_CLASS = "NONE"


class SchemaMismatch(Exception):
    pass


class DegenerateData(Exception):
    pass


class Untrained(Exception):
    pass


@dataclass(frozen=True)
class TrainingExample:
    features: FeatureVector
    label: int
    weight: float = 1.0
    source: str = "seed"  # "seed" | "feedback"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.weight <= 0:
            raise ValueError("weight must be positive")


@dataclass(frozen=True)
class RankedSuggestion:
    entity_type: EntityType
    entity_id: str
    score: float
    rank: int


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _check_schema(model_version: int) -> None:
    if model_version != SCHEMA_VERSION:
        raise SchemaMismatch(f"model schema {model_version} != {SCHEMA_VERSION}")


def _examples_matrix(data: list[TrainingExample]):
    x = np.array([ex.features.to_list() for ex in data], dtype=np.float64)
    y = np.array([ex.label for ex in data], dtype=np.float64)
    w = np.array([ex.weight for ex in data], dtype=np.float64)
    return x, y, w


def _require_both_classes(y: np.ndarray) -> None:
    if len(y) == 0 or y.min() == y.max():
        raise DegenerateData("training data must contain both label classes")


# ---------------------------------------------------------------------------
# Linear model


@dataclass
class LinearModel:
    weights: np.ndarray  # length NUM_FEATURES
    bias: float
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (NUM_FEATURES,):
            raise ValueError(f"expected {NUM_FEATURES} weights")
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("non-finite parameters")

    def margin(self, x: FeatureVector) -> float:
        return float(self.weights @ x.to_array() + self.bias)


def score_linear(model: LinearModel, x: FeatureVector) -> float:
    _check_schema(model.schema_version)
    return float(sigmoid(model.margin(x)))


def linear_loss_and_grad(weights: np.ndarray, bias: float, x, y, w, l2: float):
    """Weighted logistic loss (plus L2 on weights) and its analytic gradient."""
    margins = x @ weights + bias
    p = sigmoid(margins)
    eps = 1e-15
    loss = -np.sum(w * (y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    loss += 0.5 * l2 * float(weights @ weights)
    resid = w * (p - y)
    grad_w = x.T @ resid + l2 * weights
    grad_b = float(np.sum(resid))
    return float(loss), grad_w, grad_b


def train_linear(
    data: list[TrainingExample],
    epochs: int = 500,
    learning_rate: float = 0.1,
    l2: float = 1e-4,
) -> LinearModel:
    """Full-batch gradient descent with step-halving on loss increase.

    Deterministic given the example order; final loss never exceeds the loss
    at the zero initialization.
    """
    x, y, w = _examples_matrix(data)
    _require_both_classes(y)
    # normalize step size by total weight so the lr is scale-free
    scale = float(np.sum(w))
    weights = np.zeros(NUM_FEATURES)
    bias = 0.0
    lr = learning_rate
    loss, gw, gb = linear_loss_and_grad(weights, bias, x, y, w, l2)
    for _ in range(epochs):
        new_w = weights - lr / scale * gw
        new_b = bias - lr / scale * gb
        new_loss, new_gw, new_gb = linear_loss_and_grad(new_w, new_b, x, y, w, l2)
        if new_loss > loss:
            lr *= 0.5
            if lr < 1e-12:
                break
            continue
        weights, bias, loss, gw, gb = new_w, new_b, new_loss, new_gw, new_gb
    return LinearModel(weights=weights, bias=bias)


# ---------------------------------------------------------------------------
# Gradient-boosted trees


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (value)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def predict(self, x: np.ndarray) -> float:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.value

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeNode":
        if "value" in obj:
            return cls(value=float(obj["value"]))
        return cls(
            feature=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            left=cls.from_dict(obj["left"]),
            right=cls.from_dict(obj["right"]),
        )


@dataclass
class GbdtModel:
    trees: list[TreeNode]
    learning_rate: float
    base_score: float  # log-odds
    schema_version: int = SCHEMA_VERSION

    def margin(self, x: FeatureVector) -> float:
        xv = x.to_array()
        return self.base_score + self.learning_rate * sum(t.predict(xv) for t in self.trees)


def score_gbdt(model: GbdtModel, x: FeatureVector) -> float:
    _check_schema(model.schema_version)
    return float(sigmoid(model.margin(x)))


_EPS_H = 1e-12
_MAX_LEAF = 4.0


def _fit_tree(x, g, h, idx, depth, max_depth, min_leaf) -> TreeNode:
    g_sum, h_sum = float(np.sum(g[idx])), float(np.sum(h[idx]))

    def leaf() -> TreeNode:
        v = -g_sum / (h_sum + _EPS_H)
        return TreeNode(value=float(np.clip(v, -_MAX_LEAF, _MAX_LEAF)))

    if depth >= max_depth or len(idx) < 2 * min_leaf:
        return leaf()
    parent_gain = g_sum * g_sum / (h_sum + _EPS_H)
    best = None  # (gain, feature, threshold)
    for f in range(x.shape[1]):
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sg = g[idx][order]
        sh = h[idx][order]
        cg = np.cumsum(sg)
        ch = np.cumsum(sh)
        n = len(idx)
        for split in range(min_leaf, n - min_leaf + 1):
            if split >= n or sv[split - 1] == sv[split]:
                continue
            gl, hl = cg[split - 1], ch[split - 1]
            gr, hr = cg[-1] - gl, ch[-1] - hl
            gain = gl * gl / (hl + _EPS_H) + gr * gr / (hr + _EPS_H) - parent_gain
            thr = (sv[split - 1] + sv[split]) / 2.0
            if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
                best = (gain, f, thr)
    if best is None:
        return leaf()
    _, f, thr = best
    mask = x[idx, f] < thr
    left_idx = idx[mask]
    right_idx = idx[~mask]
    if len(left_idx) < min_leaf or len(right_idx) < min_leaf:
        return leaf()
    return TreeNode(
        feature=f,
        threshold=float(thr),
        left=_fit_tree(x, g, h, left_idx, depth + 1, max_depth, min_leaf),
        right=_fit_tree(x, g, h, right_idx, depth + 1, max_depth, min_leaf),
    )


def train_gbdt(
    data: list[TrainingExample],
    num_trees: int = 100,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    min_leaf: int = 5,
) -> GbdtModel:
    """Gradient boosting with logistic loss and Newton leaf values.

    Each tree fits the negative gradient; leaves take the step -sum(g)/sum(h)
    (clamped). Splits are exact greedy over sorted feature values; ties break
    on lowest feature index then lowest threshold, so training is
    deterministic.
    """
    x, y, w = _examples_matrix(data)
    _require_both_classes(y)
    p0 = float(np.sum(w * y) / np.sum(w))
    p0 = min(max(p0, 1e-12), 1 - 1e-12)
    base = math.log(p0 / (1 - p0))
    margins = np.full(len(y), base)
    trees: list[TreeNode] = []
    for _ in range(num_trees):
        p = sigmoid(margins)
        g = w * (p - y)
        h = w * p * (1 - p)
        tree = _fit_tree(x, g, h, np.arange(len(y)), 0, max_depth, min_leaf)
        trees.append(tree)
        margins = margins + learning_rate * np.array([tree.predict(row) for row in x])
    return GbdtModel(trees=trees, learning_rate=learning_rate, base_score=base)


def training_log_loss(model: GbdtModel, data: list[TrainingExample], upto: int | None = None) -> float:
    """Weighted mean log-loss using only the first `upto` trees."""
    x, y, w = _examples_matrix(data)
    margins = np.full(len(y), model.base_score)
    use = model.trees if upto is None else model.trees[:upto]
    for tree in use:
        margins += model.learning_rate * np.array([tree.predict(row) for row in x])
    p = np.clip(sigmoid(margins), 1e-15, 1 - 1e-15)
    return float(np.sum(-w * (y * np.log(p) + (1 - y) * np.log(1 - p))) / np.sum(w))


# ---------------------------------------------------------------------------
# Ranking


def rank(model, candidates, k: int) -> list[RankedSuggestion]:
    """Score all candidates, return top min(k, n) with contiguous 1-based
    ranks; ties break by entity_id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = []
    for (etype, eid), fv in candidates:
        scored.append((etype, eid, score_model(model, fv)))
    scored.sort(key=lambda t: (-t[2], t[1]))
    return [
        RankedSuggestion(entity_type=etype, entity_id=eid, score=score, rank=i + 1)
        for i, (etype, eid, score) in enumerate(scored[:k])
    ]


def score_model(model, x: FeatureVector) -> float:
    if isinstance(model, LinearModel):
        return score_linear(model, x)
    if isinstance(model, GbdtModel):
        return score_gbdt(model, x)
    raise TypeError(f"unsupported model {type(model).__name__}")


# ---------------------------------------------------------------------------
# Question-type sentence classifier


@dataclass
class QuestionClassifier:
    classes: list[str]  # sorted; includes NONE_CLASS
    class_weights: np.ndarray | None = None  # K x d
    trained: bool = False

    def probabilities(self, encoded: np.ndarray) -> np.ndarray:
        if not self.trained or self.class_weights is None:
            raise Untrained("classifier has not been trained")
        logits = self.class_weights @ encoded
        logits = logits - np.max(logits)
        e = np.exp(logits)
        return e / np.sum(e)


def classify_sentence(clf: QuestionClassifier, encoder: SentenceEncoder, sentence: str) -> tuple[str, float]:
    p = clf.probabilities(encoder.encode(sentence))
    # argmax returns the first maximal index; classes are sorted, so ties
    # resolve to the lexicographically smallest class id
    i = int(np.argmax(p))
    return clf.classes[i], float(p[i])


def train_question_classifier(
    sentences: list[str],
    labels: list[str],
    table: EmbeddingTable,
    epochs: int = 300,
    learning_rate: float = 1.0,
) -> tuple[QuestionClassifier, SentenceEncoder]:
    """Jointly train the classifier weights and the encoder's tanh projection.

    Full-batch gradient descent with step-halving; returns the classifier and
    an encoder carrying the trained projection.
    """
    if len(sentences) != len(labels) or not sentences:
        raise DegenerateData("need one label per sentence")
    classes = sorted(set(labels) | {NONE_CLASS})
    if len(classes) < 2:
        raise DegenerateData("need at least two classes")
    class_idx = {c: i for i, c in enumerate(classes)}
    d = table.dimension
    k = len(classes)
    base_encoder = SentenceEncoder(table)
    xbar = np.array([base_encoder.mean_vector(s) for s in sentences])
    y = np.zeros((len(sentences), k))
    for i, lbl in enumerate(labels):
        y[i, class_idx[lbl]] = 1.0

    w_proj = np.eye(d)
    b_proj = np.zeros(d)
    c_w = np.zeros((k, d))

    def forward(wp, bp, cw):
        a = xbar @ wp.T + bp
        h = np.tanh(a)
        norms = np.linalg.norm(h, axis=1, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        z = h / safe
        logits = z @ cw.T
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        loss = -np.sum(y * np.log(np.clip(p, 1e-15, None))) / len(sentences)
        return a, h, norms, z, p, float(loss)

    def gradients(a, h, norms, z, p):
        dlogits = (p - y) / len(sentences)
        d_cw = dlogits.T @ z
        dz = dlogits @ c_w
        safe = np.where(norms > 0, norms, 1.0)
        dh = (dz - z * np.sum(dz * z, axis=1, keepdims=True)) / safe
        dh = np.where(norms > 0, dh, 0.0)
        da = dh * (1 - h * h)
        d_wp = da.T @ xbar
        d_bp = da.sum(axis=0)
        return d_wp, d_bp, d_cw

    a, h, norms, z, p, loss = forward(w_proj, b_proj, c_w)
    lr = learning_rate
    for _ in range(epochs):
        d_wp, d_bp, d_cw = gradients(a, h, norms, z, p)
        nw, nb, nc = w_proj - lr * d_wp, b_proj - lr * d_bp, c_w - lr * d_cw
        na, nh, nn, nz, np_, nloss = forward(nw, nb, nc)
        if nloss > loss:
            lr *= 0.5
            if lr < 1e-12:
                break
            continue
        w_proj, b_proj, c_w = nw, nb, nc
        a, h, norms, z, p, loss = na, nh, nn, nz, np_, nloss
    clf = QuestionClassifier(classes=classes, class_weights=c_w, trained=True)
    encoder = SentenceEncoder(table, projection=w_proj, bias=b_proj)
    return clf, encoder


def suggest_questions(
    posting: JobPosting,
    clf: QuestionClassifier,
    encoder: SentenceEncoder,
    model,
    stats: MarketStats,
    taxonomy: Taxonomy,
    k: int = 3,
) -> list[RankedSuggestion]:
    """Sentence candidates -> classifier (drop NONE) -> features -> rank top k."""
    best_sentence: dict[str, tuple[float, str]] = {}
    for sentence, _span in question_sentence_candidates(posting):
        cls, prob = classify_sentence(clf, encoder, sentence)
        if cls == NONE_CLASS:
            continue
        cur = best_sentence.get(cls)
        if cur is None or prob > cur[0]:
            best_sentence[cls] = (prob, sentence)
    candidates = []
    for qid in sorted(best_sentence):
        _, sentence = best_sentence[qid]
        fv = extract(
            posting,
            EntityType.QUESTION_TYPE,
            qid,
            context=[],
            encoder=encoder,
            stats=stats,
            taxonomy=taxonomy,
            surface=sentence,
        )
        candidates.append(((EntityType.QUESTION_TYPE, qid), fv))
    return rank(model, candidates, k) if candidates else []


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(model, data: list[TrainingExample], k: int = 10) -> dict[str, float]:
    scores = np.array([score_model(model, ex.features) for ex in data])
    y = np.array([ex.label for ex in data], dtype=np.float64)
    p = np.clip(scores, 1e-15, 1 - 1e-15)
    log_loss = float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))
    accuracy = float(np.mean((scores >= 0.5) == (y == 1)))
    order = np.argsort(-scores, kind="stable")
    top = y[order][:k]
    precision_at_k = float(np.mean(top)) if len(top) else 0.0
    return {
        "log_loss": log_loss,
        "accuracy": accuracy,
        "auc": auc(scores, y),
        "precision_at_k": precision_at_k,
    }


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUC with midrank tie handling; 0.5 when degenerate."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return 0.5
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    pos_ranks = ranks[labels == 1]
    return float((np.sum(pos_ranks) - len(pos) * (len(pos) + 1) / 2.0) / (len(pos) * len(neg)))


# ---------------------------------------------------------------------------
# Serialization


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "kind": "linear",
            "schema_version": model.schema_version,
            "weights": [float(w) for w in model.weights],
            "bias": float(model.bias),
        }
    if isinstance(model, GbdtModel):
        return {
            "kind": "gbdt",
            "schema_version": model.schema_version,
            "learning_rate": float(model.learning_rate),
            "base_score": float(model.base_score),
            "trees": [t.to_dict() for t in model.trees],
        }
    raise TypeError(f"unsupported model {type(model).__name__}")


def model_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "linear":
        return LinearModel(
            weights=np.array(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            schema_version=int(obj["schema_version"]),
        )
    if kind == "gbdt":
        return GbdtModel(
            trees=[TreeNode.from_dict(t) for t in obj["trees"]],
            learning_rate=float(obj["learning_rate"]),
            base_score=float(obj["base_score"]),
            schema_version=int(obj["schema_version"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def question_model_to_dict(clf: QuestionClassifier, encoder: SentenceEncoder) -> dict:
    return {
        "kind": "question",
        "schema_version": SCHEMA_VERSION,
        "classes": clf.classes,
        "class_weights": [[float(v) for v in row] for row in clf.class_weights],
        "projection": [[float(v) for v in row] for row in encoder.projection],
        "bias": [float(v) for v in encoder.bias],
    }


def question_model_from_dict(obj: dict, table: EmbeddingTable) -> tuple[QuestionClassifier, SentenceEncoder]:
    clf = QuestionClassifier(
        classes=list(obj["classes"]),
        class_weights=np.array(obj["class_weights"], dtype=np.float64),
        trained=True,
    )
    encoder = SentenceEncoder(
        table,
        projection=np.array(obj["projection"], dtype=np.float64),
        bias=np.array(obj["bias"], dtype=np.float64),
    )
    return clf, encoder
