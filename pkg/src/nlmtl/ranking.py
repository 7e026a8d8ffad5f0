"""Pairwise-comparison ranking decoded over the acyclic constraint set.

Documents are numbered 1..D and each unordered pair (p, q) with p < q is one
task carrying a label in {-1, 0, +1}: +1 means p ranks above q, -1 the
opposite, 0 abstains.  A fitted RankingModel holds one score model per pair;
at decode time the per-pair misclassification costs are netted into a
tournament and a greedy feedback-arc-set heuristic produces a total order,
from which the cheapest order-consistent labeling is read off.  The decoded
label vector always induces an acyclic digraph.

The greedy ordering is the classic two-ended vertex sequencing: sinks are
peeled to the back, sources to the front, and the remaining vertex with the
largest out-minus-in weight is appended, which for unweighted simple
digraphs removes at most |E|/2 - |V|/6 edges.  Exact decoding by permutation
enumeration is available for D <= 8.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .kernels import KernelSpec, as_point
from .scores import ScoreModel, TaskData, alpha_at, fit_scores

LABELS = (-1, 0, 1)  # column order of every cost array
MAX_EXACT_DOCS = 8


@dataclass(frozen=True)
class PairIndex:
    """Bijection between pairs (p, q), 1 <= p < q <= D, and flat indices 0..T-1.

    Flat order is lexicographic: (1,2), (1,3), ..., (1,D), (2,3), ...
    """

    n_docs: int

    def __post_init__(self):
        if self.n_docs < 2:
            raise ValueError("need at least 2 documents")

    @property
    def n_pairs(self) -> int:
        return self.n_docs * (self.n_docs - 1) // 2

    def to_flat(self, p: int, q: int) -> int:
        if not (1 <= p < q <= self.n_docs):
            raise ValueError(f"invalid pair ({p}, {q}) for {self.n_docs} documents")
        return (p - 1) * (2 * self.n_docs - p) // 2 + (q - p - 1)

    def from_flat(self, t: int) -> tuple[int, int]:
        if not (0 <= t < self.n_pairs):
            raise ValueError(f"flat index {t} out of range")
        p = 1
        offset = t
        while offset >= self.n_docs - p:
            offset -= self.n_docs - p
            p += 1
        return p, p + 1 + offset

    def pairs(self) -> list[tuple[int, int]]:
        return [(p, q) for p in range(1, self.n_docs) for q in range(p + 1, self.n_docs + 1)]


def labels_acyclic(n_docs: int, labels) -> bool:
    """True if the digraph induced by the sign of each pair label is acyclic.

    Label > 0 adds the edge p -> q, label < 0 adds q -> p, 0 adds nothing.
    """
    idx = PairIndex(n_docs)
    labels = np.asarray(labels, dtype=float).ravel()
    if labels.shape[0] != idx.n_pairs:
        raise ValueError(f"expected {idx.n_pairs} labels, got {labels.shape[0]}")
    succ = [[] for _ in range(n_docs)]
    indeg = [0] * n_docs
    for t, (p, q) in enumerate(idx.pairs()):
        if labels[t] > 0:
            succ[p - 1].append(q - 1)
            indeg[q - 1] += 1
        elif labels[t] < 0:
            succ[q - 1].append(p - 1)
            indeg[p - 1] += 1
    # Kahn's algorithm
    queue = deque(v for v in range(n_docs) if indeg[v] == 0)
    seen = 0
    while queue:
        v = queue.popleft()
        seen += 1
        for u in succ[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                queue.append(u)
    return seen == n_docs


@dataclass
class RankingModel:
    """One score model per pair; pairs without training data stay None
    ("uninformed": zero cost for every label, decoded to 0)."""

    n_docs: int
    pair_models: list
    weighted: bool = False

    def __post_init__(self):
        if len(self.pair_models) != PairIndex(self.n_docs).n_pairs:
            raise ValueError("wrong number of pair models")

    @property
    def index(self) -> PairIndex:
        return PairIndex(self.n_docs)

    def to_dict(self) -> dict:
        return {
            "D": self.n_docs,
            "weighted": self.weighted,
            "pairs": [m.to_dict() if m is not None else None for m in self.pair_models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankingModel":
        models = [ScoreModel.from_dict(m) if m is not None else None for m in d["pairs"]]
        return cls(n_docs=int(d["D"]), pair_models=models, weighted=bool(d["weighted"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "RankingModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_ranking(n_docs: int, pair_data, kernel: KernelSpec, lambdas,
                weighted: bool = False) -> RankingModel:
    """Fit one ridge score model per pair on that pair's own training inputs.

    ``pair_data`` is a sequence of TaskData (or None for pairs with no
    observations), flat-indexed per PairIndex.  ``lambdas`` is a scalar or a
    per-pair sequence.
    """
    idx = PairIndex(n_docs)
    pair_data = list(pair_data)
    if len(pair_data) != idx.n_pairs:
        raise ValueError(f"expected {idx.n_pairs} pair datasets, got {len(pair_data)}")
    if np.isscalar(lambdas):
        lams = [float(lambdas)] * idx.n_pairs
    else:
        lams = [float(v) for v in lambdas]
        if len(lams) != idx.n_pairs:
            raise ValueError("one lambda per pair required")
    models = []
    for data, lam in zip(pair_data, lams):
        if data is None or data.n == 0:
            models.append(None)
        else:
            models.append(fit_scores(kernel, data, lam))
    return RankingModel(n_docs=n_docs, pair_models=models, weighted=weighted)


def build_pair_datasets(n_docs: int, features, p_col, q_col, labels):
    """Group rows (x, p, q, label) into per-pair TaskData, flat-indexed."""
    idx = PairIndex(n_docs)
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    p_col = np.asarray(p_col, dtype=int)
    q_col = np.asarray(q_col, dtype=int)
    labels = np.asarray(labels, dtype=float)
    buckets = [[] for _ in range(idx.n_pairs)]
    for i in range(features.shape[0]):
        p, q = int(p_col[i]), int(q_col[i])
        if p > q:
            p, q = q, p
            label = -labels[i]
        else:
            label = labels[i]
        buckets[idx.to_flat(p, q)].append((features[i], label))
    out = []
    for rows in buckets:
        if not rows:
            out.append(None)
        else:
            out.append(TaskData(x=np.array([r[0] for r in rows]),
                                y=np.array([r[1] for r in rows])))
    return out


def pair_costs(model: RankingModel, x) -> np.ndarray:
    """Per-pair cost of decoding each label, shape (T, 3), columns (-1, 0, +1).

    Binary mode:    cost_v = sum_i alpha_i(x) * 1{v != y_i}
    Weighted mode:  cost_v = sum_i alpha_i(x) * |y_i| * 1{v != sign(y_i)}
    Uninformed pairs cost zero for every label.
    """
    x = as_point(x)
    costs = np.zeros((model.index.n_pairs, 3))
    for t, sm in enumerate(model.pair_models):
        if sm is None:
            continue
        alpha = alpha_at(sm, x)
        y = sm.y
        for j, v in enumerate(LABELS):
            if model.weighted:
                miss = np.abs(y) * (np.sign(y) != v)
            else:
                miss = (y != v).astype(float)
            costs[t, j] = alpha @ miss
    return costs


@dataclass
class Tournament:
    """Netted pairwise preference weights on D documents.

    weights[i, j] >= 0 is the net cost saved by ordering document i+1 before
    document j+1; after netting at most one of weights[i, j], weights[j, i]
    is nonzero and the diagonal is zero.
    """

    weights: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("tournament weights must be a square matrix")
        if not np.all(np.isfinite(W)):
            raise ValueError("tournament weights must be finite")
        if np.any(W < 0):
            raise ValueError("tournament weights must be non-negative")
        if np.any(np.diag(W) != 0):
            raise ValueError("tournament diagonal must be zero")
        if np.any((W > 0) & (W.T > 0)):
            raise ValueError("tournament must be netted: one direction per pair")
        self.weights = W

    @property
    def n_docs(self) -> int:
        return self.weights.shape[0]


def tournament_from_costs(n_docs: int, costs) -> Tournament:
    """Net the per-pair costs into a tournament.

    Ordering p before q lets the decoder pay min(cost_+1, cost_0) for the
    pair instead of min(cost_-1, cost_0), so the exact net saving of "p
    before q" is the difference of those minima; its positive part becomes
    W[p-1, q-1].  Netting against the plain cost_-1 - cost_+1 difference
    ignores competitive abstentions and measurably degrades the decoded
    objective, so the minima are used.
    """
    idx = PairIndex(n_docs)
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (idx.n_pairs, 3):
        raise ValueError(f"expected costs of shape ({idx.n_pairs}, 3)")
    W = np.zeros((n_docs, n_docs))
    for t, (p, q) in enumerate(idx.pairs()):
        net = min(costs[t, 0], costs[t, 1]) - min(costs[t, 2], costs[t, 1])
        if net > 0:
            W[p - 1, q - 1] = net
        elif net < 0:
            W[q - 1, p - 1] = -net
    return Tournament(W)


def _back_weight(W: np.ndarray, order0) -> float:
    pos = np.empty(len(order0), dtype=int)
    for rank, v in enumerate(order0):
        pos[v] = rank
    later = pos[:, None] > pos[None, :]
    return float(W[later].sum())


def fas_order(tournament: Tournament) -> list[int]:
    """Total order of documents (1-based ids) with small feedback-arc weight.

    Two-ended greedy sequencing: exhaust sinks to the back, sources to the
    front, then drop the vertex maximizing out-weight minus in-weight; ties
    break on the smallest document id.  The order is reversed if that ever
    leaves more back-weight than forward-weight, so back-weight <= forward-
    weight always holds.
    """
    W = tournament.weights
    n = tournament.n_docs
    alive = np.ones(n, dtype=bool)
    head: list[int] = []
    tail: deque[int] = deque()
    while alive.any():
        idx = np.flatnonzero(alive)
        sub = W[np.ix_(idx, idx)]
        out_w = sub.sum(axis=1)
        in_w = sub.sum(axis=0)
        sinks = idx[out_w == 0.0]
        if sinks.size:
            v = int(sinks[0])
            tail.appendleft(v)
            alive[v] = False
            continue
        sources = idx[in_w == 0.0]
        if sources.size:
            v = int(sources[0])
            head.append(v)
            alive[v] = False
            continue
        v = int(idx[np.argmax(out_w - in_w)])
        head.append(v)
        alive[v] = False
    order0 = head + list(tail)
    back = _back_weight(W, order0)
    total = float(W.sum())
    if back > total - back:
        order0.reverse()
    return [v + 1 for v in order0]


@dataclass
class DecodeResult:
    """Decoded ranking: a total order, the per-pair labels, and the attained cost."""

    order: list[int]
    labels: np.ndarray  # (T,) ints in {-1, 0, 1}
    objective: float

    def to_dict(self) -> dict:
        idx = PairIndex(len(self.order))
        return {
            "order": list(self.order),
            "labels": {f"{p},{q}": int(self.labels[t]) for t, (p, q) in enumerate(idx.pairs())},
            "objective": float(self.objective),
        }


def _complete_order(n_docs: int, order, costs) -> tuple[np.ndarray, float]:
    """Cheapest labeling consistent with a total order; cost ties favour 0."""
    idx = PairIndex(n_docs)
    pos = {doc: rank for rank, doc in enumerate(order)}
    labels = np.zeros(idx.n_pairs, dtype=int)
    objective = 0.0
    for t, (p, q) in enumerate(idx.pairs()):
        signed = 1 if pos[p] < pos[q] else -1
        c_signed = costs[t, 2] if signed == 1 else costs[t, 0]
        c_zero = costs[t, 1]
        if c_signed < c_zero:
            labels[t] = signed
            objective += c_signed
        else:
            labels[t] = 0
            objective += c_zero
    return labels, objective


def _reinsertion_pass(n_docs: int, order, costs, max_rounds: int = 50):
    """Hill-climb the order by single-document reinsertion on the decode
    objective; strict-improvement moves only, so this terminates and is
    invariant to positive cost rescaling."""
    order = list(order)
    _, obj = _complete_order(n_docs, order, costs)
    for _ in range(max_rounds):
        improved = False
        for i in range(n_docs):
            doc = order[i]
            rest = order[:i] + order[i + 1:]
            for j in range(n_docs):
                if j == i:
                    continue
                cand = rest[:j] + [doc] + rest[j:]
                _, cand_obj = _complete_order(n_docs, cand, costs)
                if cand_obj < obj:
                    order, obj = cand, cand_obj
                    improved = True
        if not improved:
            break
    return order, obj


def decode_costs(n_docs: int, costs, exact: bool = False) -> DecodeResult:
    """Decode pair costs into an acyclic label vector.

    Greedy path: net the costs into a tournament, order with fas_order,
    improve the order by reinsertion hill climbing, then pick the cheaper of
    {order-consistent sign, 0} per pair.  With ``exact=True`` (D <= 8) every
    permutation is scored instead and the best one wins; intended as a
    small-scale oracle.
    """
    costs = np.asarray(costs, dtype=float)
    if exact:
        if n_docs > MAX_EXACT_DOCS:
            raise ValueError(f"exact decoding is limited to D <= {MAX_EXACT_DOCS}")
        best = None
        for perm in permutations(range(1, n_docs + 1)):
            labels, obj = _complete_order(n_docs, perm, costs)
            if best is None or obj < best[0]:
                best = (obj, list(perm), labels)
        return DecodeResult(order=best[1], labels=best[2], objective=best[0])
    order = fas_order(tournament_from_costs(n_docs, costs))
    order, _ = _reinsertion_pass(n_docs, order, costs)
    labels, objective = _complete_order(n_docs, order, costs)
    return DecodeResult(order=order, labels=labels, objective=objective)


def decode(model: RankingModel, x, exact: bool = False) -> DecodeResult:
    """Decode the ranking at query x; the result is always acyclic."""
    return decode_costs(model.n_docs, pair_costs(model, x), exact=exact)


def loss_pairwise(c, y) -> int:
    """Number of pair labels on which c and y disagree."""
    c = np.asarray(c).ravel()
    y = np.asarray(y).ravel()
    if c.shape != y.shape:
        raise ValueError("label vectors must have matching length")
    return int(np.sum(c != y))


def loss_weighted(c, y) -> float:
    """Sum of |y_pq| over the pairs where c disagrees with sign(y_pq)."""
    c = np.asarray(c, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if c.shape != y.shape:
        raise ValueError("label vectors must have matching length")
    return float(np.sum(np.abs(y) * (c != np.sign(y))))
