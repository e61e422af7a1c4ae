"""Naive Bayes, tree-augmented and forest-augmented Bayesian-network classifiers.

All attribute values and classes are 0-based integer codes inside this
module.  Structure learning uses unsmoothed empirical frequencies; parameter
learning uses Laplace (add-one) estimates, and classification always scores
with the smoothed tables.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateStructureError,
    DimensionError,
    DomainError,
    InsufficientDataError,
)

__all__ = [
    "DiscreteDataset",
    "NetworkStructure",
    "ConditionalProbabilityTable",
    "MutualInfoMatrix",
    "conditional_mutual_information",
    "mutual_information_with_class",
    "mutual_info_matrix",
    "maximum_spanning_tree",
    "orient_tree",
    "construct_nb",
    "construct_tan",
    "construct_fan",
    "build_structure",
    "fit_parameters",
    "log_scores",
    "posterior",
    "classify_map",
    "map_decision",
]

KINDS = ("nb", "tan", "fan")


@dataclass(frozen=True, eq=False)
class DiscreteDataset:
    """``values[r, i]`` is the code of attribute ``i`` in row ``r``."""

    values: np.ndarray
    classes: np.ndarray
    cardinalities: tuple[int, ...]
    class_count: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        classes = np.asarray(self.classes, dtype=np.int64).ravel()
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.cardinalities))
        if values.ndim != 2 or values.shape[1] != len(self.cardinalities):
            raise DimensionError(
                f"values must have shape (N, {len(self.cardinalities)}), got {values.shape}"
            )
        if values.shape[0] != classes.shape[0]:
            raise DimensionError("values and classes disagree on the number of rows")
        cards = tuple(int(v) for v in self.cardinalities)
        if any(v < 1 for v in cards) or self.class_count < 1:
            raise ValueError("cardinalities and class_count must be positive")
        if values.size and (values.min() < 0 or np.any(values.max(axis=0) >= np.asarray(cards))):
            raise DomainError("attribute value outside its cardinality")
        if classes.size and (classes.min() < 0 or classes.max() >= self.class_count):
            raise DomainError("class outside class_count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "cardinalities", cards)

    @classmethod
    def from_label_vectors(cls, label_vectors, classes, k: int, class_count: int):
        """Build from 1-based cluster labels (``LabelVector`` objects or rows)."""
        rows = [getattr(lv, "labels", lv) for lv in label_vectors]
        values = np.asarray(rows, dtype=np.int64) - 1
        n_attrs = values.shape[1] if values.ndim == 2 else 0
        return cls(values, np.asarray(classes), (k,) * n_attrs, class_count)

    @property
    def n_attrs(self) -> int:
        return len(self.cardinalities)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=self.class_count).astype(np.float64)

    def counts_attr_class(self, i: int) -> np.ndarray:
        """``N(a_i, c)`` as a ``(v_i, k)`` array."""
        v, k = self.cardinalities[i], self.class_count
        flat = self.values[:, i] * k + self.classes
        return np.bincount(flat, minlength=v * k).reshape(v, k).astype(np.float64)

    def counts_pair_class(self, i: int, j: int) -> np.ndarray:
        """``N(a_i, a_j, c)`` as a ``(v_i, v_j, k)`` array."""
        vi, vj, k = self.cardinalities[i], self.cardinalities[j], self.class_count
        flat = (self.values[:, i] * vj + self.values[:, j]) * k + self.classes
        return np.bincount(flat, minlength=vi * vj * k).reshape(vi, vj, k).astype(np.float64)

    def subset(self, rows) -> "DiscreteDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return DiscreteDataset(
            self.values[rows], self.classes[rows], self.cardinalities, self.class_count
        )


@dataclass(frozen=True)
class NetworkStructure:
    """Class node is an implicit parent of every attribute.

    ``attr_parent[i]`` is the optional second (attribute) parent of ``A_i``.
    """

    kind: str
    attr_parent: tuple[Optional[int], ...]
    root: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown structure kind {self.kind!r}")
        n = len(self.attr_parent)
        for child, parent in enumerate(self.attr_parent):
            if parent is not None and not (0 <= parent < n and parent != child):
                raise ValueError(f"invalid parent {parent} for attribute {child}")
        # every attribute has at most one parent, so a cycle shows up as a
        # walk longer than n
        for start in range(n):
            node, steps = start, 0
            while self.attr_parent[node] is not None:
                node = self.attr_parent[node]
                steps += 1
                if steps > n:
                    raise ValueError("attribute parent relation contains a cycle")

    @property
    def n_attrs(self) -> int:
        return len(self.attr_parent)

    def edges(self) -> set[tuple[int, int]]:
        """Directed attribute arcs as ``(parent, child)``."""
        return {(p, c) for c, p in enumerate(self.attr_parent) if p is not None}

    def undirected_edges(self) -> set[tuple[int, int]]:
        return {(min(p, c), max(p, c)) for p, c in self.edges()}


@dataclass(frozen=True, eq=False)
class ConditionalProbabilityTable:
    """Laplace-smoothed parameters.

    ``tables[i]`` has shape ``(v_i, k)`` for ``P(a_i | c)`` or
    ``(v_i, v_j, k)`` for ``P(a_i | a_j, c)`` when ``A_j`` is the parent.
    """

    prior: np.ndarray
    tables: tuple[np.ndarray, ...]

    @property
    def class_count(self) -> int:
        return self.prior.shape[0]


@dataclass(frozen=True, eq=False)
class MutualInfoMatrix:
    cmi: np.ndarray
    mi_class: np.ndarray
    i_avg: float


# --------------------------------------------------------------------------
# Information measures
# --------------------------------------------------------------------------


def _require_rows(ds: DiscreteDataset):
    if ds.n_rows == 0:
        raise InsufficientDataError("information measures need at least one instance")


def conditional_mutual_information(ds: DiscreteDataset, i: int, j: int) -> float:
    """Empirical ``I(A_i; A_j | C)`` in nats.

    Sums ``P(x,y,z) log[P(x,y|z) / (P(x|z) P(y|z))]`` over observed cells; the
    pair is put in canonical order first so the result is exactly symmetric.
    """
    if i == j:
        raise ValueError("conditional mutual information needs two distinct attributes")
    _require_rows(ds)
    i, j = min(i, j), max(i, j)
    nxyz = ds.counts_pair_class(i, j)
    nxz = nxyz.sum(axis=1)  # (v_i, k)
    nyz = nxyz.sum(axis=0)  # (v_j, k)
    nz = ds.class_counts()
    x, y, z = np.nonzero(nxyz)
    cell = nxyz[x, y, z]
    ratio = cell * nz[z] / (nxz[x, z] * nyz[y, z])
    return max(float(np.sum(cell * np.log(ratio)) / ds.n_rows), 0.0)


def mutual_information_with_class(ds: DiscreteDataset, i: int) -> float:
    """Empirical ``I(A_i; C)`` in nats."""
    _require_rows(ds)
    nxz = ds.counts_attr_class(i)
    nx = nxz.sum(axis=1)
    nz = nxz.sum(axis=0)
    x, z = np.nonzero(nxz)
    cell = nxz[x, z]
    ratio = cell * ds.n_rows / (nx[x] * nz[z])
    return max(float(np.sum(cell * np.log(ratio)) / ds.n_rows), 0.0)


def mutual_info_matrix(ds: DiscreteDataset) -> MutualInfoMatrix:
    n = ds.n_attrs
    cmi = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            cmi[a, b] = cmi[b, a] = conditional_mutual_information(ds, a, b)
    mi_class = np.array([mutual_information_with_class(ds, a) for a in range(n)])
    i_avg = float(cmi.sum() / (n * (n - 1))) if n > 1 else 0.0
    return MutualInfoMatrix(cmi=cmi, mi_class=mi_class, i_avg=i_avg)


# --------------------------------------------------------------------------
# Structure learning
# --------------------------------------------------------------------------


def maximum_spanning_tree(weights) -> list[tuple[int, int]]:
    """Kruskal's maximum-weight spanning tree of a complete graph.

    ``weights`` is a symmetric ``(n, n)`` matrix.  Equal weights are broken by
    ascending ``(i, j)`` with ``i < j`` so the result is deterministic.
    Returns ``n - 1`` edges ``(i, j)``, ``i < j``, in the order accepted.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    candidates = sorted(
        ((i, j) for i in range(n) for j in range(i + 1, n)),
        key=lambda e: (-w[e], e[0], e[1]),
    )
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    return tree


def orient_tree(n: int, edges: Sequence[tuple[int, int]], root: int) -> tuple[Optional[int], ...]:
    """Direct undirected tree ``edges`` outward from ``root``; returns parents."""
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parents: list[Optional[int]] = [None] * n
    seen = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for nxt in sorted(adj[node]):
            if nxt not in seen:
                seen.add(nxt)
                parents[nxt] = node
                queue.append(nxt)
    return tuple(parents)


def construct_nb(ds: DiscreteDataset) -> NetworkStructure:
    return NetworkStructure(kind="nb", attr_parent=(None,) * ds.n_attrs)


def _check_tree_size(n: int):
    if n < 2:
        raise DegenerateStructureError(
            f"tree-augmented structures need at least 2 attributes (got {n}); use naive Bayes"
        )


def construct_tan(
    ds: DiscreteDataset,
    root_override: Optional[int] = None,
    mi: Optional[MutualInfoMatrix] = None,
) -> tuple[NetworkStructure, MutualInfoMatrix]:
    """Tree-augmented naive Bayes.

    Weights every attribute pair by conditional mutual information given the
    class, keeps the maximum spanning tree, and directs it away from the root
    (attribute 0 unless ``root_override`` is given).
    """
    n = ds.n_attrs
    _check_tree_size(n)
    root = 0 if root_override is None else int(root_override)
    if not 0 <= root < n:
        raise ValueError(f"root {root} out of range for {n} attributes")
    if mi is None:
        mi = mutual_info_matrix(ds)
    tree = maximum_spanning_tree(mi.cmi)
    return NetworkStructure("tan", orient_tree(n, tree, root), root), mi


def construct_fan(
    ds: DiscreteDataset,
    threshold_multiplier: float = 1.0,
    mi: Optional[MutualInfoMatrix] = None,
) -> tuple[NetworkStructure, MutualInfoMatrix]:
    """Forest-augmented naive Bayes.

    Builds the same spanning tree as TAN, roots it at the attribute sharing
    the most information with the class, then drops every arc whose weight
    is strictly below ``threshold_multiplier * I_avg``.  An infinite
    multiplier drops every arc.
    """
    if threshold_multiplier < 0 or math.isnan(threshold_multiplier):
        raise ValueError("threshold_multiplier must be >= 0")
    n = ds.n_attrs
    _check_tree_size(n)
    if mi is None:
        mi = mutual_info_matrix(ds)
    root = int(np.argmax(mi.mi_class))
    parents = orient_tree(n, maximum_spanning_tree(mi.cmi), root)
    if math.isinf(threshold_multiplier):
        threshold = math.inf
    else:
        threshold = threshold_multiplier * mi.i_avg
    pruned = tuple(
        p if p is not None and mi.cmi[p, c] >= threshold else None
        for c, p in enumerate(parents)
    )
    return NetworkStructure("fan", pruned, root), mi


def build_structure(
    ds: DiscreteDataset,
    kind: str,
    threshold_multiplier: float = 1.0,
    root_override: Optional[int] = None,
    mi: Optional[MutualInfoMatrix] = None,
) -> NetworkStructure:
    kind = kind.lower()
    if kind == "nb":
        return construct_nb(ds)
    if kind == "tan":
        return construct_tan(ds, root_override, mi=mi)[0]
    if kind == "fan":
        return construct_fan(ds, threshold_multiplier, mi=mi)[0]
    raise ValueError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")


# --------------------------------------------------------------------------
# Parameters and inference
# --------------------------------------------------------------------------


def fit_parameters(ds: DiscreteDataset, s: NetworkStructure) -> ConditionalProbabilityTable:
    """Laplace estimates.

    ``P(c) = (N(c)+1)/(N+k)``, ``P(a_i|c) = (N(c,a_i)+1)/(N(c)+v_i)`` and
    ``P(a_i|a_j,c) = (N(c,a_i,a_j)+1)/(N(c,a_j)+v_i)``.
    """
    if s.n_attrs != ds.n_attrs:
        raise DimensionError(
            f"structure has {s.n_attrs} attributes but the dataset has {ds.n_attrs}"
        )
    k = ds.class_count
    nc = ds.class_counts()
    prior = (nc + 1.0) / (ds.n_rows + k)
    tables = []
    for i, parent in enumerate(s.attr_parent):
        vi = ds.cardinalities[i]
        if parent is None:
            counts = ds.counts_attr_class(i)  # (v_i, k)
            tables.append((counts + 1.0) / (nc[None, :] + vi))
        else:
            counts = ds.counts_pair_class(i, parent)  # (v_i, v_j, k)
            parent_counts = counts.sum(axis=0)  # N(c, a_j): (v_j, k)
            tables.append((counts + 1.0) / (parent_counts[None, :, :] + vi))
    return ConditionalProbabilityTable(prior=prior, tables=tuple(tables))


def _check_instance(cpt: ConditionalProbabilityTable, s: NetworkStructure, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.shape[0] != s.n_attrs or len(cpt.tables) != s.n_attrs:
        raise DimensionError(
            f"instance has {x.shape[0]} attributes; model expects {s.n_attrs}"
        )
    for i, table in enumerate(cpt.tables):
        if not 0 <= x[i] < table.shape[0]:
            raise DomainError(
                f"attribute {i} has value {x[i]} outside [0, {table.shape[0] - 1}]"
            )
    return x


def log_scores(cpt: ConditionalProbabilityTable, s: NetworkStructure, x) -> np.ndarray:
    """Unnormalised ``log P(c) + sum_i log P(a_i | parents, c)`` per class."""
    x = _check_instance(cpt, s, x)
    scores = np.log(cpt.prior)
    for i, parent in enumerate(s.attr_parent):
        table = cpt.tables[i]
        if parent is None:
            scores = scores + np.log(table[x[i]])
        else:
            scores = scores + np.log(table[x[i], x[parent]])
    return scores


def posterior(cpt: ConditionalProbabilityTable, s: NetworkStructure, x) -> np.ndarray:
    scores = log_scores(cpt, s, x)
    scores = scores - scores.max()
    p = np.exp(scores)
    return p / p.sum()


def map_decision(scores) -> int:
    """Index of the largest score; ties go to the lowest index."""
    return int(np.argmax(np.asarray(scores)))


def classify_map(cpt: ConditionalProbabilityTable, s: NetworkStructure, x) -> int:
    return map_decision(log_scores(cpt, s, x))
