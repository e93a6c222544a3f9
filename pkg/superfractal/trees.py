"""Labelled M-ary trees: code trees, the tree IFS, function trees and dependence trees.

Trees are stored level by level. Level ``l`` is an int64 array of ``M**l``
labels; the node reached from the root by the 1-based path ``(i1, ..., il)``
sits at position ``sum((i_j - 1) * M**(l - j))``, so the children of position
``p`` are ``p * M + m`` and the descendants ``j`` levels down form the
contiguous block ``[p * M**j, (p + 1) * M**j)``.
"""
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from loguru import logger

from superfractal.errors import GeometryError, NumericalError, fail
from superfractal.utils import probability_cdf


def node_position(M: int, path: Sequence[int]) -> int:
    pos = 0
    for i in path:
        if not 1 <= i <= M:
            fail(GeometryError, f"path entry {i} out of range 1..{M}")
        pos = pos * M + (i - 1)
    return pos


@dataclass(eq=False)
class CodeTree:
    M: int
    levels: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if self.M < 1:
            fail(GeometryError, f"tree arity must be positive, got {self.M}")
        levels = tuple(np.asarray(level, dtype=np.int64).ravel() for level in self.levels)
        if not levels:
            fail(GeometryError, "a tree needs at least its root level")
        for l, level in enumerate(levels):
            if level.shape[0] != self.M ** l:
                fail(GeometryError, f"level {l} holds {level.shape[0]} labels, expected {self.M ** l}")
            if level.size and level.min() < 1:
                fail(GeometryError, f"labels must be positive, level {l} holds {level.min()}")
        self.levels = levels

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> int:
        return int(self.levels[0][0])

    def label(self, path: Sequence[int]) -> int:
        if len(path) > self.depth:
            fail(GeometryError, f"path of length {len(path)} exceeds tree depth {self.depth}")
        return int(self.levels[len(path)][node_position(self.M, path)])

    def node_count(self) -> int:
        return sum(level.shape[0] for level in self.levels)

    def key(self) -> bytes:
        """Canonical serialisation; equal trees give equal keys."""
        header = np.array([self.M, self.depth], dtype=np.int64).tobytes()
        return header + np.concatenate(self.levels).tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodeTree):
            return NotImplemented
        return self.M == other.M and self.depth == other.depth and all(
            np.array_equal(a, b) for a, b in zip(self.levels, other.levels))

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({format_tree(self)!r})"

    @classmethod
    def constant(cls, M: int, depth: int, label: int = 1) -> "CodeTree":
        return cls(M, tuple(np.full(M ** l, label, dtype=np.int64) for l in range(depth + 1)))


class DependenceTree(CodeTree):
    """Tree whose labels are screen indices 1..V (K in the dependence construction)."""


def xi(n: int, children: Sequence[CodeTree]) -> CodeTree:
    """Tree with root label n and the given subtrees, in order."""
    if not children:
        fail(GeometryError, "xi needs at least one child")
    M = len(children)
    depth = children[0].depth
    for c in children:
        if c.M != M:
            fail(GeometryError, f"child arity {c.M} differs from the number of children {M}")
        if c.depth != depth:
            fail(GeometryError, f"children have different depths ({c.depth} vs {depth})")
    levels = [np.array([n], dtype=np.int64)]
    for l in range(depth + 1):
        levels.append(np.concatenate([c.levels[l] for c in children]))
    return CodeTree(M, tuple(levels))


def subtree(t: CodeTree, path: Sequence[int]) -> CodeTree:
    l = len(path)
    if l > t.depth:
        fail(GeometryError, f"path of length {l} exceeds tree depth {t.depth}")
    p = node_position(t.M, path)
    levels = tuple(t.levels[l + j][p * t.M ** j:(p + 1) * t.M ** j] for j in range(t.depth - l + 1))
    return type(t)(t.M, levels)


def truncate(t: CodeTree, depth: int) -> CodeTree:
    if depth < 0:
        fail(GeometryError, f"truncation depth must be non-negative, got {depth}")
    return type(t)(t.M, t.levels[:depth + 1])


def tree_distance(t1: CodeTree, t2: CodeTree) -> float:
    """M**-k for the first level k where the common truncations differ, 0 if they agree."""
    if t1.M != t2.M:
        fail(GeometryError, f"arity mismatch {t1.M} vs {t2.M}")
    for l in range(min(t1.depth, t2.depth) + 1):
        if not np.array_equal(t1.levels[l], t2.levels[l]):
            return float(t1.M) ** -l
    return 0.0


def cylinder_diameter(t: CodeTree) -> float:
    """Diameter of the set of infinite trees extending t."""
    return float(t.M) ** -(t.depth + 1)


def format_tree(t: CodeTree) -> str:
    """``M k : l0 ; l1,1 ... l1,M ; ...`` in level order."""
    body = " ; ".join(" ".join(str(int(v)) for v in level) for level in t.levels)
    return f"{t.M} {t.depth} : {body}"


def parse_tree(text: str) -> CodeTree:
    head, sep, body = text.partition(":")
    if not sep:
        fail(GeometryError, f"tree text lacks ':' separator: {text!r}")
    try:
        M, k = (int(tok) for tok in head.split())
        levels = [[int(tok) for tok in part.split()] for part in body.split(";")]
    except ValueError as exc:
        fail(GeometryError, f"malformed tree text {text!r}: {exc}")
    if len(levels) != k + 1:
        fail(GeometryError, f"tree text declares depth {k} but holds {len(levels)} levels")
    return CodeTree(M, tuple(np.array(level, dtype=np.int64) for level in levels))


@dataclass(eq=False)
class Grove:
    components: Tuple[CodeTree, ...]

    def __post_init__(self) -> None:
        self.components = tuple(self.components)
        if not self.components:
            fail(GeometryError, "a grove needs at least one tree")
        M, depth = self.components[0].M, self.components[0].depth
        for c in self.components:
            if c.M != M or c.depth != depth:
                fail(GeometryError, "grove components must share arity and depth")

    @property
    def V(self) -> int:
        return len(self.components)

    @property
    def M(self) -> int:
        return self.components[0].M

    @property
    def depth(self) -> int:
        return self.components[0].depth

    def __getitem__(self, v: int) -> CodeTree:
        return self.components[v]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grove):
            return NotImplemented
        return self.V == other.V and all(a == b for a, b in zip(self.components, other.components))

    @classmethod
    def constant(cls, V: int, M: int, depth: int = 0, label: int = 1) -> "Grove":
        return cls(tuple(CodeTree.constant(M, depth, label) for _ in range(V)))


@dataclass(eq=False)
class IndexA:
    """One index of the superIFS: per screen v an IFS label n_v and limbs v_{v,1..M} (1-based)."""

    labels: np.ndarray  # (V,)
    limbs: np.ndarray  # (V, M)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        self.limbs = np.asarray(self.limbs, dtype=np.int64)
        if self.limbs.ndim != 2 or self.limbs.shape[0] != self.labels.shape[0]:
            fail(GeometryError, f"limbs shape {self.limbs.shape} does not match {self.labels.shape[0]} screens")
        if self.labels.size and self.labels.min() < 1:
            fail(GeometryError, "IFS labels are 1-based")
        if self.limbs.size and (self.limbs.min() < 1 or self.limbs.max() > self.V):
            fail(GeometryError, f"limb screen indices must lie in 1..{self.V}")

    @property
    def V(self) -> int:
        return int(self.labels.shape[0])

    @property
    def M(self) -> int:
        return int(self.limbs.shape[1])

    def check_labels(self, N: int) -> None:
        if self.labels.max() > N:
            fail(GeometryError, f"IFS label {int(self.labels.max())} exceeds N={N}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexA):
            return NotImplemented
        return np.array_equal(self.labels, other.labels) and np.array_equal(self.limbs, other.limbs)

    def rows(self) -> List[Tuple[int, ...]]:
        return [(int(n),) + tuple(int(w) for w in limb) for n, limb in zip(self.labels, self.limbs)]

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]]) -> "IndexA":
        """Build from ``((n_1, v_11, ..., v_1M), ..., (n_V, v_V1, ..., v_VM))``."""
        rows = [tuple(r) for r in rows]
        return cls(np.array([r[0] for r in rows]), np.array([r[1:] for r in rows]))

    def __repr__(self) -> str:
        return f"IndexA({self.rows()})"


def eta(a: IndexA, grove: Grove) -> Grove:
    """One step of the tree IFS: component v is xi(n_v; grove[v_{v,1}], ..., grove[v_{v,M}])."""
    if a.V != grove.V:
        fail(GeometryError, f"index has V={a.V} but grove has {grove.V} components")
    if a.M != grove.M:
        fail(GeometryError, f"index has M={a.M} but grove trees have arity {grove.M}")
    return Grove(tuple(
        xi(int(a.labels[v]), [grove.components[w - 1] for w in a.limbs[v]]) for v in range(a.V)))


def grove_from_indices(indices: Sequence[IndexA], max_depth: Optional[int] = None,
                       base: Optional[Grove] = None) -> Grove:
    """Apply eta for each index in order (the first index acts first) starting from a constant grove."""
    grove = None
    for grove in forward_orbit(indices, max_depth, base):
        pass
    if grove is None:
        fail(GeometryError, "need at least one index or a base grove")
    return grove


def forward_orbit(indices: Sequence[IndexA], max_depth: Optional[int] = None,
                  base: Optional[Grove] = None) -> Iterator[Grove]:
    """Yield the base grove and every grove of the forward run, truncated to max_depth."""
    if base is None:
        if not indices:
            return
        base = Grove.constant(indices[0].V, indices[0].M)
    grove = base
    yield grove
    for a in indices:
        grove = eta(a, grove)
        if max_depth is not None and grove.depth > max_depth:
            grove = Grove(tuple(truncate(c, max_depth) for c in grove.components))
        yield grove


# -------------------- function trees --------------------

@dataclass(eq=False)
class FunctionTree:
    """Level-k function trees for all V screens.

    nodes[l] has shape (V, M**l) for l = 0..k-1; limbs[l - 1] has shape
    (V, M**l) for l = 1..k and holds screen indices; the trunk of component v
    is v itself.
    """

    M: int
    V: int
    nodes: Tuple[np.ndarray, ...]
    limbs: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        self.nodes = tuple(np.asarray(n, dtype=np.int64) for n in self.nodes)
        self.limbs = tuple(np.asarray(n, dtype=np.int64) for n in self.limbs)
        if len(self.nodes) != len(self.limbs) or not self.nodes:
            fail(GeometryError, "function tree needs matching node and limb levels, level >= 1")
        for l, level in enumerate(self.nodes):
            if level.shape != (self.V, self.M ** l):
                fail(GeometryError, f"node level {l} has shape {level.shape}")
        for l, level in enumerate(self.limbs, start=1):
            if level.shape != (self.V, self.M ** l):
                fail(GeometryError, f"limb level {l} has shape {level.shape}")

    @property
    def level(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FunctionTree):
            return NotImplemented
        return (self.M == other.M and self.V == other.V and self.level == other.level
                and all(np.array_equal(a, b) for a, b in zip(self.nodes, other.nodes))
                and all(np.array_equal(a, b) for a, b in zip(self.limbs, other.limbs)))

    @classmethod
    def from_index(cls, a: IndexA) -> "FunctionTree":
        return cls(a.M, a.V, (a.labels.reshape(a.V, 1),), (a.limbs.copy(),))


def compose(g: FunctionTree, h: FunctionTree) -> FunctionTree:
    """(g o h): h's trees grafted on g's limbs, addressed by the limb labels."""
    if g.M != h.M or g.V != h.V:
        fail(GeometryError, "composed function trees must share M and V")
    V = g.V
    idx = g.limbs[-1] - 1  # (V, M**|g|)
    nodes = list(g.nodes)
    limbs = list(g.limbs)
    for j in range(h.level):
        nodes.append(h.nodes[j][idx].reshape(V, -1))
    for j in range(h.level):
        limbs.append(h.limbs[j][idx].reshape(V, -1))
    return FunctionTree(g.M, V, tuple(nodes), tuple(limbs))


def compose_all(trees: Sequence[FunctionTree]) -> FunctionTree:
    out = trees[0]
    for t in trees[1:]:
        out = compose(out, t)
    return out


def eta_function_tree(g: FunctionTree, grove: Grove) -> Grove:
    """Action of a level-k function tree on a grove: graft grove[limb label] on every limb."""
    if g.V != grove.V or g.M != grove.M:
        fail(GeometryError, "function tree and grove must share M and V")
    idx = g.limbs[-1] - 1
    comps = []
    for v in range(g.V):
        levels = [g.nodes[l][v] for l in range(g.level)]
        for j in range(grove.depth + 1):
            stacked = np.stack([grove.components[w].levels[j] for w in range(grove.V)])
            levels.append(stacked[idx[v]].ravel())
        comps.append(CodeTree(g.M, tuple(levels)))
    return Grove(tuple(comps))


# -------------------- random indices and dependence trees --------------------

def sample_index(N: int, V: int, M: int, P: Sequence[float], rng: np.random.Generator) -> IndexA:
    labels, limbs = sample_index_arrays(N, V, M, P, rng, 1)
    return IndexA(labels[0], limbs[0])


def sample_index_arrays(N: int, V: int, M: int, P: Sequence[float], rng: np.random.Generator,
                        count: int) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` i.i.d. indices: labels (count, V) drawn from P, limbs (count, V, M) uniform; 1-based."""
    if len(P) != N:
        fail(GeometryError, f"P has {len(P)} entries but N={N}")
    cdf = probability_cdf(P)
    u = rng.random((count, V))
    labels = np.minimum(np.searchsorted(cdf, u, side="right"), N - 1) + 1
    limbs = rng.integers(1, V + 1, size=(count, V, M))
    return labels.astype(np.int64), limbs.astype(np.int64)


def dependence_tree(indices: Sequence[IndexA], k: int) -> DependenceTree:
    """K(root) = 1, K(i, m) = limb m of screen K(i) in the index at level |i|."""
    if len(indices) < k:
        fail(GeometryError, f"a depth-{k} dependence tree needs {k} indices, got {len(indices)}")
    M = indices[0].M if indices else 1
    levels = [np.array([1], dtype=np.int64)]
    for n in range(k):
        levels.append(indices[n].limbs[levels[-1] - 1].ravel())
    return DependenceTree(M, tuple(levels))


def dependence_node_labels(indices: Sequence[IndexA], k: int) -> CodeTree:
    """I(i) = label of screen K(i) in the index at level |i|, for |i| <= k."""
    if len(indices) < k + 1:
        fail(GeometryError, f"a depth-{k} labelled tree needs {k + 1} indices, got {len(indices)}")
    K = dependence_tree(indices, k)
    return CodeTree(K.M, tuple(indices[n].labels[K.levels[n] - 1] for n in range(k + 1)))


def is_free(d: CodeTree) -> bool:
    """True when the labels of every level are pairwise distinct."""
    return all(np.unique(level).shape[0] == level.shape[0] for level in d.levels)


def rho_cylinder(tau: CodeTree, P: Sequence[float]) -> float:
    p = np.asarray(P, dtype=np.float64)
    labels = np.concatenate(tau.levels)
    if labels.max() > p.shape[0]:
        fail(GeometryError, f"tree label {int(labels.max())} exceeds N={p.shape[0]}")
    return float(np.prod(p[labels - 1]))


_MC_BATCH = 8192


def _sample_labelled_trees(M: int, N: int, V: int, P: Sequence[float], depth: int,
                           rng: np.random.Generator, count: int
                           ) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Batch of (I levels, K levels); level l arrays have shape (count, M**l)."""
    cdf = probability_cdf(P)
    rows = np.arange(count)[:, None]
    K = np.zeros((count, 1), dtype=np.int64)  # 0-based screens
    I_levels: List[np.ndarray] = []
    K_levels: List[np.ndarray] = []
    for n in range(depth + 1):
        labels = np.minimum(np.searchsorted(cdf, rng.random((count, V)), side="right"), N - 1) + 1
        K_levels.append(K + 1)
        I_levels.append(labels[rows, K])
        if n < depth:
            limbs = rng.integers(0, V, size=(count, V, M))
            K = limbs[rows, K].reshape(count, -1)
    return I_levels, K_levels


def rho_v_cylinder_mc(tau: CodeTree, V: int, P: Sequence[float], samples: int,
                      rng: np.random.Generator) -> Tuple[float, float]:
    """Monte Carlo estimate and standard error of the V-variable tree measure of [tau]."""
    if samples < 1:
        fail(GeometryError, "samples must be positive")
    N = len(P)
    hits = 0
    done = 0
    while done < samples:
        count = min(_MC_BATCH, samples - done)
        I_levels, _ = _sample_labelled_trees(tau.M, N, V, P, tau.depth, rng, count)
        match = np.ones(count, dtype=bool)
        for level, target in zip(I_levels, tau.levels):
            match &= np.all(level == target[None, :], axis=1)
        hits += int(match.sum())
        done += count
    p = hits / samples
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / samples)


def free_probability_mc(M: int, V: int, k: int, samples: int,
                        rng: np.random.Generator) -> Tuple[float, float]:
    """Monte Carlo probability that a random depth-k dependence tree is free."""
    hits = 0
    done = 0
    while done < samples:
        count = min(_MC_BATCH, samples - done)
        _, K_levels = _sample_labelled_trees(M, 1, V, [1.0], k, rng, count)
        free = np.ones(count, dtype=bool)
        for level in K_levels[1:]:
            s = np.sort(level, axis=1)
            free &= np.all(s[:, 1:] != s[:, :-1], axis=1)
        hits += int(free.sum())
        done += count
    p = hits / samples
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / samples)


def free_probability_bound(M: int, V: int, k: int) -> float:
    """1 - prod_{j=1}^{T-1} (1 - j/V): bound on P(not free) with T nodes in a depth-k tree."""
    nodes = sum(M ** l for l in range(k + 1))
    return 1.0 - float(np.prod([max(0.0, 1.0 - j / V) for j in range(1, nodes)]))


def tree_count(M: int, N: int, depth: int) -> int:
    return N ** sum(M ** l for l in range(depth + 1))


def tree_from_code(code: int, M: int, N: int, depth: int) -> CodeTree:
    """Tree with the given level-order code: label of the node at level-order index q is digit q of code in base N, plus 1."""
    total = sum(M ** l for l in range(depth + 1))
    digits = []
    for _ in range(total):
        code, r = divmod(code, N)
        digits.append(r + 1)
    flat = np.array(digits, dtype=np.int64)
    levels = []
    start = 0
    for l in range(depth + 1):
        levels.append(flat[start:start + M ** l])
        start += M ** l
    return CodeTree(M, tuple(levels))


def rho_v_histogram(M: int, N: int, V: int, P: Sequence[float], depth: int, samples: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Estimated V-variable measure of every depth-``depth`` cylinder, indexed by tree code."""
    total_nodes = sum(M ** l for l in range(depth + 1))
    if total_nodes * math.log2(max(N, 2)) > 62:
        fail(NumericalError, f"{tree_count(M, N, depth)} cylinders are too many to tabulate")
    weights = np.array([N ** q for q in range(total_nodes)], dtype=np.int64)
    counts = np.zeros(tree_count(M, N, depth), dtype=np.int64)
    done = 0
    while done < samples:
        count = min(_MC_BATCH, samples - done)
        I_levels, _ = _sample_labelled_trees(M, N, V, P, depth, rng, count)
        flat = np.concatenate(I_levels, axis=1) - 1
        codes = flat @ weights
        counts += np.bincount(codes, minlength=counts.shape[0])
        done += count
    logger.debug(f"tabulated {samples} labelled trees of depth {depth} with V={V}")
    return counts / float(samples)


def count_distinct_subtrees(t: Union[CodeTree, Grove], level: int) -> int:
    """Number of distinct subtrees rooted at the given level across a tree or grove."""
    trees = t.components if isinstance(t, Grove) else (t,)
    seen: Set[bytes] = set()
    for tree in trees:
        if level > tree.depth:
            fail(GeometryError, f"level {level} exceeds tree depth {tree.depth}")
        width = tree.M ** level
        blocks = [tree.levels[l].reshape(width, -1) for l in range(level, tree.depth + 1)]
        rows = np.concatenate(blocks, axis=1)
        seen.update(row.tobytes() for row in rows)
    return len(seen)
