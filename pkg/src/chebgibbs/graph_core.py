"""Graph shift operators and graph-level diagnostics.

Builds undirected graphs from edge lists and derives the operators used by
polynomial graph filters: the symmetric normalized adjacency, the normalized
Laplacian, the renormalized adjacency (self-loops added before
normalization), and the scaled Laplacian whose spectrum fits the Chebyshev
domain [-1, 1].  Also provides node homophily, spectral gap, and a
degree-weighted diffusion distance between node rows of a filter matrix.

All operators are symmetric and stored sparsely; dense forms exist only for
debugging small graphs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

__all__ = [
    "Graph",
    "SparseOperator",
    "HomophilyReport",
    "build_graph",
    "read_edge_file",
    "degrees",
    "adjacency_matrix",
    "sym_norm_adjacency",
    "sym_norm_laplacian",
    "renormalized_adjacency",
    "scaled_laplacian",
    "estimate_lambda_max",
    "node_homophily",
    "select_gso",
    "spectral_gap",
    "diffusion_distance",
]

DENSE_DUMP_CAP = 256


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph: node count plus deduplicated edge pairs (u < v)."""

    n: int
    edges: np.ndarray  # shape (m, 2), int64, each row u < v

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Symmetric sparse linear operator with O(nnz) products.

    Wraps a CSR matrix; `symmetric=True` is verified at construction so the
    flag can be trusted downstream (filter recurrences and the spectral
    oracle both rely on it).
    """

    n: int
    mat: sparse.csr_matrix
    symmetric: bool = True

    def __post_init__(self):
        if self.mat.shape != (self.n, self.n):
            raise ValueError(
                f"operator shape {self.mat.shape} does not match n={self.n}"
            )
        if self.symmetric:
            delta = abs(self.mat - self.mat.T)
            if delta.nnz and delta.max() > 0:
                raise ValueError("operator marked symmetric but entries differ")

    @property
    def nnz(self) -> int:
        return int(self.mat.nnz)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.mat @ x

    def matmat(self, X: np.ndarray) -> np.ndarray:
        return self.mat @ X

    def to_dense(self) -> np.ndarray:
        return self.mat.toarray()

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stored entries as (rows, cols, values)."""
        coo = self.mat.tocoo()
        return coo.row.copy(), coo.col.copy(), coo.data.copy()

    def negated(self) -> "SparseOperator":
        return SparseOperator(self.n, (-self.mat).tocsr(), self.symmetric)

    def dump_dense_csv(self, path) -> None:
        """Debug dump as comma-separated dense rows; refuses large operators."""
        if self.n > DENSE_DUMP_CAP:
            raise ValueError(f"dense dump restricted to n <= {DENSE_DUMP_CAP}")
        np.savetxt(path, self.to_dense(), delimiter=",", fmt="%.17g")


@dataclass(frozen=True, eq=False)
class HomophilyReport:
    """Node homophily: mean neighbor-label agreement over evaluable nodes.

    `per_node` has one entry per node; nodes without any countable neighbor
    (isolated, or all neighbors unlabeled under a mask) hold NaN and are
    excluded from the mean.  `n_excluded` counts them.
    """

    h: float
    per_node: np.ndarray
    n_isolated: int


def build_graph(n: int, edge_list) -> Graph:
    """Build an undirected graph, dropping self-loops and duplicate pairs.

    Raises ValueError for any endpoint outside [0, n); dropped edges are
    reported through a single warning carrying both counts.
    """
    if n < 1:
        raise ValueError(f"node count must be positive, got {n}")
    arr = np.asarray(list(edge_list), dtype=np.int64)
    if arr.size == 0:
        return Graph(n=n, edges=np.empty((0, 2), dtype=np.int64))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("edge list must contain (u, v) pairs")
    bad = (arr < 0) | (arr >= n)
    if bad.any():
        u, v = arr[np.where(bad.any(axis=1))[0][0]]
        raise ValueError(f"edge ({u}, {v}) index out of range for n={n}")
    loops = arr[:, 0] == arr[:, 1]
    n_loops = int(loops.sum())
    arr = arr[~loops]
    arr = np.sort(arr, axis=1)
    uniq = np.unique(arr, axis=0) if arr.size else arr
    n_dups = arr.shape[0] - uniq.shape[0]
    if n_loops or n_dups:
        warnings.warn(
            f"build_graph: dropped {n_loops} self-loop(s) and "
            f"{n_dups} duplicate edge(s)",
            stacklevel=2,
        )
    return Graph(n=n, edges=uniq)


def read_edge_file(path) -> list[tuple[int, int]]:
    """Parse a whitespace-separated edge list, one "u v" pair per line.

    Lines starting with '#' and blank lines are ignored.  Indices are
    0-based.
    """
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {text!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer endpoint in {text!r}") from exc
            pairs.append((u, v))
    return pairs


def degrees(g: Graph) -> np.ndarray:
    d = np.bincount(g.edges.ravel(), minlength=g.n) if g.num_edges else np.zeros(g.n, dtype=np.int64)
    return d.astype(np.int64)


def adjacency_matrix(g: Graph) -> sparse.csr_matrix:
    """Unnormalized 0/1 adjacency as CSR."""
    if g.num_edges == 0:
        return sparse.csr_matrix((g.n, g.n))
    u, v = g.edges[:, 0], g.edges[:, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    vals = np.ones(rows.shape[0], dtype=np.float64)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def _edge_weighted_operator(g: Graph, weight_per_node: np.ndarray,
                            diag: np.ndarray | None = None) -> sparse.csr_matrix:
    # entry (u, v) = weight[u] * weight[v] for each edge, optional diagonal
    if g.num_edges:
        u, v = g.edges[:, 0], g.edges[:, 1]
        w = weight_per_node[u] * weight_per_node[v]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        vals = np.concatenate([w, w])
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0, dtype=np.float64)
    if diag is not None:
        rows = np.concatenate([rows, np.arange(g.n)])
        cols = np.concatenate([cols, np.arange(g.n)])
        vals = np.concatenate([vals, diag])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(g.n, g.n))


def sym_norm_adjacency(g: Graph) -> SparseOperator:
    """D^{-1/2} A D^{-1/2}; rows and columns of isolated nodes stay zero."""
    d = degrees(g).astype(np.float64)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    return SparseOperator(g.n, _edge_weighted_operator(g, inv_sqrt), symmetric=True)


def sym_norm_laplacian(g: Graph) -> SparseOperator:
    """I minus the symmetric normalized adjacency; spectrum within [0, 2]."""
    a = sym_norm_adjacency(g)
    lap = (sparse.identity(g.n, format="csr") - a.mat).tocsr()
    return SparseOperator(g.n, lap, symmetric=True)


def renormalized_adjacency(g: Graph, eta: float = 1.0) -> SparseOperator:
    """Self-loop-augmented normalized adjacency; spectrum within [-1, 1].

    Adds eta to every degree and eta to every diagonal entry before the
    symmetric normalization, so no node has a zero row when eta > 0.
    """
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    d = degrees(g).astype(np.float64) + eta
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    diag = eta * inv_sqrt * inv_sqrt if eta > 0 else None
    return SparseOperator(g.n, _edge_weighted_operator(g, inv_sqrt, diag), symmetric=True)


def scaled_laplacian(L: SparseOperator, lambda_max: float) -> SparseOperator:
    """(2 / lambda_max) L - I, mapping [0, lambda_max] onto [-1, 1]."""
    if not lambda_max > 0 or lambda_max > 2.0 + 1e-9:
        raise ValueError(f"lambda_max must be in (0, 2], got {lambda_max}")
    lambda_max = min(float(lambda_max), 2.0)
    mat = ((2.0 / lambda_max) * L.mat - sparse.identity(L.n, format="csr")).tocsr()
    return SparseOperator(L.n, mat, symmetric=True)


def estimate_lambda_max(L: SparseOperator, tol: float = 1e-6,
                        max_iter: int = 1000) -> float:
    """Largest-eigenvalue estimate of a PSD operator by power iteration.

    Stops when successive Rayleigh quotients agree to the relative
    tolerance; warns and returns the best estimate if the cap is hit.
    The result is clamped into (0, 2].
    """
    rng = np.random.default_rng(0)
    v = rng.standard_normal(L.n)
    v /= np.linalg.norm(v)
    lam = 0.0
    lam_prev = np.inf
    converged = False
    for _ in range(max_iter):
        w = L.matvec(v)
        lam = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            converged = True
            break
        v = w / norm_w
        if abs(lam - lam_prev) <= tol * max(abs(lam), 1e-12):
            converged = True
            break
        lam_prev = lam
    if not converged:
        warnings.warn(
            f"power iteration did not converge within {max_iter} iterations; "
            f"returning best estimate {lam:.6g}",
            stacklevel=2,
        )
    return float(min(max(lam, np.finfo(np.float64).tiny), 2.0))


def node_homophily(g: Graph, labels, mask=None) -> HomophilyReport:
    """Mean fraction of neighbors sharing each node's label.

    With a mask, only the listed nodes' labels count as known: unknown
    neighbors drop out of each fraction and unknown nodes drop out of the
    mean.  Nodes left without any countable neighbor are excluded and
    reported as NaN in `per_node`.
    """
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError(f"labels must have length n={g.n}, got shape {labels.shape}")
    known = np.zeros(g.n, dtype=bool)
    if mask is None:
        known[:] = True
    else:
        known[np.asarray(mask, dtype=np.int64)] = True

    counts = np.zeros(g.n, dtype=np.float64)
    agree = np.zeros(g.n, dtype=np.float64)
    if g.num_edges:
        u, v = g.edges[:, 0], g.edges[:, 1]
        keep = known[u] & known[v]
        u, v = u[keep], v[keep]
        same = (labels[u] == labels[v]).astype(np.float64)
        both = np.concatenate([u, v])
        counts += np.bincount(both, minlength=g.n)
        agree += np.bincount(both, weights=np.concatenate([same, same]), minlength=g.n)

    evaluable = known & (counts > 0)
    if not evaluable.any():
        raise ValueError("homophily undefined: every node is isolated or unlabeled")
    per_node = np.full(g.n, np.nan)
    per_node[evaluable] = agree[evaluable] / counts[evaluable]
    h = float(per_node[evaluable].mean())
    return HomophilyReport(h=h, per_node=per_node, n_isolated=int((~evaluable).sum()))


def select_gso(g: Graph, h: float, threshold: float = 0.5) -> SparseOperator:
    """Renormalized adjacency, negated when homophily falls below threshold.

    Ties (h == threshold) resolve to the homophilous branch.
    """
    a = renormalized_adjacency(g, eta=1.0)
    return a if h >= threshold else a.negated()


def spectral_gap(eigenvalues, j: int) -> float:
    """Difference of consecutive ascending eigenvalues at index j >= 1."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(np.diff(lam) < -1e-12):
        raise ValueError("eigenvalues must be sorted ascending")
    if not 1 <= j <= lam.size - 1:
        raise ValueError(f"gap index must satisfy 1 <= j <= {lam.size - 1}, got {j}")
    return float(lam[j] - lam[j - 1])


def diffusion_distance(H: np.ndarray, g: Graph, u: int, v: int) -> float:
    """Degree-weighted L2 distance between rows u and v of a filter matrix.

    The stationary density pi(w) is degree(w) over the degree total;
    isolated nodes (pi == 0) are excluded from the sum.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (g.n, g.n):
        raise ValueError(f"filter matrix must be {g.n}x{g.n}, got {H.shape}")
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise ValueError(f"node index out of range: u={u}, v={v}")
    d = degrees(g).astype(np.float64)
    total = d.sum()
    if total == 0:
        raise ValueError("stationary density undefined: graph has no edges")
    pi = d / total
    live = pi > 0
    diff = H[u, live] - H[v, live]
    return float(np.sqrt(np.sum(diff * diff / pi[live])))
