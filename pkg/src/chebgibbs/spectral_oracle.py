"""Dense eigendecomposition ground truth for small graphs.

Everything here is deliberately dense and O(n^3): it exists to verify the
sparse polynomial filter machinery on graphs small enough to decompose
exactly.  Spatial recurrences elsewhere in the package are checked against
`apply_filter_spectral`, which filters through the eigenbasis directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenSystem",
    "eigendecompose",
    "graph_fourier",
    "inverse_graph_fourier",
    "apply_filter_spectral",
    "fit_vandermonde",
]

ORACLE_DIM_CAP = 512
VANDERMONDE_CAP = 8
_SYM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    lambdas: np.ndarray
    U: np.ndarray

    @property
    def n(self) -> int:
        return int(self.lambdas.size)


def eigendecompose(M: np.ndarray, cap: int = ORACLE_DIM_CAP) -> EigenSystem:
    """Full symmetric eigendecomposition with a deterministic sign convention.

    Each eigenvector is flipped so its first component of magnitude above
    1e-12 is positive, making results reproducible across platforms.
    Refuses matrices larger than `cap`.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] > cap:
        raise ValueError("oracle restricted to small graphs")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > _SYM_TOL:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    for j in range(U.shape[1]):
        col = U[:, j]
        idx = np.argmax(np.abs(col) > 1e-12)
        if col[idx] < 0:
            U[:, j] = -col
    return EigenSystem(lambdas=lam, U=U)


def graph_fourier(es: EigenSystem, x: np.ndarray) -> np.ndarray:
    """Project a signal onto the eigenbasis (coefficients U^T x)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != es.n:
        raise ValueError(f"signal length {x.shape[0]} does not match n={es.n}")
    return es.U.T @ x


def inverse_graph_fourier(es: EigenSystem, xhat: np.ndarray) -> np.ndarray:
    """Reconstruct a signal from eigenbasis coefficients (U xhat)."""
    xhat = np.asarray(xhat, dtype=np.float64)
    if xhat.shape[0] != es.n:
        raise ValueError(f"coefficient length {xhat.shape[0]} does not match n={es.n}")
    return es.U @ xhat


def apply_filter_spectral(es: EigenSystem, response, X: np.ndarray) -> np.ndarray:
    """Filter columns of X through the eigenbasis: U diag(response(lam)) U^T X.

    `response` is evaluated on the eigenvalue vector and may return either a
    matching vector or a scalar (broadcast to all eigenvalues).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != es.n:
        raise ValueError(f"X has {X.shape[0]} rows, expected {es.n}")
    h = np.asarray(response(es.lambdas), dtype=np.float64)
    if h.ndim == 0:
        h = np.full(es.n, float(h))
    if h.shape != (es.n,):
        raise ValueError(f"response produced shape {h.shape}, expected ({es.n},)")
    coeffs = es.U.T @ X
    if X.ndim == 1:
        return es.U @ (h * coeffs)
    return es.U @ (h[:, None] * coeffs)


def fit_vandermonde(lambdas_shifted, targets, K: int) -> np.ndarray:
    """Monomial coefficients fitting targets at the given shifted eigenvalues.

    Solves the Vandermonde system exactly when K + 1 equals the number of
    points, and in the least-squares sense when K + 1 is smaller.  The
    solve is restricted to at most 8 points: monomial Vandermonde matrices
    become catastrophically ill-conditioned beyond desk scale, which is the
    reason polynomial graph filters avoid explicit eigenvalue fitting.
    """
    lam = np.asarray(lambdas_shifted, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if lam.ndim != 1 or lam.shape != y.shape:
        raise ValueError("eigenvalues and targets must be matching 1-D vectors")
    npts = lam.size
    if npts > VANDERMONDE_CAP:
        raise ValueError(f"Vandermonde solve restricted to <= {VANDERMONDE_CAP} points")
    if K < 0 or K + 1 > npts:
        raise ValueError(f"order K={K} needs K+1 <= {npts} sample points")
    diffs = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(diffs, np.inf)
    if diffs.min() < 1e-12:
        raise ValueError("singular Vandermonde: duplicate shifted eigenvalues")
    V = np.vander(lam, N=K + 1, increasing=True)
    if K + 1 == npts:
        return np.linalg.solve(V, y)
    zeta, *_ = np.linalg.lstsq(V, y, rcond=None)
    return zeta
