"""Polynomial graph filters and Gibbs damping factors.

The Chebyshev path runs the three-term recurrence directly against the
feature matrix (T_0 X, T_1 X = S X, T_k X = 2 S T_{k-1} X - T_{k-2} X), so
cost is O(K * nnz(S) * cols(X)) and at most three term matrices are alive
at any time.  Jackson and Lanczos damping factors attenuate high orders to
suppress Gibbs oscillations; both satisfy g(0) = 1 exactly and g(1) -> 1 as
the order grows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .graph_core import SparseOperator

__all__ = [
    "BASES",
    "DAMPINGS",
    "FilterSpec",
    "jackson_factor",
    "lanczos_factor",
    "damping_vector",
    "cheb_terms",
    "apply_poly_filter",
    "scalar_response",
]

BASES = ("chebyshev", "monomial", "bernstein")
DAMPINGS = ("none", "jackson", "lanczos")


@dataclass(frozen=True)
class FilterSpec:
    """One polynomial graph filter: basis, order, damping, coefficients.

    Damping is only meaningful for Chebyshev moments, so combining it with
    the monomial or Bernstein basis is rejected.
    """

    basis: str
    K: int
    damping: str = "none"
    m: int = 1
    coefficients: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}, expected one of {BASES}")
        if self.damping not in DAMPINGS:
            raise ValueError(f"unknown damping {self.damping!r}, expected one of {DAMPINGS}")
        if self.K < 0:
            raise ValueError(f"order K must be >= 0, got {self.K}")
        if self.damping == "lanczos" and self.m < 1:
            raise ValueError(f"Lanczos exponent m must be >= 1, got {self.m}")
        if self.damping != "none" and self.basis != "chebyshev":
            raise ValueError(f"damping requires the Chebyshev basis, got {self.basis!r}")
        coeffs = np.asarray(self.coefficients, dtype=np.float64)
        if coeffs.shape != (self.K + 1,):
            raise ValueError(
                f"coefficient vector must have length K+1={self.K + 1}, "
                f"got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coefficients", coeffs)

    def damping_vector(self) -> np.ndarray:
        return damping_vector(self.damping, self.K, self.m)

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": self.basis,
                "K": self.K,
                "damping": self.damping,
                "m": self.m,
                "coefficients": self.coefficients.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FilterSpec":
        doc = json.loads(text)
        return cls(
            basis=doc["basis"],
            K=int(doc["K"]),
            damping=doc["damping"],
            m=int(doc.get("m", 1)),
            coefficients=np.asarray(doc["coefficients"], dtype=np.float64),
        )


def jackson_factor(k, K: int):
    """Jackson damping factor at order k for a degree-K expansion.

    Equals 1 exactly at k = 0 and decays smoothly to near zero at k = K.
    Accepts a scalar or an integer array for k.
    """
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > K):
        raise ValueError(f"order index must satisfy 0 <= k <= K={K}")
    N = K + 2
    s = math.sin(math.pi / N)
    c = math.cos(math.pi / N)
    ang = k * (math.pi / N)
    g = ((N - k) * s * np.cos(ang) + c * np.sin(ang)) / (N * s)
    return float(g) if g.ndim == 0 else g


def lanczos_factor(k, K: int, m: int = 1):
    """Lanczos damping factor sinc(k / (K+1))^m with sinc(0) = 1."""
    if m < 1:
        raise ValueError(f"Lanczos exponent m must be >= 1, got {m}")
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > K):
        raise ValueError(f"order index must satisfy 0 <= k <= K={K}")
    g = np.sinc(k / (K + 1)) ** m
    return float(g) if g.ndim == 0 else g


def damping_vector(kind: str, K: int, m: int = 1) -> np.ndarray:
    """Damping factors for orders 0..K; kind 'none' gives all ones."""
    if kind not in DAMPINGS:
        raise ValueError(f"unknown damping {kind!r}, expected one of {DAMPINGS}")
    ks = np.arange(K + 1)
    if kind == "none":
        return np.ones(K + 1)
    if kind == "jackson":
        return np.asarray(jackson_factor(ks, K), dtype=np.float64)
    return np.asarray(lanczos_factor(ks, K, m), dtype=np.float64)


def cheb_terms(S: SparseOperator, X: np.ndarray, K: int):
    """Yield T_k(S) X for k = 0..K without materializing T_k(S).

    A generator: only the two preceding term matrices stay referenced
    internally, so a consumer that does not hoard the yields keeps at most
    three dense terms alive.  The caller is responsible for S having its
    spectrum inside [-1, 1].
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != S.n:
        raise ValueError(f"X has {X.shape[0]} rows, expected {S.n}")
    if K < 0:
        raise ValueError(f"order K must be >= 0, got {K}")
    t_prev = X.copy()
    yield t_prev
    if K == 0:
        return
    t = S.matmat(X)
    yield t
    for _ in range(2, K + 1):
        t, t_prev = 2.0 * S.matmat(t) - t_prev, t
        yield t


def _as_2d(X: np.ndarray) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X[:, None], True
    return X, False


def apply_poly_filter(spec: FilterSpec, S: SparseOperator, X: np.ndarray) -> np.ndarray:
    """Apply the filter to the columns of X through sparse products only.

    Chebyshev uses the streaming recurrence; monomial accumulates powers of
    S; Bernstein evaluates basis polynomials of (I + S)/2 term by term.
    """
    X2, was_1d = _as_2d(X)
    if X2.shape[0] != S.n:
        raise ValueError(f"X has {X2.shape[0]} rows, expected {S.n}")
    w = spec.coefficients
    K = spec.K

    if spec.basis == "chebyshev":
        c = w * spec.damping_vector()
        acc = np.zeros_like(X2)
        for k, term in enumerate(cheb_terms(S, X2, K)):
            if c[k] != 0.0:
                acc += c[k] * term
    elif spec.basis == "monomial":
        acc = w[0] * X2
        v = X2
        for k in range(1, K + 1):
            v = S.matmat(v)
            if w[k] != 0.0:
                acc += w[k] * v
    else:  # bernstein on Y = (I + S) / 2, spectrum mapped into [0, 1]
        def apply_y(v):
            return 0.5 * (v + S.matmat(v))

        def apply_one_minus_y(v):
            return 0.5 * (v - S.matmat(v))

        acc = np.zeros_like(X2)
        for k in range(K + 1):
            if w[k] == 0.0:
                continue
            v = X2
            for _ in range(K - k):
                v = apply_one_minus_y(v)
            for _ in range(k):
                v = apply_y(v)
            acc += (w[k] * math.comb(K, k)) * v

    return acc[:, 0] if was_1d else acc


def scalar_response(spec: FilterSpec, lam):
    """Pointwise frequency response of the filter at lambda in [-1, 1].

    Vectorized over lambda; used for plotting response curves and as the
    response function handed to the spectral oracle.
    """
    x = np.asarray(lam, dtype=np.float64)
    scalar_in = x.ndim == 0
    x = np.atleast_1d(x)
    if spec.basis in ("chebyshev", "bernstein") and np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("lambda outside [-1, 1]")
    w = spec.coefficients
    K = spec.K

    if spec.basis == "chebyshev":
        c = w * spec.damping_vector()
        acc = np.full_like(x, c[0])
        if K >= 1:
            t_prev = np.ones_like(x)
            t = x.copy()
            acc += c[1] * t
            for k in range(2, K + 1):
                t, t_prev = 2.0 * x * t - t_prev, t
                acc += c[k] * t
    elif spec.basis == "monomial":
        acc = np.full_like(x, w[0])
        v = np.ones_like(x)
        for k in range(1, K + 1):
            v = v * x
            acc += w[k] * v
    else:
        y = 0.5 * (1.0 + x)
        acc = np.zeros_like(x)
        for k in range(K + 1):
            acc += w[k] * math.comb(K, k) * y**k * (1.0 - y) ** (K - k)

    return float(acc[0]) if scalar_in else acc
