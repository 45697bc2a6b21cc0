"""Vector norms, dual norms, induced matrix norms and logarithmic norms.

Every norm handled here is a diagonally weighted p-norm,
``||x|| = ||w * x||_p`` with ``p`` in ``{1, 2, inf}`` and ``w > 0``. The
unweighted kinds are the special case ``w = 1``. Keeping the family closed
under duality (``(p, w) -> (p*, 1/w)``) lets every bound in the package be
evaluated in a norm and its dual with the same code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "NormKind",
    "L1",
    "L2",
    "LINF",
    "weighted_l1",
    "weighted_l2",
    "weighted_linf",
    "vector_norm",
    "dual_kind",
    "induced_matrix_norm",
    "log_norm",
]

_BASE_P = {"l1": 1, "l2": 2, "linf": np.inf, "wl1": 1, "wl2": 2, "wlinf": np.inf}
_WEIGHTED = {"wl1", "wl2", "wlinf"}
_DUAL_TAG = {"l1": "linf", "linf": "l1", "l2": "l2", "wl1": "wlinf", "wlinf": "wl1", "wl2": "wl2"}


@dataclass(frozen=True, eq=False)
class NormKind:
    """A norm on R^n, identified by a tag and optional positive weights.

    Tags are ``"l1"``, ``"l2"``, ``"linf"`` and their weighted analogs
    ``"wl1"``, ``"wl2"``, ``"wlinf"``. A weighted kind evaluates
    ``||w * x||_p``.
    """

    tag: str
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tag not in _BASE_P:
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.tag in _WEIGHTED:
            if self.weights is None:
                raise ValueError(f"norm {self.tag!r} requires a weight vector")
            w = np.array(self.weights, dtype=float).reshape(-1)
            if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite and strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError(f"norm {self.tag!r} takes no weights")

    @property
    def p(self) -> float:
        return _BASE_P[self.tag]

    @property
    def weighted(self) -> bool:
        return self.tag in _WEIGHTED

    def scale(self, n: int) -> np.ndarray:
        """Weight vector for dimension ``n`` (ones for unweighted kinds)."""
        if self.weights is None:
            return np.ones(n)
        if self.weights.size != n:
            raise ValueError(
                f"dimension mismatch: norm has {self.weights.size} weights, vector has {n} entries"
            )
        return self.weights

    def __eq__(self, other):
        if not isinstance(other, NormKind) or other.tag != self.tag:
            return False
        if self.weights is None:
            return other.weights is None
        return other.weights is not None and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        w = None if self.weights is None else tuple(self.weights.tolist())
        return hash((self.tag, w))

    def __repr__(self):
        if self.weights is None:
            return f"NormKind({self.tag!r})"
        return f"NormKind({self.tag!r}, weights={self.weights.tolist()})"

    def to_dict(self) -> dict:
        d = {"kind": self.tag}
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormKind":
        unknown = set(d) - {"kind", "weights"}
        if unknown:
            raise ValueError(f"unknown norm keys: {sorted(unknown)}")
        return cls(d["kind"], d.get("weights"))


L1 = NormKind("l1")
L2 = NormKind("l2")
LINF = NormKind("linf")


def weighted_l1(w) -> NormKind:
    return NormKind("wl1", w)


def weighted_l2(w) -> NormKind:
    return NormKind("wl2", w)


def weighted_linf(w) -> NormKind:
    return NormKind("wlinf", w)


def _pnorm(x: np.ndarray, p: float) -> float:
    if p == 1:
        return float(np.sum(np.abs(x)))
    if p == 2:
        return float(np.sqrt(np.dot(x, x)))
    return float(np.max(np.abs(x))) if x.size else 0.0


def vector_norm(x, kind: NormKind) -> float:
    """Norm of a real vector in the given kind.

    >>> vector_norm([3.0, -4.0], L2)
    5.0
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return _pnorm(kind.scale(x.size) * x, kind.p)


def dual_kind(kind: NormKind) -> NormKind:
    """Kind whose norm is the dual of ``kind``: ``sup_{||y|| <= 1} y^T x``."""
    tag = _DUAL_TAG[kind.tag]
    if kind.weights is None:
        return NormKind(tag)
    return NormKind(tag, 1.0 / kind.weights)


def _check_matrix(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _lambda_max_sym(S: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(S)[-1])


def _spectral_norm(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    # Gram matrix of the smaller side keeps the eigensolve small.
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    return float(np.sqrt(max(_lambda_max_sym(0.5 * (G + G.T)), 0.0)))


def induced_matrix_norm(A, kind: NormKind, domain: Optional[NormKind] = None) -> float:
    """Operator norm ``sup ||A x||_kind / ||x||_domain``.

    ``domain`` defaults to ``kind``. Mixed pairs are supported when a
    closed form exists: equal base ``p``, a 1-type domain, or an inf-type
    codomain. The remaining pairs (2->1, inf->1, inf->2) raise ``ValueError``.
    """
    A = _check_matrix(A)
    domain = kind if domain is None else domain
    m, n = A.shape
    M = kind.scale(m)[:, None] * A / domain.scale(n)[None, :]
    p, q = domain.p, kind.p
    if p == 1:
        # extreme points of the unit ball are signed basis vectors
        return max((_pnorm(M[:, j], q) for j in range(n)), default=0.0)
    if q == np.inf:
        pstar = {1: np.inf, 2: 2, np.inf: 1}[p]
        return max((_pnorm(M[i, :], pstar) for i in range(m)), default=0.0)
    if p == 2 and q == 2:
        return _spectral_norm(M)
    raise ValueError(f"no closed-form induced norm from {domain.tag!r} to {kind.tag!r}")


def log_norm(A, kind: NormKind) -> float:
    """Logarithmic norm (matrix measure) of a square matrix.

    Weighted kinds reduce to the unweighted formula for ``W A W^{-1}``.
    """
    A = _check_matrix(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"log norm needs a square matrix, got {A.shape}")
    w = kind.scale(n)
    M = w[:, None] * A / w[None, :]
    p = kind.p
    d = np.diag(M)
    off = np.abs(M) - np.diag(np.abs(d))
    if p == 1:
        return float(np.max(d + off.sum(axis=0)))
    if p == np.inf:
        return float(np.max(d + off.sum(axis=1)))
    return _lambda_max_sym(0.5 * (M + M.T))
