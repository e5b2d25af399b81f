"""Elementary symmetric polynomials of principal curvature vectors.

Everything here operates on a point spectrum ``kappa = (kappa_1, ..., kappa_n)``
of principal curvatures.  The module provides the values S_k, their first and
second partial derivatives, and membership tests for the Garding cones

    K_k = { kappa : S_j(kappa) > 0 for all 1 <= j <= k },

which is the admissibility cone making the S_k curvature equation elliptic.

S_k is evaluated with the subset-sum prefix recurrence (O(n*k) flops, no
binomial blowup), which is stable for the n <= 64 range this package targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CurvatureSpectrum",
    "ConeLabel",
    "elementary_symmetric",
    "elementary_symmetric_prefix",
    "normalized_hk",
    "partial_sk",
    "second_partial_sk",
    "in_garding_cone",
]


@dataclass(frozen=True)
class CurvatureSpectrum:
    """Ordered vector of principal curvatures at a point.

    values must be a finite real vector of length n >= 2.  No sort order is
    imposed here; operations that need a descending order say so.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("curvature spectrum needs at least 2 entries")
        if not np.all(np.isfinite(v)):
            raise ValueError("curvature spectrum entries must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def sorted_descending(self) -> "CurvatureSpectrum":
        return CurvatureSpectrum(np.sort(self.values)[::-1].copy())


@dataclass(frozen=True)
class ConeLabel:
    """Result of a Garding cone membership test.

    slacks holds (S_1, ..., S_k); member is True iff every slack is strictly
    positive.  The cone is open, so no tolerance is applied here -- callers
    that want a margin policy read the slacks themselves.
    """

    k: int
    member: bool
    slacks: np.ndarray = field(repr=False)


def _values(kappa) -> np.ndarray:
    if isinstance(kappa, CurvatureSpectrum):
        return kappa.values
    v = np.asarray(kappa, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d curvature vector")
    return v


def elementary_symmetric_prefix(kappa, kmax: int) -> np.ndarray:
    """All S_0, ..., S_kmax of kappa via the subset-sum recurrence."""
    v = _values(kappa)
    n = v.size
    if not 0 <= kmax <= n:
        raise ValueError(f"kmax={kmax} out of range for n={n}")
    e = np.zeros(kmax + 1)
    e[0] = 1.0
    for i in range(n):
        top = min(i + 1, kmax)
        for j in range(top, 0, -1):
            e[j] += v[i] * e[j - 1]
    return e


def elementary_symmetric(k: int, kappa) -> float:
    """Unnormalized k-th elementary symmetric polynomial S_k(kappa).

    S_0 = 1 by the empty-product convention; S_n is the plain product.
    """
    v = _values(kappa)
    if not 0 <= k <= v.size:
        raise ValueError(f"k={k} out of range for n={v.size}")
    return float(elementary_symmetric_prefix(v, k)[k])


def normalized_hk(k: int, kappa) -> float:
    """Normalized symmetric polynomial H_k = S_k / C(n, k)."""
    v = _values(kappa)
    if not 1 <= k <= v.size:
        raise ValueError(f"k={k} out of range for n={v.size}")
    return elementary_symmetric(k, v) / math.comb(v.size, k)


def partial_sk(k: int, kappa, i: int) -> float:
    """First partial d S_k / d kappa_i = S_{k-1}(kappa with entry i deleted).

    i is a 0-based index.  For k = 2 this equals S_1(kappa) - kappa_i.
    """
    v = _values(kappa)
    if not 1 <= k <= v.size:
        raise ValueError(f"k={k} out of range for n={v.size}")
    if not 0 <= i < v.size:
        raise IndexError(f"index i={i} out of range for n={v.size}")
    rest = np.delete(v, i)
    return float(elementary_symmetric_prefix(rest, k - 1)[k - 1])


def second_partial_sk(k: int, kappa, i: int, j: int) -> float:
    """Second partial of S_k: S_{k-2}(kappa with entries i, j deleted), 0 if i == j.

    Indices are 0-based.  For k = 2 the matrix of second partials is the
    constant 1 - delta_ij.
    """
    v = _values(kappa)
    if k < 2 or k > v.size:
        raise ValueError(f"k={k} out of range (need 2 <= k <= {v.size})")
    for idx in (i, j):
        if not 0 <= idx < v.size:
            raise IndexError(f"index {idx} out of range for n={v.size}")
    if i == j:
        return 0.0
    rest = np.delete(v, [i, j])
    return float(elementary_symmetric_prefix(rest, k - 2)[k - 2])


def in_garding_cone(k: int, kappa) -> ConeLabel:
    """Strict membership of kappa in the k-th Garding cone K_k.

    Returns the slack vector (S_1, ..., S_k) along with the verdict; strict
    positivity of all slacks is required, with no epsilon.
    """
    v = _values(kappa)
    if not 1 <= k <= v.size:
        raise ValueError(f"k={k} out of range for n={v.size}")
    slacks = elementary_symmetric_prefix(v, k)[1:]
    return ConeLabel(k=k, member=bool(np.all(slacks > 0.0)), slacks=slacks)
