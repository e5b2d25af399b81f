"""Numerical certification of the S_2 curvature-estimate inequalities.

This module packages the dimension constants of the almost-Jacobi inequality
for the S_2 equation,

    alpha_n = (sqrt(3n^2+1) - (n+1)) / (3(n-1)),
    beta_n  = (sqrt(3n^2+1) - (n-1)) / (2n),

the sharp K_2 bounds on kappa_n and on the partials f_i = S_1 - kappa_i, and
randomized sweeps that certify (or locate counterexamples to) the third-order
quadratic form

    Q(t) = 3|t|^2 - 2<e_i, t>^2 - (1 + delta f_i / S_1) <(1,..,1), t>^2,

restricted to the constraint subspace <Df, t> = 0, with delta = 1 + eps_J and
eps_J = alpha_n (beta_n + kappa_n / S_1).

All sweeps draw from a seeded generator and mix positive-cone samples with
boundary-hugging ones (S_2 pushed toward 0 through the last coordinate),
since any failure of the inequalities must live near the cone boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .symfunc import CurvatureSpectrum, elementary_symmetric, in_garding_cone

__all__ = [
    "JacobiConstants",
    "QFormSample",
    "jacobi_constants",
    "verify_sharp1",
    "verify_sharp2",
    "sharp2_index_slacks",
    "qform_value",
    "qform_min_eigenvalue",
    "make_qform_sample",
    "trace_det_analysis",
    "q_delta_roots",
    "claim1_certificate",
    "claim2_certificate",
    "claim1_quadratic",
    "sample_k2",
    "boundary_hugging_family",
]

DEFAULT_N_CONST = 3.0 + 2.0 * math.sqrt(3.0)   # = 1/a0, approx 6.464
A0 = 2.0 / math.sqrt(3.0) - 1.0


class PreconditionError(ValueError):
    """An operation was called outside its admissible parameter range."""


@dataclass(frozen=True)
class JacobiConstants:
    """Dimension constants entering the curvature estimate for one (n, sigma)."""

    n: int
    alpha: float
    beta: float
    a0: float
    N: float
    eta: float
    sigma: float


def jacobi_constants(n: int, sigma: float = 0.6, N: float = DEFAULT_N_CONST) -> JacobiConstants:
    """Constants alpha_n, beta_n, a0, N and the kappa cutoff eta.

    eta = (N/(N-1)) * (2/sigma) * (1 + sqrt(2)) dominates the negative root of
    the claim-1 quadratic uniformly over nu_up in [sigma, 1].
    """
    if n < 2:
        raise PreconditionError(f"dimension n={n} must be >= 2")
    if not 0.0 < sigma < 1.0:
        raise PreconditionError(f"sigma={sigma} must lie in (0,1)")
    if N <= 1.0:
        raise PreconditionError(f"N={N} must exceed 1")
    root = math.sqrt(3.0 * n * n + 1.0)
    alpha = (root - (n + 1)) / (3.0 * (n - 1))
    beta = (root - (n - 1)) / (2.0 * n)
    eta = (N / (N - 1.0)) * (2.0 / sigma) * (1.0 + math.sqrt(2.0))
    return JacobiConstants(n=n, alpha=alpha, beta=beta, a0=A0, N=N, eta=eta, sigma=sigma)


def _require_k2_sorted(kappa) -> np.ndarray:
    if isinstance(kappa, CurvatureSpectrum):
        v = kappa.values
    else:
        v = np.asarray(kappa, dtype=float)
    if np.any(np.diff(v) > 1e-12 * max(1.0, np.abs(v).max())):
        raise PreconditionError("kappa must be sorted descending")
    if not in_garding_cone(2, v).member:
        raise PreconditionError("kappa is not in the Garding cone K_2")
    return v


def verify_sharp1(kappa) -> float:
    """Slack of the sharp lower bound kappa_n > -((n-2)/n) S_1 on K_2.

    Returns kappa_n + ((n-2)/n) S_1(kappa); strictly positive inside K_2, and
    it degenerates to 0 as kappa approaches the boundary with the last entry
    most negative over an otherwise equal spectrum.
    """
    v = _require_k2_sorted(kappa)
    n = v.size
    return float(v[-1] + (n - 2) / n * v.sum())


def verify_sharp2(kappa) -> np.ndarray:
    """Slacks of the four sharp bounds on f_i = S_1 - kappa_i over K_2.

    Order: [f_1 - S_2/S_1,  ((n-1)/n) S_1 - f_1,
            min_{i>=2} f_i - (1 - 1/sqrt(2)) S_1,
            2((n-1)/n) S_1 - max_{i>=2} f_i].
    All four are nonnegative on K_2 (the second vanishes at equal spectra).
    """
    v = _require_k2_sorted(kappa)
    n = v.size
    s1 = v.sum()
    s2 = elementary_symmetric(2, v)
    f = s1 - v
    rest = f[1:]
    return np.array([
        f[0] - s2 / s1,
        (n - 1) / n * s1 - f[0],
        rest.min() - (1.0 - 1.0 / math.sqrt(2.0)) * s1,
        2.0 * (n - 1) / n * s1 - rest.max(),
    ])


def sharp2_index_slacks(kappa) -> np.ndarray:
    """Diagnostic: per-index slacks f_i - (1 - i^{-1/2}) S_1 for i = 1..n.

    The index-dependent constant is recorded for inspection only; the gated
    certificate uses the uniform i=2 constant from verify_sharp2.
    """
    v = _require_k2_sorted(kappa)
    s1 = v.sum()
    f = s1 - v
    i = np.arange(1, v.size + 1, dtype=float)
    return f - (1.0 - i ** -0.5) * s1


@dataclass(frozen=True)
class QFormSample:
    """One admissible sample (kappa, i, t) of the third-order quadratic form."""

    kappa: np.ndarray
    i: int
    t: np.ndarray
    delta: float
    epsJ: float

    def __post_init__(self):
        v = _require_k2_sorted(self.kappa)
        object.__setattr__(self, "kappa", v)
        t = np.asarray(self.t, dtype=float)
        if t.shape != v.shape:
            raise ValueError("t must match kappa in length")
        if not 0 <= self.i < v.size:
            raise IndexError(f"direction index {self.i} out of range")
        df = v.sum() - v
        dot = abs(df @ t)
        if dot > 1e-12 * max(1.0, np.linalg.norm(df) * np.linalg.norm(t)):
            raise PreconditionError("t violates the constraint <Df, t> = 0")
        object.__setattr__(self, "t", t)


def _eps_jacobi(kappa: np.ndarray, alpha: float, beta: float) -> float:
    return alpha * (beta + kappa[-1] / kappa.sum())


def make_qform_sample(kappa, i: int, t_raw, eps_scale: float = 1.0) -> QFormSample:
    """Project a raw direction onto the constraint subspace and package it.

    eps_scale multiplies eps_J; eps_scale = 1 is the certified value, larger
    values are fault injections for sharpness probes.
    """
    v = _require_k2_sorted(kappa)
    cst = jacobi_constants(v.size)
    eps = eps_scale * _eps_jacobi(v, cst.alpha, cst.beta)
    df = v.sum() - v
    t = np.asarray(t_raw, dtype=float)
    t = t - (df @ t) / (df @ df) * df
    return QFormSample(kappa=v, i=int(i), t=t, delta=1.0 + eps, epsJ=eps)


def qform_value(sample: QFormSample) -> float:
    """Evaluate Q(t) = 3|t|^2 - 2 t_i^2 - (1 + delta f_i/S_1) (sum t)^2."""
    v, t = sample.kappa, sample.t
    s1 = v.sum()
    fi = s1 - v[sample.i]
    gamma = 1.0 + sample.delta * fi / s1
    return float(3.0 * (t @ t) - 2.0 * t[sample.i] ** 2 - gamma * t.sum() ** 2)


def qform_min_eigenvalue(kappa, i: int, delta: float) -> float:
    """Smallest eigenvalue of the form Q restricted to <Df, t> = 0, |t| = 1.

    This is the exact worst case over all admissible t; nonnegativity of the
    form is equivalent to this being >= 0.
    """
    v = _require_k2_sorted(kappa)
    n = v.size
    s1 = v.sum()
    f = s1 - v
    gamma = 1.0 + delta * f[i] / s1
    m = 3.0 * np.eye(n) - gamma * np.ones((n, n))
    m[i, i] -= 2.0
    q, _ = np.linalg.qr(np.column_stack([f, np.eye(n)]))
    basis = q[:, 1:n]                      # orthonormal basis of the Df-perp
    mp = basis.T @ m @ basis
    return float(np.linalg.eigvalsh(0.5 * (mp + mp.T)).min())


class TraceDetResult(NamedTuple):
    trace: float
    det: float
    E_dot_E: float
    L_dot_L: float
    E_dot_L: float


def trace_det_analysis(kappa, i: int, delta: float) -> TraceDetResult:
    """Trace/determinant data of the projected 2x2 eigenproblem of the form.

    Uses the closed forms
        |E|^2 = 1 - f_i^2/|Df|^2,  |L|^2 = 1 - 2 f (n-1)/|Df|^2,
        E.L   = 1 - (n-1) S_1 f_i/|Df|^2,   |Df|^2 = (n-1) S_1^2 - 2 f,
    with gamma = 1 + delta f_i/S_1, and returns

        trace = 6 - 2|E|^2 - gamma |L|^2,
        det   = 9 - 6|E|^2 - 3 gamma |L|^2 + 2 gamma (|E|^2 |L|^2 - (E.L)^2).

    The trace is positive whenever delta <= 3n/(2(n-1)).
    """
    v = _require_k2_sorted(kappa)
    n = v.size
    s1 = v.sum()
    f2 = elementary_symmetric(2, v)
    fi = s1 - v[i]
    df2 = (n - 1) * s1 * s1 - 2.0 * f2
    if df2 <= 0:
        raise AssertionError("|Df|^2 must be positive inside K_2")
    ee = 1.0 - fi * fi / df2
    ll = 1.0 - 2.0 * f2 * (n - 1) / df2
    el = 1.0 - (n - 1) * s1 * fi / df2
    gamma = 1.0 + delta * fi / s1
    trace = 6.0 - 2.0 * ee - gamma * ll
    det = 9.0 - 6.0 * ee - 3.0 * gamma * ll + 2.0 * gamma * (ee * ll - el * el)
    return TraceDetResult(trace=float(trace), det=float(det),
                          E_dot_E=float(ee), L_dot_L=float(ll), E_dot_L=float(el))


def q_delta_roots(n: int) -> tuple[float, float]:
    """Roots (y_minus, y_plus) of q_1(y) = (n-1) + (2n+2) y - 2n y^2.

    y_n^{+-} = (n+1 +- sqrt(3n^2+1)) / (2n);  the identity
    -2n y_n^- / (3(n-1)) = alpha_n ties them to the Jacobi constants.
    """
    if n < 2:
        raise PreconditionError(f"dimension n={n} must be >= 2")
    root = math.sqrt(3.0 * n * n + 1.0)
    y_minus = (n + 1 - root) / (2.0 * n)
    y_plus = (n + 1 + root) / (2.0 * n)
    return y_minus, y_plus


def claim1_certificate(n: int, N: float = DEFAULT_N_CONST) -> tuple[float, float]:
    """Margins of the two claim-1 constant inequalities.

    Returns (alpha_n (beta_n - (n-2)/n) + a0,  1 - a0 N).  Both must be >= 0:
    the first for every n >= 2 (it tends to 0 as n grows), the second exactly
    for N <= 1/a0 = 3 + 2 sqrt(3).
    """
    cst = jacobi_constants(n, N=N)
    margin = cst.alpha * (cst.beta - (n - 2) / n) + cst.a0
    companion = 1.0 - cst.a0 * N
    return float(margin), float(companion)


def claim2_certificate(n: int, N: float = DEFAULT_N_CONST, theta: float = 0.01):
    """Margin of alpha_n beta_n > 2/(N(N-1)) plus the discriminant check.

    Returns (margin, b2_over_4a, s1_requirement_factor) where
    b2_over_4a = 1/((1-theta) alpha_n beta_n + a0) must stay below N - 1, and
    the companion lower bound S_1 >= s1_requirement_factor * C uses the
    empirical claim-1 curvature constant C of a given run.
    """
    if not 0.0 < theta < 1.0:
        raise PreconditionError("theta must lie in (0,1)")
    cst = jacobi_constants(n, N=N)
    margin = cst.alpha * cst.beta - 2.0 / (N * (N - 1.0))
    b2_over_4a = 1.0 / ((1.0 - theta) * cst.alpha * cst.beta + cst.a0)
    s1_factor = 1.0 / (theta * cst.beta)
    return float(margin), float(b2_over_4a), float(s1_factor)


def claim1_quadratic(kappa_i: float, N: float, nu_up: float) -> float:
    """Evaluate ((N-1)/2) k^2 + (2N/nu_up) k - 2N at k = kappa_i.

    Nonnegative for kappa_i <= -eta with eta from jacobi_constants, for any
    nu_up in (0, 1].
    """
    if N <= 1.0:
        raise PreconditionError("N must exceed 1")
    if not 0.0 < nu_up <= 1.0:
        raise PreconditionError("nu_up must lie in (0, 1]")
    return float(0.5 * (N - 1.0) * kappa_i**2 + 2.0 * N / nu_up * kappa_i - 2.0 * N)


# ---------------------------------------------------------------------------
# K_2 sampling


def sample_k2(rng: np.random.Generator, n: int, count: int,
              weights: tuple[float, float, float] = (0.3, 0.5, 0.2)) -> np.ndarray:
    """Draw `count` spectra from K_2, sorted descending, shape (count, n).

    Mixture of (a) positive-cone lognormal draws, (b) boundary-hugging draws
    built by solving S_2 = s for the last coordinate with s spread over many
    decades toward 0, and (c) Gaussian draws kept when they land in K_2.
    Half of the boundary draws use a near-equal leading block, which is where
    the sharp bounds degenerate.
    """
    if n < 2:
        raise PreconditionError(f"dimension n={n} must be >= 2")
    w = np.asarray(weights, float)
    w = w / w.sum()
    kinds = rng.choice(3, size=count, p=w)
    out = np.empty((count, n))

    n_pos = int((kinds == 0).sum())
    if n_pos:
        pos = np.exp(rng.normal(scale=1.0, size=(n_pos, n)))
        out[kinds == 0] = -np.sort(-pos, axis=1)

    n_bdy = int((kinds == 1).sum())
    if n_bdy:
        lead = np.exp(rng.normal(scale=1.0, size=(n_bdy, n - 1)))
        flat = rng.random(n_bdy) < 0.5
        scale = np.exp(rng.normal(size=n_bdy))[:, None]
        jitter = 1.0 + 0.02 * rng.standard_normal((n_bdy, n - 1))
        lead[flat] = (scale * jitter)[flat]
        lead = -np.sort(-lead, axis=1)
        s1p = lead.sum(axis=1)
        s2p = 0.5 * (s1p**2 - (lead**2).sum(axis=1))
        scale_ref = np.where(s2p > 0, s2p, s1p**2)   # n=2 has an empty S_2'
        s = scale_ref * 10.0 ** rng.uniform(-9.0, -0.3, size=n_bdy)
        last = (s - s2p) / s1p
        out[kinds == 1] = np.concatenate([lead, last[:, None]], axis=1)

    n_gau = int((kinds == 2).sum())
    if n_gau:
        got = 0
        acc = np.empty((n_gau, n))
        while got < n_gau:
            cand = rng.standard_normal((max(64, 4 * (n_gau - got)), n))
            cand = -np.sort(-cand, axis=1)
            s1 = cand.sum(axis=1)
            s2 = 0.5 * (s1**2 - (cand**2).sum(axis=1))
            keep = cand[(s1 > 0) & (s2 > 0)]
            take = min(len(keep), n_gau - got)
            acc[got:got + take] = keep[:take]
            got += take
        out[kinds == 2] = acc
    return out


def boundary_hugging_family(n: int, s_values) -> np.ndarray:
    """The equal-leading-block family kappa = (1,..,1, (s - S_2')/(n-1)).

    As s decreases to 0 these approach the K_2 boundary along the ray where
    the sharp-1 slack vanishes; used to exhibit sharpness trends.
    """
    s_values = np.asarray(s_values, float)
    lead = np.ones(n - 1)
    s2p = 0.5 * ((n - 1) ** 2 - (n - 1))
    last = (s_values - s2p) / (n - 1)
    fam = np.tile(lead, (s_values.size, 1))
    return np.concatenate([fam, last[:, None]], axis=1)
