"""Pointwise geometry of vertical graphs x_{n+1} = u(x) in the half-space model.

The upper half-space carries the metric (sum dx_i^2) / x_{n+1}^2.  For a graph
with height u > 0, gradient Du and Hessian D2u, the induced (hyperbolic) metric
and second fundamental form are

    g_ij  = (delta_ij + u_i u_j) / u^2
    h_ij  = (delta_ij + u_i u_j + u u_ij) / (u^2 w),      w = sqrt(1 + |Du|^2)

with respect to the hyperbolic upward normal u * nu, where nu = (-Du/w, 1/w)
is the Euclidean upward unit normal.  The hyperbolic principal curvatures are
the roots of det(h - kappa g) = 0 and relate to the Euclidean ones of the same
graph by  kappa_i = u * kappa~_i + nu^{n+1}  with nu^{n+1} = 1/w.

Spectra are computed through a symmetric similarity reduction (Cholesky factor
of the inverse metric) so that a symmetric eigensolver can be used; the raw
shape matrix A = g^{-1} h is not symmetric in graph coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symfunc import CurvatureSpectrum

__all__ = [
    "CurvatureJet",
    "GraphFrame",
    "build_frame",
    "shape_matrix",
    "sigma2_matrix_derivative",
    "shape_operator_derivatives",
    "sigma2_jet_gradient",
    "nu_gradient_check",
]


class GeometryDomainError(ValueError):
    """Raised when a jet or evaluation point is outside the geometric domain."""


@dataclass(frozen=True)
class CurvatureJet:
    """Second-order data (u, Du, D2u) of a graph at one point.

    u must be positive (the graph lives in the half-space) and d2u symmetric.
    """

    u: float
    du: np.ndarray
    d2u: np.ndarray

    def __post_init__(self):
        u = float(self.u)
        du = np.asarray(self.du, dtype=float)
        d2u = np.asarray(self.d2u, dtype=float)
        if not np.isfinite(u) or u <= 0.0:
            raise GeometryDomainError(f"graph height must be positive, got u={u}")
        n = du.size
        if du.ndim != 1 or n < 1:
            raise ValueError("du must be a 1-d vector")
        if d2u.shape != (n, n):
            raise ValueError(f"d2u must be {n}x{n}, got {d2u.shape}")
        asym = np.abs(d2u - d2u.T).max() if n else 0.0
        if asym > 1e-14 * max(1.0, np.abs(d2u).max()):
            raise ValueError(f"d2u is not symmetric (asymmetry {asym:.3e})")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "du", du)
        object.__setattr__(self, "d2u", d2u)

    @property
    def n(self) -> int:
        return self.du.size


@dataclass(frozen=True)
class GraphFrame:
    """Derived pointwise geometry of a graph jet.

    kappa is the hyperbolic spectrum sorted descending; kappa_tilde is the
    Euclidean spectrum (w.r.t. the upward normal, so caps are negative) sorted
    the same way, which makes kappa_i = u*kappa~_i + nu_up hold entrywise.
    """

    w: float
    nu: np.ndarray
    nu_up: float
    g: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    h_tilde: np.ndarray
    kappa: CurvatureSpectrum
    kappa_tilde: CurvatureSpectrum


def _sym_eigvals(mat: np.ndarray, metric_inv: np.ndarray) -> np.ndarray:
    """Eigenvalues of metric_inv @ mat through the symmetric reduction.

    Writes metric_inv = L^T L (Cholesky) and diagonalizes L mat L^T, which is
    similar to metric_inv @ mat but symmetric.
    """
    c = np.linalg.cholesky(metric_inv)  # metric_inv = c c^T
    reduced = c.T @ mat @ c
    return np.linalg.eigvalsh(0.5 * (reduced + reduced.T))


def build_frame(jet: CurvatureJet) -> GraphFrame:
    """Metric, second fundamental forms and both spectra of a graph jet."""
    n = jet.n
    if n < 2:
        raise GeometryDomainError("principal curvature spectra need n >= 2")
    u, p, H = jet.u, jet.du, jet.d2u
    w2 = 1.0 + p @ p
    w = float(np.sqrt(w2))
    nu = np.concatenate([-p / w, [1.0 / w]])
    nu_up = 1.0 / w

    gt = np.eye(n) + np.outer(p, p)            # Euclidean induced metric
    gt_inv = np.eye(n) - np.outer(p, p) / w2
    g = gt / u**2
    g_inv = u**2 * gt_inv
    h = (gt + u * H) / (u**2 * w)
    ht = H / w                                  # Euclidean second fundamental form

    kap = np.sort(_sym_eigvals(h, g_inv))[::-1]
    kap_t = np.sort(_sym_eigvals(ht, gt_inv))[::-1]
    return GraphFrame(
        w=w, nu=nu, nu_up=nu_up, g=g, g_inv=g_inv, h=h, h_tilde=ht,
        kappa=CurvatureSpectrum(kap), kappa_tilde=CurvatureSpectrum(kap_t),
    )


def shape_matrix(jet: CurvatureJet) -> np.ndarray:
    """Shape matrix A = g^{-1} h in graph coordinates (not symmetric)."""
    u, p, H = jet.u, jet.du, jet.d2u
    n = jet.n
    w2 = 1.0 + p @ p
    w = np.sqrt(w2)
    P = np.eye(n) - np.outer(p, p) / w2
    B = np.eye(n) + np.outer(p, p) + u * H
    return P @ B / w


def sigma2_matrix_derivative(a: np.ndarray) -> np.ndarray:
    """Gradient of S_2(eigenvalues) with respect to the matrix entries.

    S_2 of the spectrum equals the second characteristic coefficient
    ((tr A)^2 - tr A^2)/2, so the gradient is tr(A) I - A^T exactly.  This
    closed form is the limit of the eigenvector chain rule and stays smooth
    at repeated eigenvalues (umbilic points), where eigenvector-based
    formulas degenerate.
    """
    a = np.asarray(a, dtype=float)
    return np.trace(a) * np.eye(a.shape[0]) - a.T


def shape_operator_derivatives(jet: CurvatureJet) -> np.ndarray:
    """Matrix F^{ij} = dS_2(spectrum of A)/dA_ij at the jet's shape matrix.

    At a diagonal shape matrix diag(kappa) this is diag(S_1 - kappa_i); in a
    general coordinate frame it is tr(A) I - A^T.
    """
    return sigma2_matrix_derivative(shape_matrix(jet))


def sigma2_jet_gradient(jet: CurvatureJet):
    """Derivatives of R(jet) = S_2(hyperbolic spectrum) w.r.t. (u, Du, D2u).

    Returns (dR_du, dR_dp, dR_dH).  dR_dH uses the full-matrix convention
    dR = sum_ab dR_dH[a,b] * dH[a,b] for symmetric perturbations dH.  These
    feed the discrete Newton linearization through the difference stencils.
    """
    u, p, H = jet.u, jet.du, jet.d2u
    n = jet.n
    w2 = 1.0 + p @ p
    w = np.sqrt(w2)
    P = np.eye(n) - np.outer(p, p) / w2
    B = np.eye(n) + np.outer(p, p) + u * H
    A = P @ B / w
    W = sigma2_matrix_derivative(A).T          # dR = tr(W dA)

    dR_du = np.trace(W @ P @ H) / w
    WP = W @ P
    dR_dH = (u / w) * 0.5 * (WP + WP.T)
    dR_dp = np.zeros(n)
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        ep = np.outer(e, p)
        pe = np.outer(p, e)
        dP = -(ep + pe) / w2 + 2.0 * p[d] * np.outer(p, p) / w2**2
        dB = ep + pe
        dA = (dP @ B + P @ dB) / w - A * (p[d] / w2)
        dR_dp[d] = np.trace(W @ dA)
    return float(dR_du), dR_dp, dR_dH


def nu_gradient_check(profile, r: float, step: float = 1e-4, r_max: float | None = None):
    """Check the frame identity for the vertical normal component on radial graphs.

    At a point of a rotationally symmetric graph the coordinate radial
    direction is principal, so the surface-frame identity

        (derivative of nu^{n+1} along the unit radial tangent)
            = (u_r * e / u) * (nu^{n+1} - kappa_radial),   e = u / w_r

    is checkable by finite differences of the profile alone.  Returns the
    (lhs, rhs) pair; agreement is O(step^2) for smooth profiles.
    """
    if r < 0:
        raise GeometryDomainError("radius must be nonnegative")
    if r_max is not None and r + 2.0 * step > r_max:
        raise GeometryDomainError(
            f"r={r} with step={step} leaves the profile domain [0, {r_max}]"
        )

    def slope(rr: float) -> float:
        return (profile(rr + step) - profile(abs(rr - step))) / (2.0 * step)

    def nu_up(rr: float) -> float:
        return 1.0 / np.sqrt(1.0 + slope(rr) ** 2)

    u = profile(r)
    if not np.isfinite(u) or u <= 0:
        raise GeometryDomainError(f"profile must be positive at r={r}")
    up = slope(r)
    w_r = np.sqrt(1.0 + up**2)

    # d nu / d (hyperbolic arclength): ds = (w_r / u) dr along the graph
    dnu_dr = (nu_up(r + step) - nu_up(abs(r - step))) / (2.0 * step)
    lhs = (u / w_r) * dnu_dr

    # radial hyperbolic principal curvature from the closed-form radial jet
    upp = (profile(r + step) - 2.0 * u + profile(abs(r - step))) / step**2
    kappa_rad = (1.0 + up**2 + u * upp) / w_r**3
    rhs = (up / w_r) * (1.0 / w_r - kappa_rad)
    return float(lhs), float(rhs)
