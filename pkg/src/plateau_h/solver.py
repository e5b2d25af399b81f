"""Newton/continuation solver for S_2(kappa[graph u]) = C(n,2) sigma^2 on Omega.

The discrete problem lives on the tensor grid of a Discretization: at every
interior node the central-difference jet feeds the graph geometry, and the
equation is imposed in the polynomial form

    S_2(kappa) - C(n,2) sigma^2 = 0,

which is smooth in the jet and keeps the linearization polynomial (the root
form H_2^{1/2} = sigma has the same zero set for admissible states).  The
boundary condition u = eps is enforced through the ghost closure of the grid.

Admissibility (u > 0 and kappa in the cone K_2 at every node) is maintained
by backtracking: a Newton trial step is halved until the new state is
admissible and the residual norm decreases.  Continuation walks sigma down
from max(0.9, sigma_target) and then descends the eps schedule, bisecting a
stage increment up to twice before giving up.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import Discretization, DomainSpec
from .inequality_lab import DEFAULT_N_CONST, JacobiConstants, jacobi_constants

__all__ = [
    "CapProfile",
    "exact_cap",
    "shifted_cap",
    "GridSolution",
    "EstimateReport",
    "StepDiagnostics",
    "SolverError",
    "StagnationError",
    "LinearSolveError",
    "residual",
    "residual_field",
    "newton_step",
    "newton_solve",
    "continuation_solve",
    "estimate_report",
]


class SolverError(RuntimeError):
    pass


class LinearSolveError(SolverError):
    """The sparse linear solve failed or returned non-finite values."""


class StagnationError(SolverError):
    """Newton damping underflowed; carries the last converged stage if any."""

    def __init__(self, message, partial=None, reports=None):
        super().__init__(message)
        self.partial = partial
        self.reports = reports or []


# ---------------------------------------------------------------------------
# Equidistant caps (closed-form umbilic solutions over balls)


@dataclass(frozen=True)
class CapProfile:
    """Spherical cap u(x) = sqrt(rho^2 - |x - x0|^2) - c with kappa_i === sigma.

    The graph is umbilic: every hyperbolic principal curvature equals
    c / rho = sigma, so H_2^{1/2} = sigma exactly.  boundary_height is the
    value of u on |x - x0| = radius (0 for the exact cap, eps for shifted).
    """

    rho: float
    c: float
    sigma: float
    radius: float
    boundary_height: float
    center: tuple[float, ...] = ()

    def _r(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.center and x.shape[-1] == len(self.center):
            x = x - np.asarray(self.center)
        return np.sqrt((x**2).sum(axis=-1))

    def height(self, r) -> np.ndarray:
        """Cap height as a function of the radial coordinate."""
        r = np.asarray(r, dtype=float)
        return np.sqrt(self.rho**2 - r**2) - self.c

    def height_at(self, x) -> np.ndarray:
        return self.height(self._r(x))

    def nu_up(self, r) -> np.ndarray:
        """Vertical normal component 1/w = sqrt(rho^2 - r^2)/rho."""
        r = np.asarray(r, dtype=float)
        return np.sqrt(self.rho**2 - r**2) / self.rho

    def jet_at(self, x):
        """Closed-form (u, Du, D2u) of the cap at a base point."""
        x = np.asarray(x, dtype=float)
        if self.center:
            x = x - np.asarray(self.center)
        s = math.sqrt(self.rho**2 - float(x @ x))
        u = s - self.c
        du = -x / s
        d2u = -np.eye(x.size) / s - np.outer(x, x) / s**3
        return u, du, d2u


def exact_cap(radius: float, sigma: float, center=()) -> CapProfile:
    """The cap with kappa === sigma meeting u = 0 on |x| = radius.

    rho = radius / sqrt(1 - sigma^2) and c = sigma rho; as sigma -> 1 the cap
    flattens toward a horosphere (rho -> infinity), and sigma >= 1 admits no
    admissible graph at all.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma={sigma} must lie in (0,1)")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    rho = radius / math.sqrt(1.0 - sigma**2)
    return CapProfile(rho=rho, c=sigma * rho, sigma=sigma, radius=radius,
                      boundary_height=0.0, center=tuple(center))


def shifted_cap(radius: float, sigma: float, eps: float, center=()) -> CapProfile:
    """The cap with kappa === sigma passing through u = eps at |x| = radius.

    This is the continuum solution of the eps-regularized problem over the
    ball, i.e. the exact cap over the slightly larger ball on which u
    vanishes.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma={sigma} must lie in (0,1)")
    if radius <= 0.0 or eps < 0.0:
        raise ValueError("radius must be positive and eps nonnegative")
    a = 1.0 - sigma**2
    rho = (eps * sigma + math.sqrt(eps**2 * sigma**2 + a * (1.0 + eps**2))) / a
    return CapProfile(rho=rho, c=sigma * rho, sigma=sigma, radius=radius,
                      boundary_height=eps, center=tuple(center))


# ---------------------------------------------------------------------------
# Discrete state


@dataclass
class GridSolution:
    """Discrete solution state on a Discretization.

    u holds interior node values (ghosts are derived); sigma and eps_boundary
    identify the stage.  converged reflects the last Newton run.
    """

    spec: DomainSpec
    disc: Discretization
    u: np.ndarray
    sigma: float
    eps_boundary: float
    converged: bool = False
    newton_iters: int = 0

    @property
    def h_grid(self) -> float:
        return self.disc.h

    @property
    def mask(self) -> np.ndarray:
        return self.disc.is_interior

    def full_field(self) -> np.ndarray:
        return self.disc.full_field(self.u, self.eps_boundary)


@dataclass(frozen=True)
class StepDiagnostics:
    step_scale: float
    residual_norm_before: float
    residual_norm_after: float
    residual_linf_after: float
    halvings: int


@dataclass(frozen=True)
class EstimateReport:
    """Per-stage a-priori-estimate diagnostics of a discrete solution."""

    sigma: float
    eps: float
    min_nu_up: float
    min_kappa: float
    max_S1_interior: float
    max_S1_boundary_ring: float
    ratio: float
    q_argmax_location: str
    residual_linf: float
    newton_iters: int = 0

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "eps": self.eps,
            "min_nu_up": self.min_nu_up,
            "min_kappa": self.min_kappa,
            "max_S1_interior": self.max_S1_interior,
            "max_S1_boundary_ring": self.max_S1_boundary_ring,
            "ratio": self.ratio,
            "q_argmax_location": self.q_argmax_location,
            "residual_linf": self.residual_linf,
            "newton_iters": self.newton_iters,
        }


# ---------------------------------------------------------------------------
# Vectorized geometry over the grid


def _shape_matrices(u, p, H):
    """Batched shape matrices A = g^{-1} h = P B / w and the factor pieces."""
    n = p.shape[1]
    w2 = 1.0 + (p**2).sum(axis=1)
    w = np.sqrt(w2)
    eye = np.eye(n)[None]
    outer = p[:, :, None] * p[:, None, :]
    P = eye - outer / w2[:, None, None]
    B = eye + outer + u[:, None, None] * H
    A = P @ B / w[:, None, None]
    return A, P, B, w, w2


def _batched_spectra(u, p, H):
    """Hyperbolic principal curvature spectra at every node, ascending order.

    Uses the symmetric reduction of g^{-1} h through the Cholesky factor of
    the inverse metric, exactly as the pointwise frame construction does.
    """
    n = p.shape[1]
    w2 = 1.0 + (p**2).sum(axis=1)
    w = np.sqrt(w2)
    eye = np.eye(n)[None]
    outer = p[:, :, None] * p[:, None, :]
    g_inv = u[:, None, None] ** 2 * (eye - outer / w2[:, None, None])
    h = (eye + outer + u[:, None, None] * H) / (u**2 * w)[:, None, None]
    cfac = np.linalg.cholesky(g_inv)
    red = np.transpose(cfac, (0, 2, 1)) @ h @ cfac
    return np.linalg.eigvalsh(0.5 * (red + np.transpose(red, (0, 2, 1))))


def equation_constant(n: int, sigma: float) -> float:
    return math.comb(n, 2) * sigma**2


def residual_field(disc: Discretization, U: np.ndarray, sigma: float):
    """Residual and admissibility flags of a raw full-grid field.

    The field is read as given (no ghost refresh), which lets analytic
    oracles drive the pure central-difference truncation error.
    """
    u, p, H = disc.jets(U)
    if np.any(u <= 0.0):
        raise SolverError("state error: u <= 0 at an interior node")
    A, *_ = _shape_matrices(u, p, H)
    s1 = np.trace(A, axis1=1, axis2=2)
    s2 = 0.5 * (s1**2 - np.einsum("mij,mji->m", A, A))
    res = s2 - equation_constant(disc.n, sigma)
    flags = (s1 > 0.0) & (s2 > 0.0)
    return res, flags


def residual(sol: GridSolution):
    """Residual field S_2(kappa) - C(n,2) sigma^2 and K_2 admissibility flags.

    S_2 of the spectrum is evaluated through the characteristic-coefficient
    identity S_2 = ((tr A)^2 - tr A^2)/2 of the shape matrix, which agrees
    with the eigenvalue route to machine precision and needs no eigensolve.
    Ghost values are refreshed from the current interior state first.
    """
    return residual_field(sol.disc, sol.full_field(), sol.sigma)


def _jet_gradients(u, p, H):
    """Batched derivatives of S_2(spectrum) w.r.t. (u, Du, D2u) at each node."""
    m, n = p.shape
    A, P, B, w, w2 = _shape_matrices(u, p, H)
    s1 = np.trace(A, axis1=1, axis2=2)
    W = s1[:, None, None] * np.eye(n)[None] - A        # dR = tr(W dA)
    c_u = np.einsum("mij,mjk,mki->m", W, P, H) / w
    WP = W @ P
    M_H = (u / w)[:, None, None] * 0.5 * (WP + np.transpose(WP, (0, 2, 1)))
    c_p = np.empty((m, n))
    outer = p[:, :, None] * p[:, None, :]
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        ep = e[None, :, None] * p[:, None, :]
        pe = p[:, :, None] * e[None, None, :]
        dP = -(ep + pe) / w2[:, None, None] + 2.0 * p[:, d, None, None] * outer / (w2**2)[:, None, None]
        dB = ep + pe
        dA = (dP @ B + P @ dB) / w[:, None, None] - A * (p[:, d] / w2)[:, None, None]
        c_p[:, d] = np.einsum("mij,mji->m", W, dA)
    return c_u, c_p, M_H


class _Assembler:
    """Static-sparsity Jacobian assembly for one Discretization.

    The scatter plan (rows, cols, which stencil arm, ghost multipliers) only
    depends on the grid, so it is built once; per Newton iteration only the
    data vector is recomputed.
    """

    def __init__(self, disc: Discretization):
        self.disc = disc
        n = disc.n
        m = disc.m_int
        nodes = np.arange(m)
        plans = []

        def plan_for(off):
            q = disc.neigh[off]
            inter = disc.is_interior[q]
            rows = [nodes[inter]]
            cols = [disc.int_col[q[inter]]]
            mult = [np.ones(int(inter.sum()))]
            for k in np.nonzero(~inter)[0]:
                rule = disc.ghost_rules[disc.ghost_index[int(q[k])]]
                for c, wgt in zip(rule.cols, rule.weights):
                    rows.append(np.array([k]))
                    cols.append(np.array([c]))
                    mult.append(np.array([wgt]))
            return (np.concatenate(rows), np.concatenate(cols), np.concatenate(mult))

        unit = lambda d: tuple(1 if k == d else 0 for k in range(n))
        self.arms = []
        # center arm (always interior)
        self.arms.append(("center", None, (nodes, nodes, np.ones(m))))
        for d in range(n):
            e = unit(d)
            em = tuple(-v for v in e)
            self.arms.append(("axis+", d, plan_for(e)))
            self.arms.append(("axis-", d, plan_for(em)))
        for a in range(n):
            for b in range(a + 1, n):
                pp = tuple((1 if k == a else 0) + (1 if k == b else 0) for k in range(n))
                mm = tuple(-v for v in pp)
                pm = tuple((1 if k == a else 0) - (1 if k == b else 0) for k in range(n))
                mp = tuple(-v for v in pm)
                for name, off in (("diag++", pp), ("diag--", mm), ("diag+-", pm), ("diag-+", mp)):
                    self.arms.append((name, (a, b), plan_for(off)))
        self.rows = np.concatenate([p[0] for (_, _, p) in self.arms])
        self.cols = np.concatenate([p[1] for (_, _, p) in self.arms])

    def matrix(self, u, p, H) -> sp.csr_matrix:
        disc = self.disc
        h = disc.h
        n = disc.n
        c_u, c_p, M_H = _jet_gradients(u, p, H)
        diag2 = sum(M_H[:, d, d] for d in range(n))
        data = []
        for name, tag, (rows, cols, mult) in self.arms:
            if name == "center":
                coeff = c_u - 2.0 * diag2 / h**2
            elif name == "axis+":
                coeff = c_p[:, tag] / (2.0 * h) + M_H[:, tag, tag] / h**2
            elif name == "axis-":
                coeff = -c_p[:, tag] / (2.0 * h) + M_H[:, tag, tag] / h**2
            else:
                a, b = tag
                base = 2.0 * M_H[:, a, b] / (4.0 * h**2)
                coeff = base if name in ("diag++", "diag--") else -base
            data.append(coeff[rows] * mult)
        data = np.concatenate(data)
        return sp.csr_matrix((data, (self.rows, self.cols)),
                             shape=(disc.m_int, disc.m_int))


def _get_assembler(disc: Discretization) -> _Assembler:
    asm = getattr(disc, "_assembler", None)
    if asm is None:
        asm = _Assembler(disc)
        disc._assembler = asm
    return asm


def assembled_jacobian(sol: GridSolution) -> sp.csr_matrix:
    """Sparse linearization of the residual w.r.t. interior node values."""
    U = sol.full_field()
    u, p, H = sol.disc.jets(U)
    return _get_assembler(sol.disc).matrix(u, p, H)


def _linear_solve(J: sp.csr_matrix, rhs: np.ndarray, n: int) -> np.ndarray:
    try:
        if n == 2:
            delta = spla.splu(J.tocsc()).solve(rhs)
        else:
            # restarted GMRES with diagonal preconditioning for 3-d grids
            d = J.diagonal()
            d[d == 0.0] = 1.0
            M = spla.LinearOperator(J.shape, matvec=lambda x: x / d)
            delta, info = spla.gmres(J, rhs, M=M, rtol=1e-12, atol=0.0,
                                     restart=80, maxiter=400)
            if info != 0:
                delta = spla.splu(J.tocsc()).solve(rhs)
    except Exception as exc:  # pragma: no cover - scipy failure paths
        raise LinearSolveError(f"sparse linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(delta)):
        raise LinearSolveError("linear solve produced non-finite update")
    return delta


def newton_step(sol: GridSolution) -> tuple[GridSolution, StepDiagnostics]:
    """One damped Newton step keeping every iterate admissible.

    The trial step is halved until u > 0 everywhere, kappa stays in K_2 at
    all nodes, and the residual 2-norm decreases; underflow of the damping
    factor raises StagnationError.
    """
    res, flags = residual(sol)
    if not flags.all():
        raise StagnationError("current iterate is not admissible")
    norm0 = float(np.linalg.norm(res))
    J = assembled_jacobian(sol)
    delta = _linear_solve(J, -res, sol.spec.n)
    s = 1.0
    halvings = 0
    while True:
        u_try = sol.u + s * delta
        if np.all(u_try > 0.0):
            trial = replace(sol, u=u_try, converged=False)
            try:
                r_try, f_try = residual(trial)
            except SolverError:
                r_try, f_try = None, None
            if r_try is not None and f_try.all() and np.linalg.norm(r_try) < norm0:
                diag = StepDiagnostics(
                    step_scale=s,
                    residual_norm_before=norm0,
                    residual_norm_after=float(np.linalg.norm(r_try)),
                    residual_linf_after=float(np.abs(r_try).max()),
                    halvings=halvings,
                )
                return trial, diag
        s *= 0.5
        halvings += 1
        if s < 1e-12:
            raise StagnationError("Newton damping underflow (step < 1e-12)")


def newton_solve(sol: GridSolution, tol: float = 1e-10, max_iters: int = 15) -> GridSolution:
    """Damped Newton iteration until the residual sup-norm drops below tol."""
    res, flags = residual(sol)
    if not flags.all():
        raise StagnationError("inadmissible start state for Newton")
    linf = float(np.abs(res).max())
    it = 0
    while linf > tol:
        if it >= max_iters:
            raise StagnationError(f"no convergence in {max_iters} Newton iterations")
        sol, diag = newton_step(sol)
        linf = diag.residual_linf_after
        it += 1
    sol.converged = True
    sol.newton_iters = it
    return sol


# ---------------------------------------------------------------------------
# Continuation


def _initial_state(spec: DomainSpec, disc: Discretization, sigma: float, eps: float) -> GridSolution:
    """Cap-profile start composed with the domain's level radius.

    The profile is the circumscribed-ball cap through height eps; composing
    it with the normalized level radius makes the guess equal eps exactly on
    the true boundary for every supported shape (for balls this IS the cap),
    which keeps the start admissible.  A raw circumscribed cap leaves an O(1)
    kink against the eps ghost closure on non-ball domains and Newton cannot
    recover from it.
    """
    prof = shifted_cap(spec.circumscribed_radius, sigma, eps)
    rad = spec.normalized_level_radius(disc.interior_points) * spec.circumscribed_radius
    u0 = prof.height(np.minimum(rad, spec.circumscribed_radius))
    u0 = np.maximum(u0, 0.5 * eps)
    return GridSolution(spec=spec, disc=disc, u=u0, sigma=sigma, eps_boundary=eps)


def _run_stage(sol: GridSolution, sigma: float, eps: float,
               tol: float, max_iters: int, depth: int = 0) -> GridSolution:
    """Advance the state to stage (sigma, eps), bisecting the jump on failure."""
    u_pred = np.maximum(sol.u + (eps - sol.eps_boundary), 0.5 * eps)
    trial = replace(sol, u=u_pred, sigma=sigma, eps_boundary=eps, converged=False)
    try:
        return newton_solve(trial, tol=tol, max_iters=max_iters)
    except StagnationError:
        if depth >= 2:
            raise
        mid_sigma = 0.5 * (sol.sigma + sigma)
        mid_eps = math.sqrt(sol.eps_boundary * eps)
        half = _run_stage(sol, mid_sigma, mid_eps, tol, max_iters, depth + 1)
        return _run_stage(half, sigma, eps, tol, max_iters, depth + 1)


def continuation_solve(spec: DomainSpec, sigma_target: float, eps_schedule,
                       resolution: int = 64,
                       constants: JacobiConstants | None = None,
                       tol: float = 1e-10, max_iters: int = 15,
                       collect_reports: bool = True):
    """Solve down the sigma walk and the eps schedule; report every stage.

    Starts from the circumscribed cap at sigma = max(0.9, sigma_target) and
    eps = eps_schedule[0], walks sigma down in steps of at most 0.05, then
    descends the eps schedule at fixed sigma.  Returns the final GridSolution
    and the list of per-stage EstimateReports.  On stagnation (after two
    bisections of the failing increment) raises StagnationError carrying the
    last converged stage.
    """
    if not 0.0 < sigma_target < 1.0:
        raise ValueError(f"sigma={sigma_target} must lie in (0,1): admissible "
                         "graphs with sigma >= 1 are excluded by horospheres")
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be positive")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")

    disc = Discretization(spec, resolution)
    sigma_start = max(0.9, sigma_target)
    n_sig = max(1, math.ceil((sigma_start - sigma_target) / 0.05 - 1e-12))
    sigma_stages = np.linspace(sigma_start, sigma_target, n_sig + 1)

    if constants is None:
        constants = jacobi_constants(spec.n, sigma=sigma_target, N=DEFAULT_N_CONST)

    eps0 = eps_schedule[0]
    sol = _initial_state(spec, disc, sigma_stages[0], eps0)
    reports: list[EstimateReport] = []
    try:
        for sg in sigma_stages:
            sol = _run_stage(sol, float(sg), eps0, tol, max_iters)
        if collect_reports:
            reports.append(estimate_report(sol, constants))
        for eps in eps_schedule[1:]:
            sol = _run_stage(sol, sigma_target, eps, tol, max_iters)
            if collect_reports:
                reports.append(estimate_report(sol, constants))
    except StagnationError as exc:
        raise StagnationError(
            f"continuation stagnated at sigma={sol.sigma}, eps={sol.eps_boundary}: {exc}",
            partial=sol, reports=reports,
        ) from exc
    return sol, reports


# ---------------------------------------------------------------------------
# Estimate monitor


def estimate_report(sol: GridSolution, constants: JacobiConstants) -> EstimateReport:
    """A-priori-estimate diagnostics mirroring the curvature-bound theorem.

    Reports min nu^{n+1} (the gradient-bound witness: mean-convex domains
    keep it >= sigma), the most negative principal curvature, the interior
    versus boundary-ring maxima of S_1 with their ratio
    max_interior / (1 + max_ring), and where the test quantity
    Q = log S_1 - N log nu^{n+1} attains its maximum.
    """
    U = sol.full_field()
    u, p, H = sol.disc.jets(U)
    spectra = _batched_spectra(u, p, H)
    s1 = spectra.sum(axis=1)
    nu = 1.0 / np.sqrt(1.0 + (p**2).sum(axis=1))
    res, _ = residual(sol)

    ring = sol.disc.boundary_ring
    core = ~ring
    max_ring = float(s1[ring].max()) if ring.any() else float("nan")
    max_core = float(s1[core].max()) if core.any() else max_ring
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(s1 > 0, np.log(np.where(s1 > 0, s1, 1.0)), -np.inf) \
            - constants.N * np.log(nu)
    argmax = int(np.argmax(q))
    return EstimateReport(
        sigma=sol.sigma,
        eps=sol.eps_boundary,
        min_nu_up=float(nu.min()),
        min_kappa=float(spectra[:, 0].min()),
        max_S1_interior=max_core,
        max_S1_boundary_ring=max_ring,
        ratio=max_core / (1.0 + max_ring),
        q_argmax_location="boundary" if ring[argmax] else "interior",
        residual_linf=float(np.abs(res).max()),
        newton_iters=sol.newton_iters,
    )
