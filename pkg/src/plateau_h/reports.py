"""Verification sweeps, certificate records and run artifact export.

run_verify drives every certificate of the inequality lab over the requested
dimensions with seeded, reproducible sampling and writes verify.json; the
process-level contract is exit 0 iff all certificates pass, with the worst
counterexample serialized for replay when one fails.

export_solution writes the delimited per-node solution table (solution.csv),
the estimate report (report.json) and run metadata (meta.json).  report.json
is byte-identical across reruns of the same config and seed; wall-clock time
lives in meta.json only.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, config_to_dict
from .inequality_lab import (
    DEFAULT_N_CONST,
    boundary_hugging_family,
    claim1_certificate,
    claim1_quadratic,
    claim2_certificate,
    jacobi_constants,
    q_delta_roots,
    sample_k2,
)
from .solver import EstimateReport, GridSolution, _batched_spectra, residual

__all__ = ["CertificateRecord", "VerifyReport", "run_verify", "export_solution",
           "worker_count"]

NONNEG_TOL = -1e-10
CHUNK = 20_000


def worker_count() -> int:
    """Worker cap from PLATEAU_H_THREADS (0 or unset = auto)."""
    raw = os.environ.get("PLATEAU_H_THREADS", "0")
    try:
        val = int(raw)
    except ValueError:
        val = 0
    if val <= 0:
        return min(4, os.cpu_count() or 1)
    return val


def _chunked_min(eval_chunk, arrays, n_total):
    """Evaluate eval_chunk over fixed-size chunks; deterministic in any pool.

    eval_chunk(slice of each array) -> (min_value, argmin_payload).  Chunk
    boundaries are independent of the worker count, so threaded and serial
    runs give identical results.
    """
    bounds = [(lo, min(lo + CHUNK, n_total)) for lo in range(0, n_total, CHUNK)]
    jobs = [tuple(a[lo:hi] for a in arrays) for lo, hi in bounds]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: eval_chunk(*args), jobs))
    else:
        results = [eval_chunk(*args) for args in jobs]
    best = min(results, key=lambda r: r[0])
    return best


@dataclass(frozen=True)
class CertificateRecord:
    name: str
    n: int | None
    samples: int
    min_margin: float
    seed: int
    kind: str                      # 'strict' or 'nonneg'
    passed: bool
    worst: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "name": self.name, "n": self.n, "samples": self.samples,
            "min_margin": self.min_margin, "seed": self.seed,
            "kind": self.kind, "pass": self.passed,
        }
        if self.worst is not None:
            out["worst"] = self.worst
        return out


@dataclass
class VerifyReport:
    seed: int
    n_samples: int
    eps_j_scale: float
    records: list[CertificateRecord] = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_samples": self.n_samples,
            "eps_j_scale": self.eps_j_scale,
            "all_pass": self.all_pass,
            "constants": self.constants,
            "certificates": [r.as_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _record(name, n, samples, min_margin, seed, kind, worst=None) -> CertificateRecord:
    passed = min_margin > 0.0 if kind == "strict" else min_margin >= NONNEG_TOL
    return CertificateRecord(name=name, n=n, samples=samples,
                             min_margin=float(min_margin), seed=seed,
                             kind=kind, passed=bool(passed), worst=worst)


# -- vectorized margin kernels ----------------------------------------------


def _s1_s2(v: np.ndarray):
    s1 = v.sum(axis=1)
    s2 = 0.5 * (s1**2 - (v**2).sum(axis=1))
    return s1, s2


def _sharp1_margins(v):
    n = v.shape[1]
    s1, _ = _s1_s2(v)
    return v[:, -1] + (n - 2) / n * s1


def _sharp2_margins(v):
    n = v.shape[1]
    s1, s2 = _s1_s2(v)
    f = s1[:, None] - v
    rest = f[:, 1:]
    slacks = np.stack([
        f[:, 0] - s2 / s1,
        (n - 1) / n * s1 - f[:, 0],
        rest.min(axis=1) - (1.0 - 1.0 / np.sqrt(2.0)) * s1,
        2.0 * (n - 1) / n * s1 - rest.max(axis=1),
    ], axis=1)
    # scale-relative floor keeps the equality cases honest at float precision
    return slacks.min(axis=1) / np.maximum(1.0, s1)


def _eps_j(v, alpha, beta, scale):
    s1, _ = _s1_s2(v)
    return scale * alpha * (beta + v[:, -1] / s1)


def _qform_random_margins(v, idx, t_raw, delta):
    """Normalized Q values for random constraint-subspace directions."""
    m, n = v.shape
    s1, _ = _s1_s2(v)
    f = s1[:, None] - v
    t = t_raw - (np.einsum("mi,mi->m", f, t_raw) / np.einsum("mi,mi->m", f, f))[:, None] * f
    norm2 = np.einsum("mi,mi->m", t, t)
    norm2 = np.where(norm2 > 0, norm2, 1.0)
    fi = np.take_along_axis(f, idx[:, None], axis=1)[:, 0]
    gamma = 1.0 + delta * fi / s1
    ti = np.take_along_axis(t, idx[:, None], axis=1)[:, 0]
    q = 3.0 * np.einsum("mi,mi->m", t, t) - 2.0 * ti**2 - gamma * t.sum(axis=1) ** 2
    return q / norm2


def _qform_min_eigs(v, idx, delta):
    """Exact worst-case (smallest restricted eigenvalue) per sample, batched."""
    m, n = v.shape
    s1, _ = _s1_s2(v)
    f = s1[:, None] - v
    fi = np.take_along_axis(f, idx[:, None], axis=1)[:, 0]
    gamma = 1.0 + delta * fi / s1
    M = 3.0 * np.eye(n)[None] - gamma[:, None, None] * np.ones((n, n))[None]
    rows = np.arange(m)
    M[rows, idx, idx] -= 2.0
    d = f / np.linalg.norm(f, axis=1)[:, None]
    P = np.eye(n)[None] - d[:, :, None] * d[:, None, :]
    # push the constrained direction far above any true eigenvalue
    B = P @ M @ P + 100.0 * n * d[:, :, None] * d[:, None, :]
    B = 0.5 * (B + np.transpose(B, (0, 2, 1)))
    return np.linalg.eigvalsh(B)[:, 0]


def _tracedet(v, idx, delta):
    m, n = v.shape
    s1, s2 = _s1_s2(v)
    f = s1[:, None] - v
    fi = np.take_along_axis(f, idx[:, None], axis=1)[:, 0]
    df2 = (n - 1) * s1**2 - 2.0 * s2
    ee = 1.0 - fi**2 / df2
    ll = 1.0 - 2.0 * s2 * (n - 1) / df2
    el = 1.0 - (n - 1) * s1 * fi / df2
    gamma = 1.0 + delta * fi / s1
    trace = 6.0 - 2.0 * ee - gamma * ll
    det = 9.0 - 6.0 * ee - 3.0 * gamma * ll + 2.0 * gamma * (ee * ll - el**2)
    return trace, det


def _worst_sample_payload(v, i, value, extra=None) -> dict:
    out = {"kappa": [float(x) for x in v], "i": int(i), "value": float(value)}
    if extra:
        out.update(extra)
    return out


# -- the driver ---------------------------------------------------------------


def run_verify(config: RunConfig) -> VerifyReport:
    """Execute every certificate over config.dims_to_sweep.

    Sampling is reproducible from config.seed; eps_j_scale != 1 injects the
    fault mode that multiplies the Jacobi coefficient (used to probe the
    sharpness of the quadratic-form certificate).
    """
    report = VerifyReport(seed=config.seed, n_samples=config.n_samples,
                          eps_j_scale=config.eps_j_scale)
    root = np.random.SeedSequence(config.seed)
    dims = list(config.dims_to_sweep)
    children = root.spawn(len(dims))
    scale = config.eps_j_scale

    for n, child in zip(dims, children):
        rng = np.random.default_rng(child)
        cst = jacobi_constants(n, N=config.N_constant)
        report.constants[str(n)] = {"alpha": cst.alpha, "beta": cst.beta}
        samples = sample_k2(rng, n, config.n_samples)
        idx = rng.integers(0, n, size=config.n_samples)
        t_raw = rng.standard_normal((config.n_samples, n))
        epsj = _eps_j(samples, cst.alpha, cst.beta, scale)
        delta = 1.0 + epsj

        m1 = _sharp1_margins(samples)
        k = int(np.argmin(m1))
        report.records.append(_record(
            "sharp1", n, config.n_samples, m1.min(), config.seed, "strict",
            worst=None if m1.min() > 0 else _worst_sample_payload(samples[k], -1, m1[k])))

        m2 = _sharp2_margins(samples)
        k = int(np.argmin(m2))
        report.records.append(_record(
            "sharp2", n, config.n_samples, m2.min(), config.seed, "nonneg",
            worst=None if m2.min() >= NONNEG_TOL else _worst_sample_payload(samples[k], -1, m2[k])))

        def q_chunk(vv, ii, tt, dd):
            q = _qform_random_margins(vv, ii, tt, dd)
            j = int(np.argmin(q))
            return float(q[j]), (vv[j], ii[j], tt[j], dd[j])

        qmin, qworst = _chunked_min(q_chunk, (samples, idx, t_raw, delta),
                                    config.n_samples)
        worst = None
        if qmin < NONNEG_TOL:
            vv, ii, tt, dd = qworst
            s1w = vv.sum()
            fw = s1w - vv
            tproj = tt - (fw @ tt) / (fw @ fw) * fw
            worst = _worst_sample_payload(
                vv, ii, qmin, extra={"t": [float(x) for x in tproj],
                                     "delta": float(dd)})
        report.records.append(_record(
            "qform-random-t", n, config.n_samples, qmin, config.seed, "nonneg",
            worst=worst))

        def eig_chunk(vv, ii, dd):
            lam = _qform_min_eigs(vv, ii, dd)
            j = int(np.argmin(lam))
            return float(lam[j]), (vv[j], ii[j], dd[j])

        emin, eworst = _chunked_min(eig_chunk, (samples, idx, delta),
                                    config.n_samples)
        worst = None
        if emin < NONNEG_TOL:
            vv, ii, dd = eworst
            worst = _worst_sample_payload(vv, ii, emin, extra={"delta": float(dd)})
        report.records.append(_record(
            "qform-min-eigenvalue", n, config.n_samples, emin, config.seed,
            "nonneg", worst=worst))

        tr_j, det_j = _tracedet(samples, idx, delta)
        delta_edge = 3.0 * n / (2.0 * (n - 1))
        tr_edge, _ = _tracedet(samples, idx, np.full(config.n_samples, delta_edge))
        report.records.append(_record(
            "trace-at-delta-bound", n, config.n_samples, min(tr_edge.min(), tr_j.min()),
            config.seed, "strict"))
        k = int(np.argmin(det_j))
        report.records.append(_record(
            "det-at-eps-jacobi", n, config.n_samples, det_j.min(), config.seed, "nonneg",
            worst=None if det_j.min() >= NONNEG_TOL else _worst_sample_payload(
                samples[k], idx[k], det_j[k], extra={"delta": float(delta[k])})))

        report.records.append(_record(
            "eps-jacobi-upper-bound", n, config.n_samples,
            7.0 / 24.0 - float(_eps_j(samples, cst.alpha, cst.beta, 1.0).max()),
            config.seed, "strict"))

        # identity cross-checks on a subsample: |Df|^2 and the E/L projections
        sub = samples[: min(len(samples), 10_000)]
        s1, s2 = _s1_s2(sub)
        f = s1[:, None] - sub
        df2_direct = np.einsum("mi,mi->m", f, f)
        dev = np.abs(df2_direct - ((n - 1) * s1**2 - 2 * s2)) / np.maximum(1.0, df2_direct)
        isub = idx[: len(sub)]
        fi = np.take_along_axis(f, isub[:, None], axis=1)[:, 0]
        e_vec = np.eye(n)[isub] - (fi / df2_direct)[:, None] * f
        l_vec = np.ones(n)[None] - (f.sum(axis=1) / df2_direct)[:, None] * f
        ee_dev = np.abs(np.einsum("mi,mi->m", e_vec, e_vec) - (1 - fi**2 / df2_direct))
        ll_dev = np.abs(np.einsum("mi,mi->m", l_vec, l_vec) - (1 - 2 * s2 * (n - 1) / df2_direct))
        el_dev = np.abs(np.einsum("mi,mi->m", e_vec, l_vec) - (1 - (n - 1) * s1 * fi / df2_direct))
        worst_dev = max(dev.max(), ee_dev.max(), ll_dev.max(), el_dev.max())
        report.records.append(_record(
            "projection-identities", n, len(sub), 1e-12 - worst_dev, config.seed, "nonneg"))

        # sharp-1 slack trend on the boundary-hugging family
        fam = boundary_hugging_family(n, np.logspace(-1, -7, 7))
        fam_m = _sharp1_margins(fam)
        trend_ok = bool(np.all(np.diff(fam_m) < 0) and fam_m[-1] < 1e-5 * fam_m[0])
        report.records.append(_record(
            "sharp1-boundary-trend", n, fam.shape[0],
            1.0 if trend_ok else -1.0, config.seed, "strict"))

    # dimension sweeps for the constant certificates
    ns = np.arange(2, 1_000_001, dtype=float)
    root_ = np.sqrt(3.0 * ns**2 + 1.0)
    alpha = (root_ - (ns + 1)) / (3.0 * (ns - 1))
    beta = (root_ - (ns - 1)) / (2.0 * ns)
    a0 = 2.0 / np.sqrt(3.0) - 1.0
    N = config.N_constant
    claim1 = alpha * (beta - (ns - 2) / ns) + a0
    claim2 = alpha * beta - 2.0 / (N * (N - 1.0))
    report.records.append(_record(
        "claim1-margin-sweep", None, ns.size, float(claim1.min()), config.seed, "nonneg"))
    report.records.append(_record(
        "claim1-companion", None, 1, 1e-14 - abs(1.0 - a0 * N), config.seed, "nonneg"))
    report.records.append(_record(
        "claim2-margin-sweep", None, ns.size, float(claim2.min()), config.seed, "strict"))
    b24a = 1.0 / ((1.0 - config.theta) * alpha * beta + a0)
    report.records.append(_record(
        "claim2-discriminant", None, ns.size, float((N - 1.0 - b24a).min()),
        config.seed, "strict"))

    # root identities of the factored quadratic
    ns_small = np.arange(2, 201, dtype=float)
    ym = (ns_small + 1 - np.sqrt(3 * ns_small**2 + 1)) / (2 * ns_small)
    yp = (ns_small + 1 + np.sqrt(3 * ns_small**2 + 1)) / (2 * ns_small)
    q1m = (ns_small - 1) + (2 * ns_small + 2) * ym - 2 * ns_small * ym**2
    q1p = (ns_small - 1) + (2 * ns_small + 2) * yp - 2 * ns_small * yp**2
    resid = max(np.abs(q1m / ns_small).max(), np.abs(q1p / ns_small).max())
    report.records.append(_record(
        "qdelta-root-residual", None, 2 * ns_small.size, 1e-12 - resid,
        config.seed, "nonneg"))

    # eta dominates the negative root of the claim-1 quadratic
    worst_root_gap = np.inf
    worst_quad = np.inf
    for sigma in (0.1, 0.3, 0.5, 0.7, 0.9):
        cst = jacobi_constants(4, sigma=sigma, N=config.N_constant)
        for nu in np.linspace(sigma, 1.0, 25):
            root_neg = (-2 * N / nu - 2 * np.sqrt(N**2 / nu**2 + N * (N - 1))) / (N - 1)
            worst_root_gap = min(worst_root_gap, root_neg - (-cst.eta))
            worst_quad = min(worst_quad, claim1_quadratic(-cst.eta, N, nu))
    report.records.append(_record(
        "eta-root-bracket", None, 125, float(worst_root_gap), config.seed, "strict"))
    report.records.append(_record(
        "claim1-quadratic-at-eta", None, 125, float(worst_quad), config.seed, "nonneg"))
    return report


# -- solution export ----------------------------------------------------------


def export_solution(sol: GridSolution, report: EstimateReport, out_dir,
                    config_echo: dict | None = None,
                    stages: list[EstimateReport] | None = None) -> dict:
    """Write solution.csv, report.json, meta.json (and stages.csv) to out_dir.

    solution.csv has one row per interior node with 12+ significant digits;
    report.json carries the EstimateReport fields and is reproducible byte
    for byte; wall-clock and the run id live in meta.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    disc = sol.disc
    if disc.m_int == 0:
        raise RuntimeError("degenerate discretization: nothing to export")

    U = sol.full_field()
    u, p, H = disc.jets(U)
    spectra = _batched_spectra(u, p, H)
    nu = 1.0 / np.sqrt(1.0 + (p**2).sum(axis=1))
    s1 = spectra.sum(axis=1)
    pts = disc.interior_points
    n = sol.spec.n

    cols = [f"x{d+1}" for d in range(n)] + ["u", "kappa_min", "kappa_max", "S1", "nu_up"]
    body = np.column_stack([pts, u, spectra[:, 0], spectra[:, -1], s1, nu])
    sol_path = out / "solution.csv"
    with sol_path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in body:
            fh.write(",".join(f"{x:.12e}" for x in row) + "\n")

    rep_path = out / "report.json"
    rep_path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True))

    if stages:
        with (out / "stages.csv").open("w") as fh:
            keys = list(stages[0].as_dict().keys())
            fh.write(",".join(keys) + "\n")
            for st in stages:
                d = st.as_dict()
                fh.write(",".join(
                    d[k] if isinstance(d[k], str) else f"{d[k]:.12e}" for k in keys) + "\n")

    echo = config_echo or {}
    run_id = hashlib.sha1(
        (json.dumps(echo, sort_keys=True) + json.dumps(report.as_dict(), sort_keys=True)
         ).encode()).hexdigest()
    meta = {
        "config": echo,
        "run_id": run_id,
        "wall_clock_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "elapsed_hint_s": time.process_time(),
        "interior_nodes": int(disc.m_int),
        "h_grid": disc.h,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return {"solution": str(sol_path), "report": str(rep_path),
            "meta": str(out / "meta.json")}
