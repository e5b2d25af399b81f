"""Run configuration: JSON schema, validation and round-trip serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .domain import DomainError, DomainSpec

__all__ = ["RunConfig", "ConfigError", "parse_config", "serialize_config", "config_to_dict"]

MODES = ("solve", "verify", "cap", "report")
DEFAULT_EPS_SCHEDULE = (0.1, 0.03, 0.01, 0.003, 0.001)
DEFAULT_N = 3.0 + 2.0 * math.sqrt(3.0)


class ConfigError(ValueError):
    """Schema violation with the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    domain: DomainSpec | None = None
    sigma: float = 0.6
    eps_schedule: tuple[float, ...] = DEFAULT_EPS_SCHEDULE
    grid_resolution: int = 64
    seed: int = 12345
    output_dir: str = "runs/out"
    n_samples: int = 100_000
    dims_to_sweep: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    N_constant: float = DEFAULT_N
    eps_j_scale: float = 1.0
    theta: float = 0.01


def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def _parse_domain(obj, path="domain") -> DomainSpec:
    _expect(isinstance(obj, dict), path, "must be an object")
    shape = obj.get("shape")
    _expect(shape in ("ball", "ellipse", "annulus"), f"{path}.shape",
            "must be one of 'ball', 'ellipse', 'annulus'")
    n = obj.get("n", 2)
    _expect(isinstance(n, int) and n in (2, 3), f"{path}.n", "must be 2 or 3")
    center = tuple(obj.get("center", (0.0,) * n))
    allow = bool(obj.get("allow_nonconvex", False))
    try:
        if shape == "ball":
            _expect("radius" in obj, f"{path}.radius", "is required for balls")
            return DomainSpec(n=n, shape="ball", radius=float(obj["radius"]),
                              center=center)
        if shape == "ellipse":
            _expect("semi_axes" in obj, f"{path}.semi_axes", "is required for ellipses")
            axes = tuple(float(a) for a in obj["semi_axes"])
            return DomainSpec(n=len(axes), shape="ellipse", semi_axes=axes, center=center)
        _expect("r_inner" in obj and "r_outer" in obj, f"{path}.r_inner",
                "annulus needs r_inner and r_outer")
        return DomainSpec(n=n, shape="annulus", r_inner=float(obj["r_inner"]),
                          r_outer=float(obj["r_outer"]), center=center,
                          allow_nonconvex=allow)
    except DomainError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(document: str) -> RunConfig:
    """Parse and validate a UTF-8 JSON run configuration.

    Fills documented defaults (sigma 0.6, resolution 64, the standard eps
    schedule, N = 3 + 2 sqrt(3)) and rejects out-of-range values with the
    offending field path.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"not valid JSON: {exc}") from None
    _expect(isinstance(obj, dict), "$", "top level must be an object")

    mode = obj.get("mode")
    _expect(mode in MODES, "mode", f"must be one of {MODES}")

    sigma = float(obj.get("sigma", 0.6))
    _expect(0.0 < sigma < 1.0, "sigma",
            "sigma must lie in (0,1): admissible graphs do not exist for sigma >= 1")

    eps_schedule = tuple(float(e) for e in obj.get("eps_schedule", DEFAULT_EPS_SCHEDULE))
    _expect(len(eps_schedule) >= 1, "eps_schedule", "must be non-empty")
    _expect(all(0.0 < e < 0.5 for e in eps_schedule), "eps_schedule",
            "entries must lie in (0, 0.5)")
    _expect(all(b < a for a, b in zip(eps_schedule, eps_schedule[1:])),
            "eps_schedule", "must be strictly decreasing")

    resolution = obj.get("grid_resolution", 64)
    _expect(isinstance(resolution, int) and 16 <= resolution <= 512,
            "grid_resolution", "must be an integer in [16, 512]")

    seed = obj.get("seed", 12345)
    _expect(isinstance(seed, int) and seed >= 0, "seed", "must be a nonnegative integer")

    n_samples = obj.get("n_samples", 100_000)
    _expect(isinstance(n_samples, int) and n_samples >= 1, "n_samples",
            "must be a positive integer")

    dims = tuple(obj.get("dims_to_sweep", (2, 3, 4, 5, 6, 7, 8)))
    _expect(all(isinstance(d, int) and d >= 2 for d in dims) and len(dims) >= 1,
            "dims_to_sweep", "must be integers >= 2")

    N_constant = float(obj.get("N", DEFAULT_N))
    _expect(N_constant > 1.0, "N", "must exceed 1")

    eps_j_scale = float(obj.get("eps_j_scale", 1.0))
    _expect(eps_j_scale > 0.0, "eps_j_scale", "must be positive")

    theta = float(obj.get("theta", 0.01))
    _expect(0.0 < theta < 1.0, "theta", "must lie in (0,1)")

    domain = _parse_domain(obj["domain"]) if "domain" in obj else None
    if mode == "solve":
        _expect(domain is not None, "domain", "is required in solve mode")

    return RunConfig(
        mode=mode, domain=domain, sigma=sigma, eps_schedule=eps_schedule,
        grid_resolution=resolution, seed=seed,
        output_dir=str(obj.get("output_dir", "runs/out")),
        n_samples=n_samples, dims_to_sweep=dims, N_constant=N_constant,
        eps_j_scale=eps_j_scale, theta=theta,
    )


def _domain_to_dict(d: DomainSpec) -> dict:
    out = {"shape": d.shape, "n": d.n, "center": list(d.center)}
    if d.shape == "ball":
        out["radius"] = d.radius
    elif d.shape == "ellipse":
        out["semi_axes"] = list(d.semi_axes)
    else:
        out["r_inner"] = d.r_inner
        out["r_outer"] = d.r_outer
        out["allow_nonconvex"] = d.allow_nonconvex
    return out


def config_to_dict(cfg: RunConfig) -> dict:
    out = {
        "mode": cfg.mode,
        "sigma": cfg.sigma,
        "eps_schedule": list(cfg.eps_schedule),
        "grid_resolution": cfg.grid_resolution,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "n_samples": cfg.n_samples,
        "dims_to_sweep": list(cfg.dims_to_sweep),
        "N": cfg.N_constant,
        "eps_j_scale": cfg.eps_j_scale,
        "theta": cfg.theta,
    }
    if cfg.domain is not None:
        out["domain"] = _domain_to_dict(cfg.domain)
    return out


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
