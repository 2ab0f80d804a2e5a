"""Simulated-annealing estimation of model parameters from a spectrum.

The objective is the mean squared error between model and data spectra in
dB, after absorbing a free constant dB offset (the detection
normalization is unknown, and a linear model is power-scale-free).

``anneal`` runs Metropolis sampling with geometric cooling and
per-parameter Gaussian proposals whose scales adapt toward a target
acceptance ratio.  When a run converges above the restart threshold, the
start point is re-randomized (up to ``restarts`` times).  The best point
is optionally polished with a Nelder-Mead simplex, which is derivative
free; without it the last two decades of convergence would dominate the
evaluation budget.  Runs are deterministic under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize

from .lowering import Spectrum, spectrum
from .netlist import NetlistAst, compile_netlist

__all__ = [
    "FitConfig",
    "FitResult",
    "objective",
    "anneal",
    "synth_data",
    "SpectrumModel",
    "netlist_model",
    "ccd_model",
]

TWO_PI = 2.0 * math.pi


@dataclass
class FitConfig:
    """Free parameters, bounds, schedule and seed for one fit.

    ``bounds`` maps each free parameter to (lo, hi); ``scales`` are the
    initial proposal standard deviations (default: 5% of the guess or of
    the bound width).  ``circular`` parameters wrap modulo 2 pi instead of
    clipping.  ``t0 = None`` starts at the initial objective value.
    """

    guess: dict[str, float]
    bounds: dict[str, tuple[float, float]]
    scales: dict[str, float] = field(default_factory=dict)
    circular: tuple[str, ...] = ()
    t0: float | None = None
    cooling: float = 0.95
    steps_per_temp: int = 200
    t_stop_frac: float = 1e-6
    seed: int = 0
    restarts: int = 5
    restart_threshold: float = 1e-9
    polish: bool = True
    polish_maxfev: int = 8000

    def __post_init__(self):
        if not self.guess:
            raise ValueError("no free parameters")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ValueError(f"bounds for {name!r} are not well-ordered")
        for name in self.guess:
            if name not in self.bounds:
                raise ValueError(f"missing bounds for {name!r}")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.steps_per_temp < 1:
            raise ValueError("steps_per_temp must be >= 1")
        for name in self.circular:
            if name not in self.guess:
                raise ValueError(f"circular parameter {name!r} is not free")

    def scale_for(self, name: str) -> float:
        if name in self.scales:
            return self.scales[name]
        lo, hi = self.bounds[name]
        base = abs(self.guess[name])
        return 0.05 * (base if base > 0 else (hi - lo))


@dataclass
class FitResult:
    params: dict[str, float]
    objective: float
    trace: np.ndarray       # objective value at every evaluation
    evaluations: int
    converged: bool


class SpectrumModel:
    """Forward model: parameter dict -> dB spectrum on a fixed grid."""

    def __init__(self, fn: Callable[[Mapping[str, float]], np.ndarray],
                 grid: np.ndarray, fixed: Mapping[str, float] | None = None):
        self.fn = fn
        self.grid = np.asarray(grid, dtype=float)
        self.fixed = dict(fixed or {})

    def __call__(self, params: Mapping[str, float]) -> np.ndarray:
        merged = dict(self.fixed)
        merged.update(params)
        return self.fn(merged)


def netlist_model(ast: NetlistAst, monitored_port: int, grid,
                  n_eff: float = 2.85,
                  fixed: Mapping[str, float] | None = None) -> SpectrumModel:
    """Model that recompiles the netlist with the parameters as overrides."""
    grid = np.asarray(grid, dtype=float)

    def fn(params: Mapping[str, float]) -> np.ndarray:
        triple = compile_netlist(ast, overrides=dict(params))
        spec = spectrum(triple, [], grid, monitored_port, n_eff=n_eff, unit="db")
        return spec.power

    return SpectrumModel(fn, grid, fixed)


def ccd_model(monitored_port: int, grid,
              fixed: Mapping[str, float] | None = None) -> SpectrumModel:
    """Model over CcdParams field names, using the closed-form triple."""
    from .ccd import CcdParams, ccd_closed_form

    grid = np.asarray(grid, dtype=float)

    def fn(params: Mapping[str, float]) -> np.ndarray:
        p = CcdParams(**params)
        spec = spectrum(ccd_closed_form(p), [], grid, monitored_port,
                        n_eff=p.n_eff, unit="db")
        return spec.power

    return SpectrumModel(fn, grid, fixed)


def objective(params: Mapping[str, float], data: Spectrum,
              model: SpectrumModel) -> float:
    """Offset-invariant dB mean squared error between model and data."""
    d = data.to_db().power
    if d.size == 0:
        raise ValueError("data spectrum is empty")
    try:
        m = model(params)
    except Exception as exc:
        raise RuntimeError(f"model evaluation failed: {exc}") from exc
    if m.shape != d.shape:
        raise ValueError("model grid does not match data grid")
    r = m - d
    r = r - r.mean()  # free dB offset absorbed in closed form
    value = float(np.mean(r * r))
    if not math.isfinite(value):
        raise RuntimeError("objective is not finite")
    return value


def synth_data(model: SpectrumModel, params: Mapping[str, float],
               noise_db: float = 0.0, seed: int = 0) -> Spectrum:
    """Forward spectrum plus seeded i.i.d. Gaussian dB noise."""
    if noise_db < 0:
        raise ValueError("noise_db must be >= 0")
    db = np.asarray(model(params), dtype=float)
    if noise_db > 0:
        rng = np.random.default_rng(seed)
        db = db + rng.normal(0.0, noise_db, size=db.shape)
    return Spectrum(model.grid, db, "db", reference_power=1.0)


def _clip(cfg: FitConfig, name: str, value: float) -> float:
    if name in cfg.circular:
        lo, hi = cfg.bounds[name]
        v = lo + (value - lo) % (hi - lo) if hi - lo < TWO_PI + 1e-12 else value % TWO_PI
        return v
    lo, hi = cfg.bounds[name]
    return min(max(value, lo), hi)


def anneal(cfg: FitConfig, data: Spectrum, model: SpectrumModel) -> FitResult:
    """Metropolis annealing with adaptive proposal scales and restarts."""
    rng = np.random.default_rng(cfg.seed)
    names = sorted(cfg.guess)
    trace: list[float] = []

    def obj(p: Mapping[str, float]) -> float:
        v = objective(p, data, model)
        trace.append(v)
        return v

    def ladder(start: dict[str, float], start_obj: float, t0: float,
               stop_frac: float, cooling: float, scales: dict[str, float]):
        cur, cur_obj = dict(start), start_obj
        best, best_obj = dict(cur), cur_obj
        temp = t0
        stop = t0 * stop_frac
        steps = max(1, cfg.steps_per_temp // max(1, len(names)))
        while temp > stop:
            for name in names:
                accepted = 0
                for _ in range(steps):
                    cand = dict(cur)
                    cand[name] = _clip(cfg, name,
                                       cur[name] + rng.normal(0.0, scales[name]))
                    v = obj(cand)
                    if v <= cur_obj or rng.random() < math.exp(
                            -min((v - cur_obj) / temp, 700.0)):
                        cur, cur_obj = cand, v
                        accepted += 1
                        if v < best_obj:
                            best, best_obj = dict(cand), v
                ratio = accepted / steps
                if ratio > 0.6:
                    scales[name] = min(scales[name] * 1.7,
                                       10.0 * cfg.scale_for(name))
                elif ratio < 0.2:
                    scales[name] = max(scales[name] * 0.6,
                                       1e-16 * cfg.scale_for(name))
            temp *= cooling
        return best, best_obj

    def polish(start: dict[str, float], start_obj: float):
        ref = {k: max(abs(start[k]), 1e-12) for k in names}

        def f(z: np.ndarray) -> float:
            p = dict(start)
            for k, zi in zip(names, z):
                p[k] = _clip(cfg, k, float(zi) * ref[k])
            return obj(p)

        z0 = np.array([start[k] / ref[k] for k in names])
        res = minimize(f, z0, method="Nelder-Mead",
                       options=dict(maxfev=cfg.polish_maxfev,
                                    xatol=1e-13, fatol=1e-18))
        p = dict(start)
        for k, zi in zip(names, res.x):
            p[k] = _clip(cfg, k, float(zi) * ref[k])
        v = obj(p)
        if v <= start_obj:
            return p, v
        return dict(start), start_obj

    best: dict[str, float] | None = None
    best_obj = math.inf
    start = {k: _clip(cfg, k, v) for k, v in cfg.guess.items()}
    for round_idx in range(cfg.restarts + 1):
        scales = {k: cfg.scale_for(k) for k in names}
        start_obj = obj(start)
        t0 = cfg.t0 if cfg.t0 is not None else max(start_obj, 1e-30)
        b, bo = ladder(start, start_obj, t0, cfg.t_stop_frac, cfg.cooling, scales)
        if cfg.polish:
            b, bo = polish(b, bo)
        if bo < best_obj:
            best, best_obj = b, bo
        if best_obj <= cfg.restart_threshold:
            break
        # re-randomize within bounds around the original guess
        start = {}
        for k in names:
            lo, hi = cfg.bounds[k]
            g = cfg.guess[k]
            width = cfg.scale_for(k) * 6.0
            start[k] = _clip(cfg, k, g + rng.uniform(-width, width))

    converged = best_obj <= cfg.restart_threshold
    return FitResult(params=best, objective=best_obj,
                     trace=np.asarray(trace), evaluations=len(trace),
                     converged=converged)
