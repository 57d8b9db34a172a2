"""Model fitting for line-cut and recovery-curve data.

Bounded derivative-free least squares: model evaluations pass through
steady-state solves, so gradients are unavailable and a Nelder-Mead simplex
with a mandatory perturbed restart is used instead.  Parameters whose lower
bound is positive (rates, times, widths) are searched in log space for
conditioning.  All randomness flows from explicit seeds; identical inputs
give identical results.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .liouville import rate_batch, rate_steady_populations_batch
from .qdcore import (
    Branch,
    DeviceModel,
    SystemParams,
    cotunneling_rate,
    device_model_from_json,
    device_model_to_json,
    replace_params,
    system_params_from_json,
    system_params_to_json,
)
from .spectro import _observed_transmission, sd_offsets

__all__ = [
    "FitParameter",
    "ModelContext",
    "FitProblem",
    "FitResult",
    "Dataset",
    "BootstrapResult",
    "MODELS",
    "evaluate_model",
    "fit",
    "synth_dataset",
    "bootstrap_uncertainty",
    "fit_problem_to_json",
    "fit_problem_from_json",
    "fit_result_to_json",
    "dataset_to_csv",
    "dataset_from_csv",
]

_XATOL = 1e-8
_MAXFEV = 5000


@dataclass(frozen=True)
class FitParameter:
    """One free parameter: bounds are hard, the initial value must lie
    inside them, and a strictly positive lower bound selects log-space
    search."""

    name: str
    initial: float
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"{self.name}: bounds must satisfy low < high")
        if not self.low <= self.initial <= self.high:
            raise ValueError(f"{self.name}: initial value outside bounds")

    @property
    def log_scale(self) -> bool:
        return self.low > 0


@dataclass(frozen=True)
class ModelContext:
    """Physical configuration shared by all model evaluations of a fit."""

    params: SystemParams
    device: DeviceModel
    sd_nodes: int = 256


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("x and y must be equal-length non-empty 1-d arrays")
        err = self.y_err
        if err is not None:
            err = np.array(err, dtype=float)
            if err.shape != x.shape:
                raise ValueError("y_err must match x")
            if err.min() <= 0:
                raise ValueError("y_err must be > 0")
            err.setflags(write=False)
        for a in (x, y):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_err", err)


@dataclass(frozen=True)
class FitProblem:
    """Dataset plus model selection and the free/fixed parameter split."""

    dataset: Dataset
    model: str
    free: tuple[FitParameter, ...]
    fixed: dict = field(default_factory=dict)
    context: ModelContext | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "free", tuple(self.free))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; "
                             f"available: {sorted(MODELS)}")
        names = [p.name for p in self.free]
        if len(set(names)) != len(names):
            raise ValueError("duplicate free-parameter names")
        overlap = set(names) & set(self.fixed)
        if overlap:
            raise ValueError(f"parameters both free and fixed: {sorted(overlap)}")
        if self.dataset.x.size < len(self.free) + 1:
            raise ValueError("need at least one more data point than free parameters")


@dataclass(frozen=True)
class FitResult:
    values: dict
    rss: float
    uncertainty: dict | None
    converged: bool
    iterations: int

    def __post_init__(self) -> None:
        if self.rss < 0:
            raise ValueError("RSS must be >= 0")


@dataclass(frozen=True)
class BootstrapResult:
    std: dict
    n_resamples: int
    n_failed: int
    seed: int
    method: str = "residual-resampling bootstrap"


# ---------------------------------------------------------------------------
# models

def _model_recovery(x: np.ndarray, v: dict, ctx: ModelContext | None) -> np.ndarray:
    """Saturating exponential a - b*exp(-x/t1)."""
    return v["a"] - v["b"] * np.exp(-x / v["t1"])


def _model_plateau_linecut(x: np.ndarray, v: dict,
                           ctx: ModelContext | None) -> np.ndarray:
    """On-resonance RF intensity against gate voltage along one transition.

    Free parameters by name: t1_spin (s), amplitude (detected counts per
    emitted photon rate), rabi (1/s, usually fixed).  The co-tunneling
    profile comes from the context device, the remaining physics from the
    context params.
    """
    if ctx is None:
        raise ValueError("plateau_linecut requires a ModelContext")
    params = ctx.params
    if "t1_spin" in v:
        params = replace_params(params, t1_spin=v["t1_spin"])
    rabi = v.get("rabi", 1.17e9)
    offsets, weights = sd_offsets(params.sigma_spectral_diffusion, ctx.sd_nodes)
    out = np.empty(x.size)
    zero = np.zeros(1)
    for i, voltage in enumerate(x):
        kappa = cotunneling_rate(ctx.device, float(voltage))
        mats = rate_batch(params, kappa, [(Branch.BLUE, rabi, zero)], offsets)
        pops = rate_steady_populations_batch(mats)
        pbar = weights @ pops
        out[i] = params.gamma_vertical * (params.eta_blue * pbar[2]
                                          + params.eta_red * pbar[3])
    return v.get("amplitude", 1.0) * out


def _model_transmission(x: np.ndarray, v: dict,
                        ctx: ModelContext | None) -> np.ndarray:
    """Observed transmission dip against probe detuning (eV).

    Free parameters by name: beta, sigma_sd (eV); fixed rates come from the
    context params.
    """
    if ctx is None:
        raise ValueError("transmission requires a ModelContext")
    params = ctx.params
    if "sigma_sd" in v:
        params = replace_params(params, sigma_spectral_diffusion=v["sigma_sd"])
    beta = v.get("beta", params.beta_blue)
    return _observed_transmission(np.asarray(x, dtype=float), beta, params)


MODELS = {
    "recovery": _model_recovery,
    "plateau_linecut": _model_plateau_linecut,
    "transmission": _model_transmission,
}


def evaluate_model(problem: FitProblem, values: dict) -> np.ndarray:
    merged = dict(problem.fixed)
    merged.update(values)
    return MODELS[problem.model](problem.dataset.x, merged, problem.context)


# ---------------------------------------------------------------------------
# fitting

def _to_internal(p: FitParameter, value: float) -> float:
    return math.log(value) if p.log_scale else value


def _from_internal(p: FitParameter, u: float) -> float:
    # exp(log(high)) can overshoot by one ulp; bounds are hard
    value = math.exp(u) if p.log_scale else u
    return min(p.high, max(p.low, value))


def _rss(problem: FitProblem, values: dict) -> float:
    resid = problem.dataset.y - evaluate_model(problem, values)
    if problem.dataset.y_err is not None:
        resid = resid / problem.dataset.y_err
    return float(resid @ resid)


def fit(problem: FitProblem) -> FitResult:
    """Minimize the (weighted) residual sum of squares.

    Two Nelder-Mead passes: one from the initial point, one restarted from
    the first pass's optimum with a deterministically perturbed simplex;
    the better end point wins.  Convergence is a simplex spread below 1e-8
    (in log space for positive-bounded parameters) within 5000 evaluations
    per pass.
    """
    free = problem.free
    if not free:
        return FitResult({}, _rss(problem, {}), None, True, 0)

    def unpack(u: np.ndarray) -> dict:
        return {p.name: _from_internal(p, ui) for p, ui in zip(free, u)}

    def objective(u: np.ndarray) -> float:
        return _rss(problem, unpack(u))

    u0 = np.array([_to_internal(p, p.initial) for p in free])
    bounds = [( _to_internal(p, p.low), _to_internal(p, p.high)) for p in free]

    def run(start: np.ndarray, simplex: np.ndarray | None):
        return minimize(objective, start, method="Nelder-Mead", bounds=bounds,
                        options={"xatol": _XATOL, "fatol": math.inf,
                                 "maxfev": _MAXFEV, "initial_simplex": simplex})

    first = run(u0, None)
    # mandatory restart: fresh simplex of 2% internal-scale steps around the
    # first optimum, clipped into bounds
    n = len(free)
    simplex = np.tile(first.x, (n + 1, 1))
    for i in range(n):
        span = bounds[i][1] - bounds[i][0]
        step = 0.02 * (span if math.isfinite(span) else 1.0)
        simplex[i + 1, i] = min(bounds[i][1], max(bounds[i][0],
                                                  simplex[i + 1, i] + step))
        if simplex[i + 1, i] == first.x[i]:
            simplex[i + 1, i] = first.x[i] - step
    second = run(first.x, simplex)
    best = second if second.fun <= first.fun else first

    values = unpack(best.x)
    rss = float(best.fun)
    initial_rss = _rss(problem, {p.name: p.initial for p in free})
    if rss > initial_rss:
        values = {p.name: p.initial for p in free}
        rss = initial_rss
    return FitResult(values, rss, None, bool(best.success),
                     int(first.nfev + second.nfev))


def synth_dataset(model: str, values: dict, x_grid, noise_sigma: float,
                  seed: int, context: ModelContext | None = None) -> Dataset:
    """Model curve with reproducible multiplicative Gaussian noise."""
    if noise_sigma < 0:
        raise ValueError("noise sigma must be >= 0")
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    x = np.asarray(x_grid, dtype=float)
    y = MODELS[model](x, dict(values), context)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        y = y * (1.0 + noise_sigma * rng.standard_normal(y.size))
    meta = {"model": model, "truth": dict(values),
            "noise_sigma": noise_sigma, "seed": seed,
            "noise_model": "multiplicative Gaussian"}
    return Dataset(x, y, None, meta)


def bootstrap_uncertainty(problem: FitProblem, result: FitResult,
                          n_resamples: int = 200, seed: int = 0, *,
                          threads: int = 1) -> BootstrapResult:
    """Residual-resampling bootstrap standard deviations.

    Residuals of the best fit are resampled with replacement onto the model
    curve and each synthetic set is refitted from the best-fit point;
    non-convergent refits are excluded from the statistics and counted.
    """
    if n_resamples < 50:
        raise ValueError("need at least 50 resamples")
    y_model = evaluate_model(problem, result.values)
    residuals = problem.dataset.y - y_model
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, residuals.size, size=(n_resamples, residuals.size))
    free = tuple(replace(p, initial=result.values[p.name]) for p in problem.free)

    def one(i: int) -> tuple[dict, bool]:
        y_star = y_model + residuals[draws[i]]
        ds = Dataset(problem.dataset.x, y_star, problem.dataset.y_err)
        sub = FitProblem(ds, problem.model, free, problem.fixed, problem.context)
        res = fit(sub)
        return res.values, res.converged

    if threads == 1:
        outcomes = [one(i) for i in range(n_resamples)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(n_resamples)))
    kept = [v for v, ok in outcomes if ok]
    n_failed = n_resamples - len(kept)
    if not kept:
        raise ValueError("every bootstrap refit failed to converge")
    std = {p.name: float(np.std([v[p.name] for v in kept], ddof=1))
           for p in problem.free}
    return BootstrapResult(std, n_resamples, n_failed, seed)


# ---------------------------------------------------------------------------
# serialization

def fit_problem_to_json(problem: FitProblem) -> dict:
    ds = problem.dataset
    doc = {
        "model": problem.model,
        "dataset": {"x": ds.x.tolist(), "y": ds.y.tolist(),
                    "y_err": None if ds.y_err is None else ds.y_err.tolist(),
                    "meta": ds.meta},
        "free": [{"name": p.name, "initial": p.initial,
                  "low": p.low, "high": p.high} for p in problem.free],
        "fixed": dict(problem.fixed),
    }
    if problem.context is not None:
        doc["context"] = {
            "parameters": system_params_to_json(problem.context.params),
            "device": device_model_to_json(problem.context.device),
            "sd_nodes": problem.context.sd_nodes,
        }
    return doc


def fit_problem_from_json(doc: dict) -> FitProblem:
    ds = doc["dataset"]
    dataset = Dataset(np.array(ds["x"]), np.array(ds["y"]),
                      None if ds.get("y_err") is None else np.array(ds["y_err"]),
                      ds.get("meta", {}))
    free = tuple(FitParameter(p["name"], p["initial"], p["low"], p["high"])
                 for p in doc.get("free", []))
    context = None
    if "context" in doc:
        c = doc["context"]
        context = ModelContext(system_params_from_json(c["parameters"]),
                               device_model_from_json(c["device"]),
                               c.get("sd_nodes", 256))
    return FitProblem(dataset, doc["model"], free, dict(doc.get("fixed", {})),
                      context)


def fit_result_to_json(result: FitResult,
                       bootstrap: BootstrapResult | None = None) -> dict:
    doc = {"values": dict(result.values), "rss": result.rss,
           "converged": result.converged, "iterations": result.iterations,
           "uncertainty": None if result.uncertainty is None
           else dict(result.uncertainty)}
    if bootstrap is not None:
        doc["uncertainty"] = dict(bootstrap.std)
        doc["uncertainty_method"] = bootstrap.method
        doc["bootstrap"] = {"n_resamples": bootstrap.n_resamples,
                            "n_failed": bootstrap.n_failed,
                            "seed": bootstrap.seed}
    return doc


def dataset_to_csv(dataset: Dataset, path) -> None:
    cols = [dataset.x, dataset.y]
    header = "x,y"
    if dataset.y_err is not None:
        cols.append(dataset.y_err)
        header += ",y_err"
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(c)) for c in row) + "\n")


def dataset_from_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float)
    if header[:2] != ["x", "y"] or data.shape[1] != len(header):
        raise ValueError("expected columns x,y[,y_err]")
    err = data[:, 2] if len(header) == 3 else None
    return Dataset(data[:, 0], data[:, 1], err)
