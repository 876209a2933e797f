"""One-step-ahead benchmark runner, data ingestion and report writing."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ARModel, ar_features, ar_predict, blr_update, nmae, pa_regress_update
from .errors import DimensionError, InputError, OrderingError, PMGPError
from .filter import init_state, local_loglik, update
from .gpr import GPRProblem, log_marginal_likelihood
from .kernels import HyperParams, trend_size
from .learner import OnlineForecaster, PAConfig, initial_theta

logger = logging.getLogger(__name__)

__all__ = [
    "SeriesRecord",
    "RunConfig",
    "ModelResult",
    "ingest_csv",
    "estimate_fs",
    "prepare_series",
    "run_pmgp",
    "run_ar",
    "run_benchmark",
    "sweep",
    "forecast_report",
    "loglik_report",
    "theta_from_vector",
    "write_report",
    "write_plot_data",
    "MODEL_NAMES",
]

# name -> (variant, order); "pa-arK" is plain PA
AR_MODELS = {
    f"{prefix}-ar{k}": (variant, k)
    for k in (2, 10)
    for prefix, variant in (("pa", "PA"), ("pa1", "PA-I"), ("pa2", "PA-II"), ("blr", "BLR"))
}
MODEL_NAMES = ("pmgp",) + tuple(AR_MODELS)

TIME_ENCODINGS = ("raw", "first", "steps")
SCORINGS = ("instep", "honest")
VALUE_SCALINGS = ("none", "first", "zscore")


@dataclass(frozen=True)
class SeriesRecord:
    t: float
    y: float


@dataclass(frozen=True)
class RunConfig:
    """Settings for one benchmark run.

    ``time_encoding`` is how file timestamps reach the pM-GP filter:
    ``"raw"`` as given, ``"first"`` shifted to start at zero, ``"steps"``
    shifted and multiplied by the sampling frequency (so ``fs`` becomes 1).
    ``value_scaling`` transforms observations before they reach the filter
    (forecasts are mapped back): ``"first"`` subtracts the first value,
    ``"zscore"`` uses the series mean and standard deviation.  The AR
    baselines always see raw values.

    ``scoring="instep"`` scores the predictive made inside a learning step,
    after the hyperparameters moved to ``theta_k``.  ``"honest"`` scores the
    forecast made under ``theta_{k-1}`` before ``y_k`` is seen.  Both values
    are reported.
    """

    p: int = 2
    n_components: int = 4
    c: float = 100.0
    eps: float = 0.0
    trend: str = "linear"
    fs: float | None = None
    models: tuple[str, ...] = MODEL_NAMES
    time_encoding: str = "raw"
    value_scaling: str = "none"
    scoring: str = "instep"
    learn: bool = True
    record_theta: bool = False
    timings: bool = False
    blr_noise_fraction: float = 0.05
    pa_C: float = 100.0

    def __post_init__(self):
        if self.p < 0 or self.n_components < 1:
            raise InputError("need p >= 0 and at least one component")
        if not self.c > 0 or not self.eps >= 0:
            raise InputError("need c > 0 and eps >= 0")
        if self.fs is not None and not self.fs > 0:
            raise InputError("fs override must be > 0")
        if self.time_encoding not in TIME_ENCODINGS:
            raise InputError(f"time_encoding must be one of {TIME_ENCODINGS}")
        if self.scoring not in SCORINGS:
            raise InputError(f"scoring must be one of {SCORINGS}")
        if self.value_scaling not in VALUE_SCALINGS:
            raise InputError(f"value_scaling must be one of {VALUE_SCALINGS}")
        unknown = set(self.models) - set(MODEL_NAMES)
        if unknown:
            raise InputError(f"unknown models {sorted(unknown)}; known: {list(MODEL_NAMES)}")
        object.__setattr__(self, "models", tuple(self.models))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        return d


@dataclass
class ModelResult:
    model: str
    predictions: np.ndarray
    actuals: np.ndarray
    runtime_ms: float
    extra: dict = field(default_factory=dict)

    def summary(self, timings: bool = False) -> dict:
        score = nmae(self.predictions, self.actuals)
        out = {
            "model": self.model,
            "nmae": round(score.nmae, 10),
            "nmae_std": round(score.std, 10),
            "n_steps": int(score.errors.size),
            "runtime_ms": round(self.runtime_ms, 3) if timings else None,
        }
        out.update(self.extra)
        return out


def ingest_csv(path) -> list[SeriesRecord]:
    """Read a ``t,y`` CSV file with strictly increasing, finite times."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    records: list[SeriesRecord] = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "y"]:
            raise InputError(f"{path}: expected header 't,y', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InputError(f"{path}: row {row_no}: expected 2 fields, got {len(row)}")
            try:
                t, y = float(row[0]), float(row[1])
            except ValueError as exc:
                raise InputError(f"{path}: row {row_no}: {exc}") from exc
            if not (np.isfinite(t) and np.isfinite(y)):
                raise InputError(f"{path}: row {row_no}: non-finite value")
            if records and not t > records[-1].t:
                raise OrderingError(
                    f"{path}: row {row_no}: time {t} does not increase (previous {records[-1].t})"
                )
            records.append(SeriesRecord(t, y))
    return records


def estimate_fs(records, override: float | None = None) -> float:
    """Average sampling frequency from the first (up to) ten gaps."""
    if override is not None:
        if not override > 0:
            raise InputError("fs override must be > 0")
        return float(override)
    if len(records) < 2:
        raise InputError("need at least two records to estimate the sampling frequency")
    t = np.array([r.t for r in records[: min(11, len(records))]])
    return float(1.0 / np.mean(np.diff(t)))


def prepare_series(records, config: RunConfig):
    """Times, values and sampling frequency as seen by the pM-GP filter.

    Returns
    -------
    (ndarray, ndarray, float, float, float)
        Encoded times, scaled values, ``fs`` in encoded time units, and the
        ``shift`` and ``scale`` that map scaled values back.
    """
    t = np.array([r.t for r in records], dtype=float)
    y = np.array([r.y for r in records], dtype=float)
    fs = estimate_fs(records, config.fs)
    if config.time_encoding == "first":
        t = t - t[0]
    elif config.time_encoding == "steps":
        t = (t - t[0]) * fs
        fs = 1.0
    if config.value_scaling == "first":
        shift, scale = y[0], 1.0
    elif config.value_scaling == "zscore":
        shift, scale = float(y.mean()), float(y.std())
        if scale == 0.0:
            scale = 1.0
    else:
        shift, scale = 0.0, 1.0
    return t, (y - shift) / scale, fs, shift, scale


def run_pmgp(records, config: RunConfig) -> ModelResult:
    """pM-GP filter with online hyperparameter learning over the whole series."""
    start = time.perf_counter()
    t, z, fs, shift, scale = prepare_series(records, config)
    theta0 = initial_theta(config.n_components, fs, config.trend)
    model = OnlineForecaster(theta0, config.p, PAConfig(config.c, config.eps), learn=config.learn)
    honest = np.empty(t.size)
    instep = np.empty(t.size)
    trace = []
    state_bytes = None
    for k, (tk, zk) in enumerate(zip(t, z)):
        honest[k] = model.forecast(tk).mean * scale + shift
        pred, rec = model.observe(tk, zk)
        instep[k] = pred.mean * scale + shift
        nbytes = model.state.m.nbytes + model.state.P.nbytes
        if state_bytes is None:
            state_bytes = nbytes
        elif nbytes != state_bytes:
            raise AssertionError("filter state size changed during the run")
        if config.record_theta:
            trace.append([round(float(v), 10) for v in rec.theta])
    actuals = np.array([r.y for r in records])
    scored, other = (instep, honest) if config.scoring == "instep" else (honest, instep)
    other_name = "honest" if config.scoring == "instep" else "instep"
    extra = {
        "fs": fs,
        "scoring": config.scoring,
        f"nmae_{other_name}": round(nmae(other, actuals).nmae, 10),
        "n_theta_updates": int(model.n_updates),
        "state_bytes": int(state_bytes),
        "final_theta": [round(float(v), 10) for v in model.theta.pack()],
    }
    if config.record_theta:
        extra["theta_trace"] = trace
    result = ModelResult("pmgp", scored, actuals, 0.0, extra)
    result.runtime_ms = (time.perf_counter() - start) * 1e3
    return result


def run_ar(records, name: str, config: RunConfig) -> ModelResult:
    """AR(k) baseline on raw values; prediction of y_k uses y_0..y_{k-1}."""
    start = time.perf_counter()
    variant, order = AR_MODELS[name]
    y = np.array([r.y for r in records], dtype=float)
    noise = config.blr_noise_fraction * float(np.std(y, ddof=1)) if y.size > 1 else 1.0
    model = ARModel(order, variant, C=config.pa_C, noise_std=noise if noise > 0 else 1.0)
    update = blr_update if variant == "BLR" else pa_regress_update
    preds = np.zeros(y.size)
    # y_0 only seeds the lag window; its (unscored) forecast is the zero prior
    for k in range(1, y.size):
        x = ar_features(y[:k], order)
        preds[k] = ar_predict(model, x)
        update(model, x, y[k])
    return ModelResult(name, preds, y, (time.perf_counter() - start) * 1e3)


def _run_one(records, name, config) -> ModelResult:
    if name == "pmgp":
        return run_pmgp(records, config)
    return run_ar(records, name, config)


def run_benchmark(records, config: RunConfig, source: str | None = None):
    """Run every configured model; a failing model is reported, not fatal.

    Returns
    -------
    (dict, list[ModelResult])
        JSON-ready report and the per-model results (for plot data).
    """
    if len(records) < 3:
        raise InputError("need at least three records for a benchmark")
    results, summaries = [], []
    for name in config.models:
        try:
            res = _run_one(records, name, config)
        except (PMGPError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("model %s failed: %s", name, exc)
            summaries.append({"model": name, "error": f"{type(exc).__name__}: {exc}"})
            continue
        results.append(res)
        summaries.append(res.summary(config.timings))
    report = {
        "source": source,
        "n_records": len(records),
        "config": config.to_dict(),
        "models": summaries,
    }
    return report, results


def sweep(records, config: RunConfig, param: str, values) -> list[dict]:
    """pM-GP NMAE as a function of ``c`` or ``n_components``."""
    if param not in ("c", "n_components"):
        raise InputError("can only sweep 'c' or 'n_components'")
    rows = []
    for v in values:
        cfg = RunConfig(**{**config.to_dict(), param: v, "models": ("pmgp",)})
        try:
            s = run_pmgp(records, cfg).summary(config.timings)
            rows.append({param: v, "nmae": s["nmae"], "nmae_std": s["nmae_std"]})
        except (PMGPError, ArithmeticError) as exc:
            rows.append({param: v, "error": f"{type(exc).__name__}: {exc}"})
    return rows


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def write_plot_data(results, path) -> None:
    """Tidy CSV of running NMAE curves: ``step,model,running_nmae``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "model", "running_nmae"])
        for res in results:
            curve = nmae(res.predictions, res.actuals).running
            for i, v in enumerate(curve, start=1):
                w.writerow([i, res.model, f"{v:.10g}"])


def theta_from_vector(vec, config: RunConfig) -> HyperParams:
    """Flat hyperparameter vector (trend, log sigma, then log k0/log l/log omega per component)."""
    vec = np.asarray(vec, dtype=float).reshape(-1)
    expected = trend_size(config.trend) + 1 + 3 * config.n_components
    if vec.size != expected:
        raise DimensionError(f"theta has {vec.size} entries, expected {expected}")
    return HyperParams.unpack(vec, config.n_components, config.trend)


def forecast_report(records, config: RunConfig, horizon: int = 1) -> dict:
    """Run pM-GP over the series, then forecast ``horizon`` steps past the end.

    Future times are spaced ``1 / fs`` apart.  Forecasts come from the final
    filter state and do not change it.
    """
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    cfg = RunConfig(**{**config.to_dict(), "models": ("pmgp",)})
    t, z, fs, shift, scale = prepare_series(records, cfg)
    model = OnlineForecaster(
        initial_theta(cfg.n_components, fs, cfg.trend), cfg.p, PAConfig(cfg.c, cfg.eps), cfg.learn
    )
    preds = np.empty(t.size)
    for k, (tk, zk) in enumerate(zip(t, z)):
        honest = model.forecast(tk).mean
        pred, _ = model.observe(tk, zk)
        preds[k] = (pred.mean if cfg.scoring == "instep" else honest) * scale + shift
    ahead = []
    t_file_last = float(records[-1].t)
    fs_file = estimate_fs(records, cfg.fs)
    for h in range(1, horizon + 1):
        f = model.forecast(t[-1] + h / fs)
        ahead.append(
            {
                "t": round(t_file_last + h / fs_file, 10),
                "mean": round(f.mean * scale + shift, 10),
                "var": round(f.var * scale**2, 10),
            }
        )
    score = nmae(preds, np.array([r.y for r in records]))
    return {
        "model": "pmgp",
        "nmae": round(score.nmae, 10),
        "nmae_std": round(score.std, 10),
        "n_steps": int(score.errors.size),
        "fs": fs,
        "n_theta_updates": int(model.n_updates),
        "final_theta": [round(float(v), 10) for v in model.theta.pack()],
        "forecasts": ahead,
        "config": cfg.to_dict(),
    }


def loglik_report(records, config: RunConfig, theta: HyperParams | None = None, exact: bool = False):
    """Log marginal likelihood of the series under fixed hyperparameters.

    The filter value is the sum of one-step log densities.  With ``exact``
    the dense GPR value (cubic cost) is computed as well.
    """
    t, z, fs, _, _ = prepare_series(records, config)
    if theta is None:
        theta = initial_theta(config.n_components, fs, config.trend)
    state = init_state(theta, config.p)
    total = 0.0
    for tk, zk in zip(t, z):
        total += local_loglik(state, tk, zk)
        state, _ = update(state, tk, zk)
    out = {"n": int(t.size), "filter_loglik": total, "theta": [float(v) for v in theta.pack()]}
    if exact:
        prob = GPRProblem(t, z, theta.kernel(config.p), theta.trend_model(), theta.sigma)
        dense = log_marginal_likelihood(prob)
        out["exact_loglik"] = dense
        out["rel_diff"] = abs(total - dense) / max(abs(dense), 1e-300)
    return out
