"""Metrics, weather correction, k-fold evaluation and the theory benchmark."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .calmwater import CalmWaterModel, detect_breakpoints, fit
from .calmwater import predict as calm_predict
from .calmwater import FitDiagnostics
from .core import VesselParticulars, VoyageRecord
from .errors import FoldError, InsufficientDataError, UndefinedMetricError
from .waves import WaveTheory, evaluate_theory
from .wind import WindSetup

log = logging.getLogger(__name__)

BASELINE = "no-weather-correction"
DIRECT = "direct"


# --- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    """Error metrics in watts; ``mape`` is a fraction, not a percentage."""

    mae: float
    mape: float
    mbe: float
    r2: float
    n: int


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def metrics(actual, predicted, conventional: bool = False) -> MetricReport:
    """Compute MAE, MAPE, MBE and R2.

    MAPE divides by the predicted value unless ``conventional`` is set, in
    which case it divides by the actual value. MBE is predicted minus
    actual, so over-prediction is positive. Sums use ``math.fsum`` which
    makes every metric independent of record order.

    Raises:
        ValueError: on empty or unequal-length inputs.
        UndefinedMetricError: when a MAPE denominator is zero or the actual
            values are constant.
    """
    p = [float(x) for x in actual]
    q = [float(x) for x in predicted]
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} actual vs {len(q)} predicted")
    if not p:
        raise ValueError("metrics need at least one value")
    denom = p if conventional else q
    if any(d == 0.0 for d in denom):
        which = "actual" if conventional else "predicted"
        raise UndefinedMetricError(f"MAPE is undefined: a {which} value is zero")
    mean_p = _mean(p)
    ss_tot = math.fsum((a - mean_p) ** 2 for a in p)
    if ss_tot == 0.0:
        raise UndefinedMetricError("R2 is undefined for constant actual values")
    ss_res = math.fsum((a - b) ** 2 for a, b in zip(p, q))
    return MetricReport(
        mae=_mean(abs(a - b) for a, b in zip(p, q)),
        mape=_mean(abs((a - b) / d) for a, b, d in zip(p, q, denom)),
        mbe=_mean(b - a for a, b in zip(p, q)),
        r2=1.0 - ss_res / ss_tot,
        n=len(p),
    )


# --- weather correction -------------------------------------------------------------


@dataclass
class CorrectedData:
    stw: np.ndarray
    draft_mean: np.ndarray
    calm_power: np.ndarray
    n_dropped: int = 0
    n_out_of_validity: int = 0


def _added_resistance(r: VoyageRecord, v: VesselParticulars, wind: WindSetup | None,
                      theory: WaveTheory | None, mode: str) -> tuple[float, bool]:
    env = r.environment
    total = 0.0
    if wind is not None:
        total += wind.resistance(env, r.sog, r.draft_mean)
    valid = True
    if theory is not None and env.sig_wave_height > 0:
        res = evaluate_theory(theory, v.with_draft(r.draft_mean), env, r.stw, mode=mode)
        valid = res.in_validity
        if valid:
            total += res.value
    return total, valid


def weather_correct(
    records: Sequence[VoyageRecord],
    v: VesselParticulars,
    wind: WindSetup | None,
    theory: WaveTheory | None,
    mode: str = "flag",
) -> CorrectedData:
    """Remove wind and wave power from the measured brake power.

    Records whose corrected power is not positive are dropped and counted.
    In ``"flag"`` mode records outside the wave theory's validity sector are
    dropped as well (counted separately) because no trustworthy correction
    exists for them; ``"strict"`` mode raises ValidityError instead.
    """
    stw, draft, calm = [], [], []
    dropped = out = 0
    eta = v.efficiency
    for r in records:
        added, valid = _added_resistance(r, v, wind, theory, mode)
        if not valid:
            out += 1
            continue
        p = r.brake_power - added * r.stw / eta
        if not p > 0:
            dropped += 1
            continue
        stw.append(r.stw)
        draft.append(r.draft_mean)
        calm.append(p)
    if dropped:
        log.info("weather correction dropped %d records with non-positive calm power", dropped)
    return CorrectedData(np.array(stw), np.array(draft), np.array(calm), dropped, out)


def predict_power(
    records: Sequence[VoyageRecord],
    v: VesselParticulars,
    calm: CalmWaterModel,
    wind: WindSetup | None = None,
    theory: WaveTheory | None = None,
    mode: str = "flag",
) -> tuple[np.ndarray, np.ndarray]:
    """Brake power predicted by a calm-water model plus weather corrections.

    Returns the predictions and a boolean mask of records for which the wave
    theory was valid. Out-of-validity records get no wave contribution.
    """
    eta = v.efficiency
    pred = np.empty(len(records))
    valid = np.ones(len(records), bool)
    for i, r in enumerate(records):
        added, ok = _added_resistance(r, v, wind, theory, mode)
        valid[i] = ok
        pred[i] = calm_predict(calm, r.stw, r.draft_mean) + added * r.stw / eta
    return pred, valid


@dataclass
class CalmFit:
    model: CalmWaterModel
    diagnostics: FitDiagnostics
    n_calm: int
    n_out_of_validity: int


def fit_calm_from_records(
    records: Sequence[VoyageRecord],
    v: VesselParticulars,
    wind: WindSetup | None,
    theory: WaveTheory | None,
    k: int = 1,
    delta: float | None = None,
    hs_max: float = 1.0,
    mode: str = "flag",
) -> CalmFit:
    """Weather-correct the calm-weather subset, detect breakpoints and fit."""
    calm_recs = [r for r in records if r.environment.sig_wave_height <= hs_max]
    if not calm_recs:
        raise InsufficientDataError(f"no records with sig_wave_height <= {hs_max} m (of {len(records)})")
    cd = weather_correct(calm_recs, v, wind, theory, mode)
    n = len(cd.stw)
    order = np.argsort(cd.stw, kind="stable")
    kw = {} if delta is None else {"delta": delta}
    try:
        # Segmentation sees only speed, so the draft terms are removed first
        # (mixed laden/ballast drafts otherwise blur the slope change). The
        # draft coefficients come from a fit without breakpoints and are
        # refined once with the detected ones.
        model, diag = fit(cd.stw, cd.draft_mean, cd.calm_power, (), **kw)
        for _ in range(2 if k > 0 else 0):
            lnv = np.log(cd.stw)
            adjusted = cd.calm_power * np.exp(-(model.x3 + model.x4 * lnv) * (cd.draft_mean - cd.draft_mean.mean()))
            bps = detect_breakpoints(cd.stw[order], adjusted[order], k=k)
            model, diag = fit(cd.stw, cd.draft_mean, cd.calm_power, bps, **kw)
    except InsufficientDataError as exc:
        raise InsufficientDataError(f"{n} calm-weather records after correction: {exc}") from None
    diag.n_dropped = cd.n_dropped
    return CalmFit(model, diag, n, cd.n_out_of_validity)


# --- k-fold ----------------------------------------------------------------------


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """Seeded shuffle split into ``k`` folds whose sizes differ by at most one."""
    if k < 2:
        raise FoldError(f"k must be >= 2, got {k}")
    if k > n:
        raise FoldError(f"k={k} exceeds the number of records ({n})")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass
class KFoldResult:
    mean: MetricReport
    folds: list[MetricReport]


Predictor = Callable[[Sequence[VoyageRecord]], np.ndarray]


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean over folds; ``n`` is the total count."""
    return MetricReport(
        mae=_mean(r.mae for r in reports),
        mape=_mean(r.mape for r in reports),
        mbe=_mean(r.mbe for r in reports),
        r2=_mean(r.r2 for r in reports),
        n=sum(r.n for r in reports),
    )


def _fold_metrics(actual, predicted, conventional) -> MetricReport:
    if len(actual) == 1:
        # R2 is undefined on one point; report it as NaN rather than failing LOO
        a, p = float(actual[0]), float(predicted[0])
        if (p if not conventional else a) == 0:
            raise UndefinedMetricError("MAPE is undefined: zero denominator")
        return MetricReport(abs(a - p), abs((a - p) / (a if conventional else p)), p - a, math.nan, 1)
    return metrics(actual, predicted, conventional)


def kfold_evaluate(
    records: Sequence[VoyageRecord],
    k: int,
    trainer: Callable[[Sequence[VoyageRecord]], Predictor],
    seed: int = 0,
    conventional: bool = False,
) -> KFoldResult:
    """Train on k-1 folds and score the held-out fold, for every fold."""
    folds = kfold_indices(len(records), k, seed)
    reports = []
    for i, test in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        predictor = trainer([records[j] for j in train_idx])
        held = [records[j] for j in test]
        pred = np.asarray(predictor(held), float)
        actual = np.array([r.brake_power for r in held])
        reports.append(_fold_metrics(actual, pred, conventional))
        log.info("fold %d/%d: MAPE %.4f", i + 1, k, reports[-1].mape)
    return KFoldResult(aggregate(reports), reports)


# --- benchmark --------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkCell:
    report: MetricReport | None
    n_out_of_validity: int = 0
    flagged: bool = False
    note: str = ""

    @property
    def mape(self) -> float:
        return math.nan if self.report is None else self.report.mape


@dataclass
class BenchmarkResult:
    rows: list[str]
    columns: list[str]
    cells: dict[tuple[str, str], BenchmarkCell] = field(default_factory=dict)

    def cell(self, row: str, column: str) -> BenchmarkCell | None:
        return self.cells.get((row, column))

    def mape_matrix(self) -> np.ndarray:
        out = np.full((len(self.rows), len(self.columns)), math.nan)
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.columns):
                cell = self.cells.get((r, c))
                if cell is not None:
                    out[i, j] = cell.mape
        return out


def benchmark(
    records: Sequence[VoyageRecord],
    v: VesselParticulars,
    theories: Sequence[WaveTheory],
    calm_models: Mapping[str, CalmWaterModel],
    wind: WindSetup | None = None,
    direct: Mapping[str, np.ndarray] | None = None,
    conventional: bool = False,
) -> BenchmarkResult:
    """MAPE (and friends) of every calm-model x wave-theory combination.

    Each row is a calm-water model; columns are the baseline without any
    weather correction followed by one column per wave theory, each combined
    with the wind correction. Records outside a theory's validity sector get
    no wave correction and are counted in the cell; a cell whose records are
    all outside is flagged with no report. ``direct`` adds rows of models
    that predict brake power directly (for instance the network), reported
    in a single ``direct`` column.
    """
    if not theories or not calm_models:
        raise ValueError("benchmark needs at least one theory and one calm model")
    actual = np.array([r.brake_power for r in records])
    columns = [BASELINE] + [t.name for t in theories]
    rows = list(calm_models)
    direct = dict(direct or {})
    if direct:
        columns.append(DIRECT)
        rows += list(direct)
    res = BenchmarkResult(rows, columns)

    calm_pred = {name: np.array([calm_predict(m, r.stw, r.draft_mean) for r in records])
                 for name, m in calm_models.items()}
    eta = v.efficiency
    wind_power = np.zeros(len(records))
    if wind is not None:
        wind_power = np.array([wind.resistance(r.environment, r.sog, r.draft_mean) * r.stw / eta
                               for r in records])
    for name, base in calm_pred.items():
        res.cells[(name, BASELINE)] = BenchmarkCell(metrics(actual, base, conventional))

    for t in theories:
        wave_power = np.zeros(len(records))
        valid = np.ones(len(records), bool)
        for i, r in enumerate(records):
            env = r.environment
            if env.sig_wave_height == 0:
                continue
            out = evaluate_theory(t, v.with_draft(r.draft_mean), env, r.stw, mode="flag")
            valid[i] = out.in_validity
            if out.in_validity:
                wave_power[i] = out.value * r.stw / eta
        n_out = int((~valid).sum())
        for name, base in calm_pred.items():
            if len(records) and n_out == len(records):
                res.cells[(name, t.name)] = BenchmarkCell(
                    None, n_out, True, "all records outside the validity sector"
                )
                continue
            pred = base + wind_power + wave_power
            res.cells[(name, t.name)] = BenchmarkCell(metrics(actual, pred, conventional), n_out)
    for name, pred in direct.items():
        res.cells[(name, DIRECT)] = BenchmarkCell(metrics(actual, np.asarray(pred, float), conventional))
    return res


def write_benchmark_csv(res: BenchmarkResult, path) -> None:
    """Long-format table: one line per cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "column", "n", "n_out_of_validity", "flagged", "mae_w", "mape", "mbe_w", "r2"])
        for row in res.rows:
            for col in res.columns:
                c = res.cells.get((row, col))
                if c is None:
                    continue
                rep = c.report
                vals = ["", "", "", "", ""] if rep is None else [
                    rep.n, repr(rep.mae), repr(rep.mape), repr(rep.mbe), repr(rep.r2)
                ]
                w.writerow([row, col, vals[0], c.n_out_of_validity, int(c.flagged), *vals[1:]])


def write_mape_matrix_csv(res: BenchmarkResult, path) -> None:
    """Wide MAPE matrix (percent); empty where a combination does not apply or is flagged."""
    m = res.mape_matrix()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *res.columns])
        for i, row in enumerate(res.rows):
            w.writerow([row, *("" if math.isnan(x) else f"{100 * x:.6f}" for x in m[i])])


# --- binned error ------------------------------------------------------------


@dataclass(frozen=True)
class BinnedError:
    edges: np.ndarray
    mape: np.ndarray
    std: np.ndarray
    count: np.ndarray


def binned_mape(actual, predicted, by, n_bins: int = 12, conventional: bool = False) -> BinnedError:
    """MAPE in equal-width bins of ``by``; empty bins have NaN MAPE and std."""
    p = np.asarray(actual, float)
    q = np.asarray(predicted, float)
    x = np.asarray(by, float)
    if not (len(p) == len(q) == len(x)):
        raise ValueError("actual, predicted and by must have equal lengths")
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if len(x) == 0:
        edges = np.linspace(0.0, 1.0, n_bins + 1)
        return BinnedError(edges, np.full(n_bins, math.nan), np.full(n_bins, math.nan), np.zeros(n_bins, int))
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    denom = p if conventional else q
    if np.any(denom == 0):
        raise UndefinedMetricError("MAPE is undefined: zero denominator")
    ape = np.abs((p - q) / denom)
    mape = np.full(n_bins, math.nan)
    std = np.full(n_bins, math.nan)
    count = np.bincount(idx, minlength=n_bins)
    for b in range(n_bins):
        sel = ape[idx == b]
        if sel.size:
            mape[b] = math.fsum(sel) / sel.size
            std[b] = float(np.sqrt(math.fsum((sel - mape[b]) ** 2) / sel.size))
    return BinnedError(edges, mape, std, count)


def write_binned_csv(b: BinnedError, path, label: str = "bin") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{label}_lo", f"{label}_hi", "count", "mape", "std"])
        for i in range(len(b.count)):
            w.writerow([repr(float(b.edges[i])), repr(float(b.edges[i + 1])), int(b.count[i]),
                        "" if math.isnan(b.mape[i]) else repr(float(b.mape[i])),
                        "" if math.isnan(b.std[i]) else repr(float(b.std[i]))])


# --- charts ---------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no date stamp keep the SVG byte-identical between runs
    matplotlib.rcParams["svg.hashsalt"] = "shipperf"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def write_benchmark_svg(res: BenchmarkResult, path) -> None:
    plt = _pyplot()
    m = 100 * res.mape_matrix()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.8 / max(len(res.rows), 1)
    xs = np.arange(len(res.columns))
    for i, row in enumerate(res.rows):
        vals = np.nan_to_num(m[i], nan=0.0)
        ax.bar(xs + (i - (len(res.rows) - 1) / 2) * width, vals, width, label=row)
    ax.set_xticks(xs)
    ax.set_xticklabels(res.columns, rotation=30, ha="right")
    ax.set_ylabel("MAPE [%]")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_binned_svg(b: BinnedError, path, xlabel: str = "") -> None:
    plt = _pyplot()
    centers = 0.5 * (b.edges[:-1] + b.edges[1:])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(centers, 100 * b.mape, yerr=100 * b.std, marker="o", capsize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("MAPE [%]")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
