"""Data-driven calm-water speed-power model.

The model is a log-linear power law with a draft term and a speed dependent
exponent::

    ln P = ln x1 + x2 ln V + x3 T + x4 T ln V
           + sum_j x5_j (ln V - ln Bp_j) Vd_j(V)

where ``Vd_j`` is a tanh step of width ``delta`` centred on breakpoint
``Bp_j``. Breakpoints come from binary segmentation of the speed-sorted
(ln V, ln P) signal with a piecewise straight-line cost.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import KNOT
from .errors import (
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
    OrderingError,
    SchemaError,
)

SCHEMA = "calmwater/1"
DEFAULT_DELTA = 0.5 * KNOT


@dataclass(frozen=True)
class Breakpoint:
    speed: float
    x5: float


@dataclass(frozen=True)
class CalmWaterModel:
    ln_x1: float
    x2: float
    x3: float = 0.0
    x4: float = 0.0
    breakpoints: tuple[Breakpoint, ...] = ()
    smoothing_delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not self.smoothing_delta > 0:
            raise InvalidParameterError("smoothing_delta must be > 0")
        bps = tuple(b if isinstance(b, Breakpoint) else Breakpoint(**b) for b in self.breakpoints)
        speeds = [b.speed for b in bps]
        if any(b >= a for a, b in zip(speeds[1:], speeds[:-1])):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["breakpoints"] = [asdict(b) for b in self.breakpoints]
        return {"schema": SCHEMA, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "CalmWaterModel":
        if d.get("schema") != SCHEMA:
            raise SchemaError(f"expected schema {SCHEMA!r}, got {d.get('schema')!r}")
        fields = {k: v for k, v in d.items() if k != "schema"}
        fields["breakpoints"] = tuple(Breakpoint(**b) for b in fields.get("breakpoints", ()))
        return cls(**fields)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CalmWaterModel":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed calm-water model file: {exc}") from exc
        return cls.from_dict(d)


@dataclass
class FitDiagnostics:
    n_points: int
    residual_sse: float
    effective_exponents: list[float] = field(default_factory=list)
    n_dropped: int = 0


def smooth_dummy(v, bp: float, delta: float):
    """Smooth step 0.5 * (1 + tanh((v - bp) / delta))."""
    if not delta > 0:
        raise InvalidParameterError("delta must be > 0")
    return 0.5 * (1.0 + np.tanh((np.asarray(v, dtype=float) - bp) / delta))


# --- breakpoint detection -------------------------------------------------


class _LineCost:
    """O(1) straight-line least-squares SSE for any index range via prefix sums."""

    def __init__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        # centring keeps the prefix-sum differences well conditioned
        x = x - x.mean()
        y = y - y.mean()
        z = np.zeros(1)
        self.n = np.arange(len(x) + 1, dtype=float)
        self.sx = np.concatenate([z, np.cumsum(x)])
        self.sy = np.concatenate([z, np.cumsum(y)])
        self.sxx = np.concatenate([z, np.cumsum(x * x)])
        self.sxy = np.concatenate([z, np.cumsum(x * y)])
        self.syy = np.concatenate([z, np.cumsum(y * y)])

    def __call__(self, start, stop):
        """SSE of the line fit on [start, stop); accepts array arguments."""
        n = self.n[stop] - self.n[start]
        sx = self.sx[stop] - self.sx[start]
        sy = self.sy[stop] - self.sy[start]
        cxx = self.sxx[stop] - self.sxx[start] - sx * sx / n
        cxy = self.sxy[stop] - self.sxy[start] - sx * sy / n
        cyy = self.syy[stop] - self.syy[start] - sy * sy / n
        with np.errstate(divide="ignore", invalid="ignore"):
            sse = np.where(cxx > 0, cyy - cxy * cxy / np.where(cxx > 0, cxx, 1.0), cyy)
        return np.maximum(sse, 0.0)


def _best_split(cost: _LineCost, start: int, stop: int, min_segment: int):
    cand = np.arange(start + min_segment, stop - min_segment + 1)
    if cand.size == 0:
        return None, 0.0
    total = cost(start, stop)
    split_cost = cost(np.full_like(cand, start), cand) + cost(cand, np.full_like(cand, stop))
    i = int(np.argmin(split_cost))
    return int(cand[i]), float(total - split_cost[i])


def binary_segmentation(x, y, k: int, min_segment: int) -> list[int]:
    """Greedy binary segmentation of ``y(x)`` into straight-line pieces.

    Returns the sorted split indices ``t`` (a split at ``t`` separates
    ``[.., t)`` from ``[t, ..)``). Each step splits the segment whose best
    split gives the largest drop in summed squared residuals.
    """
    n = len(x)
    cost = _LineCost(x, y)
    segments = [(0, n)]
    splits: list[int] = []
    cache: dict[tuple[int, int], tuple[int | None, float]] = {}
    for _ in range(k):
        best = None
        for seg in segments:
            if seg not in cache:
                cache[seg] = _best_split(cost, seg[0], seg[1], min_segment)
            t, gain = cache[seg]
            if t is not None and (best is None or gain > best[2]):
                best = (seg, t, gain)
        if best is None:
            raise InsufficientDataError(
                f"cannot place {k} breakpoints with min_segment={min_segment} on {n} points"
            )
        seg, t, _ = best
        segments.remove(seg)
        segments += [(seg[0], t), (t, seg[1])]
        splits.append(t)
    return sorted(splits)


def detect_breakpoints(speed, power, k: int = 1, min_segment: int | None = None) -> list[float]:
    """Locate ``k`` speeds where the log speed-power slope changes.

    Args:
        speed: ascending speeds (m/s).
        power: powers (W) matching ``speed``.
        k: number of breakpoints.
        min_segment: minimum points per segment; defaults to 10% of the data.

    Returns:
        Breakpoint speeds (m/s), each the midpoint between the two samples
        straddling a split.
    """
    v = np.asarray(speed, float)
    p = np.asarray(power, float)
    n = len(v)
    if min_segment is None:
        min_segment = max(3, n // 10)
    if n < (k + 1) * min_segment:
        raise InsufficientDataError(
            f"{n} points is too few for {k} breakpoints with min_segment={min_segment}"
        )
    if np.any(np.diff(v) < 0):
        raise OrderingError("records must be sorted ascending by speed")
    if np.any(v <= 0) or np.any(p <= 0):
        raise DomainError("speeds and powers must be positive")
    splits = binary_segmentation(np.log(v), np.log(p), k, min_segment)
    return [0.5 * (v[t - 1] + v[t]) for t in splits]


# --- regression -----------------------------------------------------------


def _design(lnv, draft, v, breakpoints: Sequence[float], delta: float):
    cols = [np.ones_like(lnv), lnv, draft, lnv * draft]
    for bp in breakpoints:
        cols.append((lnv - math.log(bp)) * smooth_dummy(v, bp, delta))
    return np.column_stack(cols)


def _column_names(nbp: int) -> list[str]:
    return ["ln_x1", "x2", "x3", "x4"] + [f"x5[{j}]" for j in range(nbp)]


def _collinear_columns(a: np.ndarray, names: list[str]) -> list[str]:
    scale = np.linalg.norm(a, axis=0)
    scale[scale == 0] = 1.0
    _, s, vt = np.linalg.svd(a / scale, full_matrices=False)
    tol = s[0] * max(a.shape) * 1e-10
    null = vt[s <= tol]
    if null.size == 0:
        return []
    weight = np.abs(null).max(axis=0)
    return [nm for nm, w in zip(names, weight) if w > 1e-6]


def fit(
    stw,
    draft_mean,
    calm_power,
    breakpoints: Sequence[float] = (),
    delta: float = DEFAULT_DELTA,
) -> tuple[CalmWaterModel, FitDiagnostics]:
    """Ordinary least squares fit of the calm-water model in log space."""
    v = np.asarray(stw, float)
    t = np.asarray(draft_mean, float)
    p = np.asarray(calm_power, float)
    bps = sorted(float(b) for b in breakpoints)
    if not delta > 0:
        raise InvalidParameterError("delta must be > 0")
    if np.any(v <= 0) or np.any(p <= 0):
        raise DomainError("fit needs stw > 0 and calm_power > 0")
    npar = 4 + len(bps)
    if len(v) < npar + 1:
        raise InsufficientDataError(f"need at least {npar + 1} points, got {len(v)}")
    lnv = np.log(v)
    a = _design(lnv, t, v, bps, delta)
    names = _column_names(len(bps))
    bad = _collinear_columns(a, names)
    if bad:
        raise DegenerateFitError(f"rank-deficient design; collinear columns: {', '.join(bad)}", bad)
    y = np.log(p)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    model = CalmWaterModel(
        ln_x1=float(coef[0]),
        x2=float(coef[1]),
        x3=float(coef[2]),
        x4=float(coef[3]),
        breakpoints=tuple(Breakpoint(b, float(c)) for b, c in zip(bps, coef[4:])),
        smoothing_delta=delta,
    )
    base = model.x2 + model.x4 * float(t.mean())
    exps = [base]
    for bp in model.breakpoints:
        exps.append(exps[-1] + bp.x5)
    return model, FitDiagnostics(len(v), float(resid @ resid), exps)


def log_predictor(m: CalmWaterModel, stw, draft_mean):
    v = np.asarray(stw, float)
    if np.any(v <= 0):
        raise DomainError("predict needs stw > 0")
    t = np.asarray(draft_mean, float)
    lnv = np.log(v)
    out = m.ln_x1 + m.x2 * lnv + m.x3 * t + m.x4 * lnv * t
    for bp in m.breakpoints:
        out = out + bp.x5 * (lnv - math.log(bp.speed)) * smooth_dummy(v, bp.speed, m.smoothing_delta)
    return out


def predict(m: CalmWaterModel, stw, draft_mean):
    """Calm-water brake power (W); scalar in, float out."""
    out = np.exp(log_predictor(m, stw, draft_mean))
    return float(out) if out.ndim == 0 else out
