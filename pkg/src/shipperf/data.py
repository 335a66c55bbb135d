"""Voyage data: CSV ingestion, steady-state filtering and synthetic generation.

CSV layout (``voyage/1``): one row per observation, ISO-8601 UTC timestamps,
speeds in knots, relative directions in degrees (0 = on the bow), wave height
in metres, peak period in seconds, brake power in kW. Values are converted
to SI on ingestion and back on emission.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calmwater import CalmWaterModel
from .calmwater import predict as calm_predict
from .core import (
    DEFAULT_ETA_D,
    DEFAULT_ETA_M,
    KNOT,
    RHO_AIR,
    RHO_WATER,
    EnvironmentState,
    VesselParticulars,
    VoyageRecord,
    knots_to_ms,
    ms_to_knots,
)
from .errors import OrderingError, SchemaError
from .waves import evaluate_theory, get_theory
from .wind import WindSetup, load_kitamura

CSV_SCHEMA = "voyage/1"
SCENARIO_SCHEMA = "scenario/1"

COLUMNS = (
    "timestamp",
    "stw_kn",
    "sog_kn",
    "heading_deg",
    "draft_aft_m",
    "draft_fwd_m",
    "displacement_t",
    "wind_speed_rel_kn",
    "wind_dir_rel_deg",
    "sig_wave_height_m",
    "wave_peak_period_s",
    "wave_dir_rel_deg",
    "brake_power_kw",
)
OPTIONAL_COLUMNS = ("water_density_kgm3", "air_density_kgm3", "water_depth_m")


def derive_seed(root: int, component: str) -> int:
    """Stable per-component seed: first 8 bytes of sha256("root:component")."""
    digest = hashlib.sha256(f"{root}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# --- CSV ---------------------------------------------------------------------


@dataclass
class RejectionReport:
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def add(self, line: int, reason: str) -> None:
        self.rejected.append((line, reason))

    def __len__(self):
        return len(self.rejected)

    def to_text(self) -> str:
        return "".join(f"line {line}: {reason}\n" for line, reason in self.rejected)


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ").replace(".000000Z", "Z")


def _row_to_record(row: dict) -> VoyageRecord:
    """Convert one CSV row; raises ValueError with a human-readable reason."""
    vals = {}
    for col in COLUMNS[1:]:
        raw = (row.get(col) or "").strip()
        if raw == "":
            raise ValueError(f"missing {col}")
        try:
            x = float(raw)
        except ValueError:
            raise ValueError(f"non-numeric {col}: {raw!r}") from None
        if not math.isfinite(x):
            raise ValueError(f"non-finite {col}")
        vals[col] = x
    opt = {}
    for col in OPTIONAL_COLUMNS:
        raw = (row.get(col) or "").strip()
        if raw:
            x = float(raw)
            if not math.isfinite(x):
                raise ValueError(f"non-finite {col}")
            opt[col] = x
    try:
        ts = _parse_timestamp(row.get("timestamp") or "")
    except ValueError:
        raise ValueError(f"bad timestamp {row.get('timestamp')!r}") from None

    checks = [
        (vals["stw_kn"] < 0, "stw < 0"),
        (vals["sog_kn"] < 0, "sog < 0"),
        (vals["draft_aft_m"] <= 0, "draft_aft <= 0"),
        (vals["draft_fwd_m"] <= 0, "draft_fwd <= 0"),
        (vals["wind_speed_rel_kn"] < 0, "wind_speed_rel < 0"),
        (vals["sig_wave_height_m"] < 0, "sig_wave_height < 0"),
        (vals["wave_peak_period_s"] <= 0, "wave_peak_period <= 0"),
        (vals["brake_power_kw"] < 0, "brake_power < 0"),
    ]
    for bad, reason in checks:
        if bad:
            raise ValueError(reason)

    env = EnvironmentState(
        wind_speed_rel=knots_to_ms(vals["wind_speed_rel_kn"]),
        wind_dir_rel=math.radians(vals["wind_dir_rel_deg"]),
        sig_wave_height=vals["sig_wave_height_m"],
        wave_peak_period=vals["wave_peak_period_s"],
        wave_dir_rel=math.radians(vals["wave_dir_rel_deg"]),
        water_density=opt.get("water_density_kgm3", RHO_WATER),
        air_density=opt.get("air_density_kgm3", RHO_AIR),
    )
    return VoyageRecord(
        timestamp=ts,
        stw=knots_to_ms(vals["stw_kn"]),
        sog=knots_to_ms(vals["sog_kn"]),
        heading=math.radians(vals["heading_deg"]),
        draft_aft=vals["draft_aft_m"],
        draft_fwd=vals["draft_fwd_m"],
        displacement=vals["displacement_t"],
        environment=env,
        brake_power=vals["brake_power_kw"] * 1000.0,
        water_depth=opt.get("water_depth_m"),
    )


def ingest_csv(path) -> tuple[list[VoyageRecord], RejectionReport]:
    """Read a ``voyage/1`` CSV file.

    Rows with missing, non-numeric or out-of-range mandatory fields are
    skipped and listed in the report by file line number.
    """
    report = RejectionReport()
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"CSV header lacks columns: {', '.join(missing)}")
        for i, row in enumerate(reader):
            line = i + 2
            try:
                records.append(_row_to_record(row))
            except ValueError as exc:
                report.add(line, str(exc))
    return records, report


def _invert(forward, inverse, y: float, max_ulps: int = 8) -> float:
    """Return x with forward(x) == y exactly when one exists near inverse(y).

    Unit conversions are not exact in binary floating point; picking the
    right neighbour makes emit-then-ingest reproduce the stored value.
    """
    x0 = inverse(y)
    if forward(x0) == y:
        return x0
    up = down = x0
    for _ in range(max_ulps):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        for x in (up, down):
            if forward(x) == y:
                return x
    return x0


def _kn(y: float) -> float:
    return _invert(knots_to_ms, ms_to_knots, float(y))


def _deg(y: float) -> float:
    return _invert(math.radians, math.degrees, float(y))


def _kw(y: float) -> float:
    return _invert(lambda x: x * 1000.0, lambda w: w / 1000.0, float(y))


def write_csv(records: Iterable[VoyageRecord], path) -> None:
    """Write records as ``voyage/1`` CSV (floats in round-trip repr)."""
    def f(x) -> str:
        return repr(float(x))

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS + OPTIONAL_COLUMNS)
        for r in records:
            e = r.environment
            w.writerow([
                _format_timestamp(r.timestamp),
                f(_kn(r.stw)),
                f(_kn(r.sog)),
                f(_deg(r.heading)),
                f(r.draft_aft),
                f(r.draft_fwd),
                f(r.displacement),
                f(_kn(e.wind_speed_rel)),
                f(_deg(e.wind_dir_rel)),
                f(e.sig_wave_height),
                f(e.wave_peak_period),
                f(_deg(e.wave_dir_rel)),
                f(_kw(r.brake_power)),
                f(e.water_density),
                f(e.air_density),
                "" if r.water_depth is None else f(r.water_depth),
            ])


# --- filtering -------------------------------------------------------------------


@dataclass(frozen=True)
class FilterPolicy:
    """Steady-state thresholds; rates are per minute, speeds in m/s."""

    max_acceleration: float = 0.5 * KNOT
    min_water_depth_ratio: float = 3.0
    max_heading_rate: float = math.radians(3.0)
    min_stw: float = 3.0 * KNOT
    calm_weather_hs_max: float = 1.0

    def __post_init__(self):
        for name, val in asdict(self).items():
            if val < 0:
                raise ValueError(f"{name} must be >= 0")


FILTER_CRITERIA = ("min_stw", "water_depth", "acceleration", "heading_rate")


def filter_steady_state(
    records: Sequence[VoyageRecord], p: FilterPolicy = FilterPolicy()
) -> tuple[list[VoyageRecord], dict[str, int]]:
    """Drop records that are not steady-state sailing.

    Rates are measured against the last *kept* record, so every consecutive
    pair in the output satisfies the thresholds and a second pass drops
    nothing.
    """
    counts = dict.fromkeys(FILTER_CRITERIA, 0)
    for a, b in zip(records, records[1:]):
        if b.timestamp < a.timestamp:
            raise OrderingError(f"timestamps not sorted: {b.timestamp} after {a.timestamp}")
    kept: list[VoyageRecord] = []
    for r in records:
        if r.stw < p.min_stw:
            counts["min_stw"] += 1
            continue
        if r.water_depth is not None and r.water_depth < p.min_water_depth_ratio * r.draft_mean:
            counts["water_depth"] += 1
            continue
        if kept:
            prev = kept[-1]
            minutes = (r.timestamp - prev.timestamp).total_seconds() / 60.0
            dv = abs(r.stw - prev.stw)
            dh = abs(math.remainder(r.heading - prev.heading, 2.0 * math.pi))
            if minutes <= 0:
                accel = 0.0 if dv == 0 else math.inf
                turn = 0.0 if dh == 0 else math.inf
            else:
                accel, turn = dv / minutes, dh / minutes
            if accel > p.max_acceleration:
                counts["acceleration"] += 1
                continue
            if turn > p.max_heading_rate:
                counts["heading_rate"] += 1
                continue
        kept.append(r)
    return kept, counts


def calm_subset(records: Iterable[VoyageRecord], hs_max: float = 1.0) -> list[VoyageRecord]:
    return [r for r in records if r.environment.sig_wave_height <= hs_max]


# --- synthetic data ---------------------------------------------------------------


def default_vessel() -> VesselParticulars:
    """Bulk carrier of roughly Handymax size used by the default scenario."""
    return VesselParticulars(
        length_overall=190.0,
        length_pp=183.0,
        beam=32.0,
        block_coefficient=0.7,
        bow_waterline_length=40.0,
        transverse_area_laden=450.0,
        transverse_area_ballast=600.0,
        propulsive_efficiency=DEFAULT_ETA_D,
        mechanical_efficiency=DEFAULT_ETA_M,
        ship_type="bulk",
    )


def default_calm_model() -> CalmWaterModel:
    """Exponent 1.8 below an 11.53 kn breakpoint and 2.8 above (about 6 MW at 13 kn, 10 m)."""
    from .calmwater import Breakpoint

    return CalmWaterModel(
        ln_x1=11.467,
        x2=1.8,
        x3=0.06,
        x4=0.0,
        breakpoints=(Breakpoint(11.53 * KNOT, 1.0),),
        smoothing_delta=0.5 * KNOT,
    )


@dataclass(frozen=True)
class NoiseModel:
    log_power: float = 0.02
    stw: float = 0.0
    wind_speed: float = 0.0
    sig_wave_height: float = 0.0

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise ValueError("noise standard deviations must be >= 0")


@dataclass(frozen=True)
class Sampling:
    """Input distributions. Speeds in knots, drafts in metres."""

    speed_kn: tuple[float, float] = (10.0, 15.0)  # range; uniform unless a mean is given
    speed_mean_kn: float | None = None
    speed_std_kn: float = 1.5
    laden_fraction: float = 0.5
    laden_draft: tuple[float, float] = (11.0, 0.3)  # mean, std
    ballast_draft: tuple[float, float] = (7.5, 0.3)
    trim_std: float = 0.3
    hs_scale: float = 1.2
    hs_max: float = 6.0
    tp_offset: float = 4.5  # T_p = offset + coef * sqrt(H_S) + N(0, std), clipped
    tp_coef: float = 2.5
    tp_std: float = 0.8
    tp_range: tuple[float, float] = (3.0, 16.0)
    wind_scale: float = 6.0  # Rayleigh scale of the relative wind, m/s
    wind_max: float = 25.0
    current_std: float = 0.15  # m/s, sog - stw
    step_minutes: float = 60.0


@dataclass(frozen=True)
class SyntheticScenario:
    n_records: int = 20000
    seed: int = 0
    vessel: VesselParticulars = field(default_factory=default_vessel)
    calm_model: CalmWaterModel = field(default_factory=default_calm_model)
    wave_theory: str = "kreitner-directional"
    laden_draft_threshold: float = 9.0
    wind_form: str = "printed"
    noise: NoiseModel = field(default_factory=NoiseModel)
    sampling: Sampling = field(default_factory=Sampling)
    start: str = "2024-01-01T00:00:00Z"

    def __post_init__(self):
        if self.n_records < 0:
            raise ValueError("n_records must be >= 0")

    def wind_setup(self) -> WindSetup:
        return WindSetup.build(
            self.vessel, self.laden_draft_threshold, load_kitamura(self.vessel.ship_type), form=self.wind_form
        )

    # -- JSON --
    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "n_records": self.n_records,
            "seed": self.seed,
            "vessel": asdict(self.vessel),
            "calm_model": self.calm_model.to_dict(),
            "wave_theory": self.wave_theory,
            "laden_draft_threshold": self.laden_draft_threshold,
            "wind_form": self.wind_form,
            "noise": asdict(self.noise),
            "sampling": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.sampling).items()},
            "start": self.start,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScenario":
        if d.get("schema") != SCENARIO_SCHEMA:
            raise SchemaError(f"expected schema {SCENARIO_SCHEMA!r}, got {d.get('schema')!r}")
        kw = {}
        for key in ("n_records", "seed", "wave_theory", "laden_draft_threshold", "wind_form", "start"):
            if key in d:
                kw[key] = d[key]
        if "vessel" in d:
            kw["vessel"] = VesselParticulars(**d["vessel"])
        if "calm_model" in d:
            kw["calm_model"] = CalmWaterModel.from_dict(d["calm_model"])
        if "noise" in d:
            kw["noise"] = NoiseModel(**d["noise"])
        if "sampling" in d:
            kw["sampling"] = Sampling(
                **{k: tuple(v) if isinstance(v, list) else v for k, v in d["sampling"].items()}
            )
        try:
            return cls(**kw)
        except TypeError as exc:
            raise SchemaError(f"bad scenario: {exc}") from None

    @classmethod
    def load(cls, path) -> "SyntheticScenario":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed scenario file: {exc}") from None
        return cls.from_dict(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _speeds(rng: np.random.Generator, sp: Sampling, n: int) -> np.ndarray:
    lo, hi = sp.speed_kn
    if sp.speed_mean_kn is None:
        return rng.uniform(lo, hi, size=n)
    v = rng.normal(sp.speed_mean_kn, sp.speed_std_kn, n)
    while np.any(bad := (v < lo) | (v > hi)):
        v[bad] = rng.normal(sp.speed_mean_kn, sp.speed_std_kn, int(bad.sum()))
    return v


def generate(s: SyntheticScenario) -> list[VoyageRecord]:
    """Sample a voyage series whose brake power follows the scenario's own model.

    Power is computed from the noiseless inputs as calm-water power plus the
    wind and wave corrections; then multiplicative log-normal noise is
    applied to power and additive Gaussian noise to the recorded sensors.
    """
    n = s.n_records
    if n == 0:
        return []
    rng = np.random.default_rng(s.seed)
    sp = s.sampling
    v = s.vessel
    wind = s.wind_setup()
    theory = get_theory(s.wave_theory)

    stw = _speeds(rng, sp, n) * KNOT
    laden = rng.random(n) < sp.laden_fraction
    draft = np.where(
        laden,
        rng.normal(sp.laden_draft[0], sp.laden_draft[1], n),
        rng.normal(sp.ballast_draft[0], sp.ballast_draft[1], n),
    )
    trim = rng.normal(0.0, sp.trim_std, n)
    sog = np.maximum(stw + rng.normal(0.0, sp.current_std, n), 0.0)
    heading = np.remainder(np.cumsum(rng.normal(0.0, math.radians(10.0), n)), 2 * math.pi)
    hs = rng.exponential(sp.hs_scale, n)
    while np.any(over := hs > sp.hs_max):
        hs[over] = rng.exponential(sp.hs_scale, int(over.sum()))
    tp = np.clip(sp.tp_offset + sp.tp_coef * np.sqrt(hs) + rng.normal(0.0, sp.tp_std, n), *sp.tp_range)
    wave_dir = rng.uniform(0.0, 2 * math.pi, n)
    vw = np.minimum(rng.rayleigh(sp.wind_scale, n), sp.wind_max)
    wind_dir = rng.uniform(0.0, 2 * math.pi, n)
    eps_power = rng.normal(0.0, 1.0, n)
    eps_stw = rng.normal(0.0, 1.0, n)
    eps_wind = rng.normal(0.0, 1.0, n)
    eps_hs = rng.normal(0.0, 1.0, n)

    start = _parse_timestamp(s.start)
    step = timedelta(minutes=sp.step_minutes)
    eta = v.efficiency
    nz = s.noise
    records = []
    for i in range(n):
        d_mean = float(draft[i])
        env = EnvironmentState(float(vw[i]), float(wind_dir[i]), float(hs[i]), float(tp[i]), float(wave_dir[i]))
        r_aa = wind.resistance(env, float(sog[i]), d_mean)
        r_aw = evaluate_theory(theory, v.with_draft(d_mean), env, float(stw[i]), mode="flag").value
        power = calm_predict(s.calm_model, float(stw[i]), d_mean) + (r_aa + r_aw) * float(stw[i]) / eta
        if power <= 0:
            raise ValueError(f"scenario produced non-positive power at record {i}; narrow the weather ranges")
        power *= math.exp(nz.log_power * float(eps_power[i]))
        rec_env = EnvironmentState(
            max(env.wind_speed_rel + nz.wind_speed * float(eps_wind[i]), 0.0),
            env.wind_dir_rel,
            max(env.sig_wave_height + nz.sig_wave_height * float(eps_hs[i]), 0.0),
            env.wave_peak_period,
            env.wave_dir_rel,
        )
        records.append(
            VoyageRecord(
                timestamp=start + i * step,
                stw=max(float(stw[i]) + nz.stw * float(eps_stw[i]), 0.0),
                sog=float(sog[i]),
                heading=float(heading[i]),
                draft_aft=d_mean + 0.5 * float(trim[i]),
                draft_fwd=d_mean - 0.5 * float(trim[i]),
                displacement=v.block_coefficient * v.length_pp * v.beam * d_mean * RHO_WATER / 1000.0,
                environment=rec_env,
                brake_power=power,
            )
        )
    return records
