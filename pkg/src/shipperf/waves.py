"""Added resistance due to waves.

Closed-form theories (Kreitner, directional Kreitner, STAwave-1) act directly
on the sea state. Response-function theories give the transfer function
R_AW(omega) / zeta_a^2 and are integrated over a Pierson-Moskowitz spectrum.
Their regression constants load from ``rawrf/1`` JSON files; the formula
families the constants plug into are defined here.

Relative wave direction: 0 = head seas, pi = following seas.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import integrate, special

from .core import G, RHO_WATER, EnvironmentState, VesselParticulars, angle_off_bow
from .errors import (
    DomainError,
    InvalidParameterError,
    SchemaError,
    UnknownTheoryError,
    ValidityError,
)
from .quadrature import gauss_kronrod

RAWRF_SCHEMA = "rawrf/1"
HEAD_SECTOR = math.radians(45.0)
# Integration window in units of the peak frequency. The Pierson-Moskowitz
# mass outside it is 1 - exp(-1.25 / 50**4) ~ 2e-7 of m0 (the low side is
# exp(-1.25e4), i.e. zero in double precision).
WINDOW = (0.1, 50.0)
QUAD_RTOL = 1e-4


# --- closed-form theories -------------------------------------------------


def kreitner(v: VesselParticulars, env: EnvironmentState) -> float:
    """Head-sea added resistance 0.64 g Hs^2 Cb rho B^2 / Lpp (N)."""
    h = env.sig_wave_height
    return 0.64 * G * h * h * v.block_coefficient * env.water_density * v.beam**2 / v.length_pp


def kreitner_directional(v: VesselParticulars, env: EnvironmentState) -> float:
    """Kreitner with a cosine heading law; uses L_OA rather than L_pp."""
    h = env.sig_wave_height
    head = 0.64 * G * h * h * v.block_coefficient * env.water_density * v.beam**2 / (3.0 * v.length_overall)
    return head * (2.0 + math.cos(env.wave_dir_rel))


def stawave1(v: VesselParticulars, env: EnvironmentState) -> float:
    """STAwave-1, valid only for waves within 45 deg of the bow."""
    off = angle_off_bow(env.wave_dir_rel)
    if off > HEAD_SECTOR + 1e-12:
        raise ValidityError(f"STAwave-1 needs |alpha_rel| <= 45 deg, got {math.degrees(off):.1f} deg")
    h = env.sig_wave_height
    b = v.beam
    return G * h * h * env.water_density * b * math.sqrt(b / v.bow_waterline_length) / 16.0


# --- spectrum -------------------------------------------------------------


@dataclass(frozen=True)
class WaveSpectrum:
    """Pierson-Moskowitz spectral density S(omega) in m^2 s."""

    h_s: float
    t_p: float

    @property
    def omega_p(self) -> float:
        return 2.0 * math.pi / self.t_p

    def __call__(self, omega):
        w = np.asarray(omega, float)
        wp = self.omega_p
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r = wp / w
            s = (5.0 / 16.0) * self.h_s**2 * r**4 / w * np.exp(-1.25 * r**4)
        s = np.where(w > 0, s, 0.0)
        s = np.nan_to_num(s, nan=0.0, posinf=0.0)
        return float(s) if s.ndim == 0 else s

    def m0(self) -> float:
        """Zeroth moment by adaptive quadrature over (0, inf)."""
        if self.h_s == 0:
            return 0.0
        wp = self.omega_p
        lo, _ = integrate.quad(self, 0.0, wp, epsabs=0.0, epsrel=1e-12, limit=200)
        hi, _ = integrate.quad(self, wp, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
        return lo + hi

    def tail_fraction(self, lo: float, hi: float) -> float:
        """Fraction of m0 outside [lo, hi] (exact, from the closed-form CDF)."""
        wp = self.omega_p
        below = math.exp(-1.25 * (wp / lo) ** 4) if lo > 0 else 0.0
        above = -math.expm1(-1.25 * (wp / hi) ** 4)
        return below + above


def pm_spectrum(h_s: float, t_p: float) -> WaveSpectrum:
    if not t_p > 0:
        raise DomainError("t_p must be > 0")
    if h_s < 0:
        raise DomainError("h_s must be >= 0")
    return WaveSpectrum(float(h_s), float(t_p))


# --- form factor ----------------------------------------------------------


def _check_form_args(e1, c_b, fr):
    if not 0.0 < e1 < math.pi:
        raise InvalidParameterError("e1 must lie in (0, pi)")
    if not 0.0 < c_b < 1.0:
        raise InvalidParameterError("c_b must lie in (0, 1)")
    if fr < 0:
        raise InvalidParameterError("fr must be >= 0")


def heading_weight(alpha: float, e1: float) -> float:
    """Continuous heading function: 0 below pi - E1, rising to 1 at pi."""
    denom = math.cos(math.pi - e1) + 1.0
    if denom == 0.0:
        raise InvalidParameterError("degenerate bow angle: cos(pi - E1) = -1")
    a = abs(math.remainder(alpha, 2.0 * math.pi))
    if a < math.pi - e1:
        return 0.0
    return -(math.cos(a) + 1.0) / denom + 1.0


def form_factor_fixed(alpha_rel: float, e1: float, c_b: float, fr: float) -> float:
    """(0.87/Cb)^((1 + 4 sqrt(Fr)) f(alpha)) with the continuous f.

    ``alpha_rel`` uses the reflection-term convention where pi is the
    direction the bow faces into (head seas).
    """
    _check_form_args(e1, c_b, fr)
    return (0.87 / c_b) ** ((1.0 + 4.0 * math.sqrt(fr)) * heading_weight(alpha_rel, e1))


def form_factor_original(alpha_rel: float, e1: float, c_b: float, fr: float) -> float:
    """Same factor with the uncorrected f = -cos(alpha); jumps at pi - E1."""
    _check_form_args(e1, c_b, fr)
    a = abs(math.remainder(alpha_rel, 2.0 * math.pi))
    f = -math.cos(a) if a >= math.pi - e1 else 0.0
    return (0.87 / c_b) ** ((1.0 + 4.0 * math.sqrt(fr)) * f)


def bow_entrance_angle(v: VesselParticulars) -> float:
    if v.bow_entrance_angle is not None:
        return v.bow_entrance_angle
    return math.atan(v.beam / (2.0 * 0.195 * v.length_pp))


def froude(stw: float, v: VesselParticulars) -> float:
    return stw / math.sqrt(G * v.length_pp)


# --- response functions ---------------------------------------------------

RfCallable = Callable[[np.ndarray, float, float, VesselParticulars, float], np.ndarray]


@dataclass(frozen=True)
class ResponseFunction:
    """R_AW(omega)/zeta_a^2 (N/m^2) as motion + reflection components.

    Each component is called as ``f(omega, alpha_rel, stw, vessel, rho)``
    with ``omega`` an array.
    """

    name: str
    motion: RfCallable
    reflection: RfCallable
    max_off_bow: float = math.pi
    provenance: str = ""

    def __call__(self, omega, alpha_rel, stw, v, rho=RHO_WATER):
        w = np.asarray(omega, float)
        out = self.motion(w, alpha_rel, stw, v, rho) + self.reflection(w, alpha_rel, stw, v, rho)
        return float(out) if out.ndim == 0 else out


def _bessel_ratio(x):
    """pi^2 I1^2 / (pi^2 I1^2 + K1^2), overflow-safe via scaled Bessels."""
    x = np.maximum(np.asarray(x, float), 1e-300)
    i1 = special.ive(1, x)
    k1 = special.kve(1, x)
    num = math.pi**2 * i1 * i1
    return num / (num + k1 * k1 * np.exp(-4.0 * x))


def _need_draft(v: VesselParticulars) -> float:
    if v.draft is None:
        raise DomainError("response-function theories need the vessel draft")
    return v.draft


def _motion_term(w, omega_bar, a1, a2, b1_lo, b1_hi, d1_lo, d1_hi, rho, v):
    low = omega_bar < 1.0
    b1 = np.where(low, b1_lo, b1_hi)
    d1 = np.where(low, d1_lo, d1_hi)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        shape = omega_bar**b1 * np.exp(b1 / d1 * (1.0 - omega_bar**d1))
    shape = np.nan_to_num(shape, nan=0.0, posinf=0.0)
    return 4.0 * rho * G * v.beam**2 / v.length_pp * shape * a1 * a2


def _stawave2(c: Mapping[str, float]) -> tuple[RfCallable, RfCallable]:
    def motion(w, alpha, stw, v, rho):
        fr = froude(stw, v)
        omega_bar = math.sqrt(v.length_pp / G) * v.kyy ** (1 / 3) * fr ** c["fr_exp"] / c["omega_scale"] * w
        a1 = c["a1_coef"] * v.block_coefficient ** c["a1_exp"]
        a2 = fr**1.5 * math.exp(-3.5 * fr)
        return _motion_term(w, omega_bar, a1, a2, c["b1_low"], c["b1_high"], c["d1_low"], c["d1_high"], rho, v)

    def reflection(w, alpha, stw, v, rho):
        t = _need_draft(v)
        k = w * w / G
        f1 = c["f1_a"] * (stw / math.sqrt(t * G)) ** c["f1_b"] + c["f1_c"] * v.block_coefficient ** c["f1_d"]
        return 0.5 * rho * G * v.beam * _bessel_ratio(1.5 * k * t) * f1

    return motion, reflection


def _liu(c: Mapping[str, float]) -> tuple[RfCallable, RfCallable]:
    def motion(w, alpha, stw, v, rho):
        fr = froude(stw, v)
        cb = v.block_coefficient
        omega_bar = (
            math.sqrt(v.length_pp / G) * v.kyy ** (1 / 3) * max(fr, c["fr_floor"]) ** c["fr_exp"]
            / c["omega_scale"] * w
        )
        a1 = c["a1_coef"] * cb ** c["a1_exp"] * (0.87 / cb) ** (1.0 + fr)
        if fr < c["a2_fr_switch"]:
            a2 = c["a2_lin_const"] + c["a2_lin_slope"] * fr
        else:
            a2 = fr**1.5 * math.exp(-3.5 * fr)
        d1_hi = c["d1_high_coef"] * (v.length_pp / v.beam) ** c["d1_high_exp"]
        return _motion_term(w, omega_bar, a1, a2, c["b1_low"], c["b1_high"], c["d1_low"], d1_hi, rho, v)

    def reflection(w, alpha, stw, v, rho):
        t = _need_draft(v)
        fr = froude(stw, v)
        e1 = bow_entrance_angle(v)
        k = w * w / G
        lam = 2.0 * math.pi / k
        # the form factor convention puts head seas at pi
        ff = form_factor_fixed(math.pi - angle_off_bow(alpha), e1, v.block_coefficient, fr)
        return (
            c["reflection_coef"] * 0.5 * rho * G * v.beam * _bessel_ratio(1.5 * k * t) * math.sin(e1) ** 2
            * (1.0 + 5.0 * np.sqrt(v.length_pp / lam) * fr) * ff
        )

    return motion, reflection


FAMILIES: dict[str, Callable[[Mapping[str, float]], tuple[RfCallable, RfCallable]]] = {
    "stawave2": _stawave2,
    "liu": _liu,
}


def load_response_function(path) -> ResponseFunction:
    """Build a response function from a ``rawrf/1`` coefficient file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed response-function file {path}: {exc}") from exc
    return response_function_from_dict(doc)


def response_function_from_dict(doc: dict) -> ResponseFunction:
    if doc.get("schema") != RAWRF_SCHEMA:
        raise SchemaError(f"expected schema {RAWRF_SCHEMA!r}, got {doc.get('schema')!r}")
    family = doc.get("family")
    if family not in FAMILIES:
        raise SchemaError(f"unknown response-function family {family!r}; have {sorted(FAMILIES)}")
    for key in ("theory", "constants", "provenance"):
        if key not in doc:
            raise SchemaError(f"response-function file lacks {key!r}")
    motion, reflection = FAMILIES[family](doc["constants"])
    return ResponseFunction(
        name=doc["theory"],
        motion=motion,
        reflection=reflection,
        max_off_bow=math.radians(doc.get("max_abs_alpha_deg", 180.0)),
        provenance=doc["provenance"],
    )


@dataclass(frozen=True)
class IntegrationInfo:
    abs_error: float
    window: tuple[float, float]
    spectral_tail_fraction: float
    evaluations: int


def mean_added_resistance(
    rf,
    spec: WaveSpectrum,
    alpha_rel: float,
    stw: float,
    v: VesselParticulars,
    rho: float = RHO_WATER,
    full_output: bool = False,
    rtol: float = QUAD_RTOL,
):
    """Mean added resistance 2 * int S(w) rf(w) dw in long-crested seas (N).

    Integrates adaptively over ``WINDOW`` times the peak frequency. With
    ``full_output`` also returns an :class:`IntegrationInfo` whose
    ``spectral_tail_fraction`` bounds the relative truncation error for a
    response function bounded by its values inside the window.
    """
    wp = spec.omega_p
    lo, hi = WINDOW[0] * wp, WINDOW[1] * wp
    tail = spec.tail_fraction(lo, hi)
    if spec.h_s == 0:
        value, info = 0.0, IntegrationInfo(0.0, (lo, hi), tail, 0)
        return (value, info) if full_output else value

    def integrand(w):
        return spec(w) * rf(w, alpha_rel, stw, v, rho)

    res = gauss_kronrod(integrand, lo, hi, rtol=rtol, initial_intervals=8, geometric=True, breakpoints=[wp])
    val, err = res.value, res.abs_error
    value = 2.0 * val
    if full_output:
        return value, IntegrationInfo(2.0 * err, (lo, hi), tail, res.n_eval)
    return value


# --- theory registry ------------------------------------------------------


@dataclass(frozen=True)
class TheoryResult:
    value: float
    in_validity: bool


@dataclass(frozen=True)
class WaveTheory:
    """A named R_AW evaluator with a heading validity sector.

    ``max_off_bow`` is the largest angle off the bow (radians) for which the
    theory is valid.
    """

    name: str
    evaluator: Callable[[VesselParticulars, EnvironmentState, float], float]
    max_off_bow: float = math.pi
    response: ResponseFunction | None = field(default=None, compare=False)

    def is_valid(self, env: EnvironmentState) -> bool:
        return angle_off_bow(env.wave_dir_rel) <= self.max_off_bow + 1e-12


def _closed(fn):
    return lambda v, env, stw: fn(v, env)


def _stawave1_unchecked(v, env, stw):
    h = env.sig_wave_height
    b = v.beam
    return G * h * h * env.water_density * b * math.sqrt(b / v.bow_waterline_length) / 16.0


def theory_from_response(rf: ResponseFunction) -> WaveTheory:
    def evaluator(v, env, stw):
        spec = pm_spectrum(env.sig_wave_height, env.wave_peak_period)
        return mean_added_resistance(rf, spec, env.wave_dir_rel, stw, v, rho=env.water_density)

    return WaveTheory(rf.name, evaluator, rf.max_off_bow, rf)


BUILTIN_THEORIES: dict[str, WaveTheory] = {
    "kreitner": WaveTheory("kreitner", _closed(kreitner), HEAD_SECTOR),
    "kreitner-directional": WaveTheory("kreitner-directional", _closed(kreitner_directional)),
    "stawave1": WaveTheory("stawave1", _stawave1_unchecked, HEAD_SECTOR),
}

PACKAGED_PLUGINS = ("stawave2.json", "liu2016.json")


def packaged_response_functions() -> list[ResponseFunction]:
    """Response functions shipped with the package; missing files are skipped."""
    out = []
    base = resources.files("shipperf.resources")
    for name in PACKAGED_PLUGINS:
        res = base.joinpath(name)
        if res.is_file():
            out.append(response_function_from_dict(json.loads(res.read_text())))
    return out


def default_registry(include_plugins: bool = True, extra_files: Iterable = ()) -> dict[str, WaveTheory]:
    reg = dict(BUILTIN_THEORIES)
    rfs = packaged_response_functions() if include_plugins else []
    rfs += [load_response_function(p) for p in extra_files]
    for rf in rfs:
        reg[rf.name] = theory_from_response(rf)
    return reg


def get_theory(name: str, registry: Mapping[str, WaveTheory] | None = None) -> WaveTheory:
    reg = default_registry() if registry is None else registry
    if name not in reg:
        raise UnknownTheoryError(name, reg)
    return reg[name]


def evaluate_theory(
    t: WaveTheory | str,
    v: VesselParticulars,
    env: EnvironmentState,
    stw: float,
    mode: str = "strict",
    registry: Mapping[str, WaveTheory] | None = None,
) -> TheoryResult:
    """Evaluate a wave theory by object or registered name.

    ``mode="strict"`` raises :class:`ValidityError` outside the validity
    sector; ``mode="flag"`` extrapolates and marks the result.
    """
    if isinstance(t, str):
        t = get_theory(t, registry)
    if mode not in ("strict", "flag"):
        raise ValueError(f"mode must be 'strict' or 'flag', got {mode!r}")
    valid = t.is_valid(env)
    if not valid and mode == "strict":
        raise ValidityError(
            f"{t.name} is valid within {math.degrees(t.max_off_bow):.0f} deg of the bow; "
            f"got {math.degrees(angle_off_bow(env.wave_dir_rel)):.1f} deg"
        )
    return TheoryResult(float(t.evaluator(v, env, stw)), valid)


def polar_sweep(
    theories: Iterable[WaveTheory],
    v: VesselParticulars,
    env: EnvironmentState,
    stw: float,
    step_deg: float = 5.0,
) -> list[tuple[float, str, float]]:
    """R_AW against relative wave direction; out-of-validity points are NaN."""
    rows = []
    angles = np.arange(0.0, 360.0 + 1e-9, step_deg)
    for t in theories:
        for a in angles:
            e = EnvironmentState(
                env.wind_speed_rel, env.wind_dir_rel, env.sig_wave_height, env.wave_peak_period,
                math.radians(a), env.water_density, env.air_density,
            )
            if t.is_valid(e):
                rows.append((float(a), t.name, float(t.evaluator(v, e, stw))))
            else:
                rows.append((float(a), t.name, math.nan))
    return rows


def write_polar_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha_deg", "theory", "r_aw_newtons"])
        for a, name, val in rows:
            w.writerow([f"{a:g}", name, repr(val)])
