"""Added resistance due to wind.

The wind force coefficient follows Fujiwara's component structure::

    C_AA(t) = C_LF cos t + C_XLI (sin t - 0.5 sin t cos^3 t) + C_ALF sin t cos^3 t

with separate regressions for the sub-coefficients ahead of and abaft the
beam. The geometric inputs of those regressions (lateral area, bridge
height, ...) are estimated from L_OA and B with ship-type specific
Kitamura-style formulas ``lhs(P) = rhs(a, b, c)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Mapping

import numpy as np

from .core import EnvironmentState, VesselParticulars
from .errors import IncompleteCoefficientsError, InvalidParameterError, SchemaError

logger = logging.getLogger(__name__)

KITAMURA_SCHEMA = "kitamura/1"
FUJIWARA_SCHEMA = "fujiwara/1"
PARAMETERS = ("A_XV", "A_YV", "A_OD", "C_MC", "H_BR", "H_C")
SHIP_TYPES = ("bulk", "tanker", "container", "chemical")

# lhs form -> divisor of P
_LHS: dict[str, Callable[[float, float], float]] = {
    "P": lambda l, b: 1.0,
    "P/L_OA": lambda l, b: l,
    "P/B": lambda l, b: b,
    "P/L_OA^2": lambda l, b: l * l,
    "P/(L_OA*B)": lambda l, b: l * b,
    "P/B^2": lambda l, b: b * b,
}
_RHS: dict[str, Callable[[float, float, float, float, float], float]] = {
    "aB+bL_OA+c": lambda a, b_, c, l, b: a * b + b_ * l + c,
    "aB+c": lambda a, b_, c, l, b: a * b + c,
    "bL_OA+c": lambda a, b_, c, l, b: b_ * l + c,
}


@dataclass(frozen=True)
class KitamuraEntry:
    lhs_form: str
    rhs_form: str
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.lhs_form not in _LHS:
            raise SchemaError(f"unknown lhs_form {self.lhs_form!r}")
        if self.rhs_form not in _RHS:
            raise SchemaError(f"unknown rhs_form {self.rhs_form!r}")

    def solve(self, l_oa: float, b: float) -> float:
        rhs = _RHS[self.rhs_form](self.a, self.b, self.c, l_oa, b)
        return _LHS[self.lhs_form](l_oa, b) * rhs


@dataclass(frozen=True)
class KitamuraCoefficients:
    ship_type: str
    entries: Mapping[str, KitamuraEntry]
    provenance: str = ""


def load_kitamura(ship_type: str, path=None) -> KitamuraCoefficients:
    """Load one ship type from a ``kitamura/1`` coefficient file.

    Without ``path`` the packaged file is used.
    """
    doc = _read_json(path, "kitamura.json")
    if doc.get("schema") != KITAMURA_SCHEMA:
        raise SchemaError(f"expected schema {KITAMURA_SCHEMA!r}, got {doc.get('schema')!r}")
    types = doc.get("ship_types", {})
    if ship_type not in types:
        raise SchemaError(f"ship type {ship_type!r} not in coefficient file; have {sorted(types)}")
    entries = {name: KitamuraEntry(**spec) for name, spec in types[ship_type].items()}
    return KitamuraCoefficients(ship_type, entries, doc.get("provenance", ""))


@dataclass(frozen=True)
class FujiwaraParams:
    """Geometric inputs of the wind coefficient regressions (m, m^2)."""

    l_oa: float
    b: float
    a_xv: float
    a_yv: float
    a_od: float
    c_mc: float
    h_br: float
    h_c: float
    ship_type: str = "bulk"
    clamped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        for name in ("l_oa", "b", "a_xv", "a_yv", "a_od", "c_mc", "h_br", "h_c"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")

    def ratios(self) -> dict[str, float]:
        L, B = self.l_oa, self.b

        def div(x, y):
            return x / y if y > 0 else 0.0

        return {
            "const": 1.0,
            "A_YV/(L_OA*B)": div(self.a_yv, L * B),
            "C_MC/L_OA": div(self.c_mc, L),
            "A_YV/(L_OA*H_BR)": div(self.a_yv, L * self.h_br),
            "A_XV/(B*H_BR)": div(self.a_xv, B * self.h_br),
            "A_OD/A_YV": div(self.a_od, self.a_yv),
            "B/L_OA": div(B, L),
            "H_C/L_OA": div(self.h_c, L),
            "A_OD/L_OA^2": div(self.a_od, L * L),
            "A_XV/B^2": div(self.a_xv, B * B),
            "A_XV/A_YV": div(self.a_xv, self.a_yv),
        }


def estimate_fujiwara_params(l_oa: float, b: float, coeffs: KitamuraCoefficients) -> FujiwaraParams:
    """Solve every Fujiwara input from its Kitamura-style regression."""
    if not (l_oa > 0 and b > 0):
        raise InvalidParameterError("l_oa and b must be positive")
    values = {}
    clamped = []
    for name in PARAMETERS:
        if name not in coeffs.entries:
            raise IncompleteCoefficientsError(name, coeffs.ship_type)
        value = coeffs.entries[name].solve(l_oa, b)
        if value < 0:
            logger.warning("estimated %s = %.4g < 0 for %s; clamped to 0", name, value, coeffs.ship_type)
            clamped.append(name)
            value = 0.0
        values[name] = value
    return FujiwaraParams(
        l_oa=l_oa,
        b=b,
        a_xv=values["A_XV"],
        a_yv=values["A_YV"],
        a_od=values["A_OD"],
        c_mc=values["C_MC"],
        h_br=values["H_BR"],
        h_c=values["H_C"],
        ship_type=coeffs.ship_type,
        clamped=tuple(clamped),
    )


@dataclass(frozen=True)
class FujiwaraConstants:
    """Regression constants per sector; each sub-coefficient maps ratio name -> weight."""

    head: Mapping[str, Mapping[str, float]]
    stern: Mapping[str, Mapping[str, float]]
    provenance: str = ""


def load_fujiwara(path=None) -> FujiwaraConstants:
    doc = _read_json(path, "fujiwara.json")
    if doc.get("schema") != FUJIWARA_SCHEMA:
        raise SchemaError(f"expected schema {FUJIWARA_SCHEMA!r}, got {doc.get('schema')!r}")
    for sector in ("head", "stern"):
        missing = {"C_LF", "C_XLI", "C_ALF"} - set(doc.get(sector, {}))
        if missing:
            raise SchemaError(f"{sector} sector lacks {sorted(missing)}")
    return FujiwaraConstants(doc["head"], doc["stern"], doc.get("provenance", ""))


def _sub_coefficients(sector: Mapping[str, Mapping[str, float]], ratios: dict[str, float]):
    out = []
    for name in ("C_LF", "C_XLI", "C_ALF"):
        terms = sector[name]
        try:
            out.append(sum(w * ratios[r] for r, w in terms.items()))
        except KeyError as exc:
            raise SchemaError(f"unknown regression term {exc.args[0]!r} in {name}") from None
    return np.array(out)


FORMS = ("printed", "iso15016")


def wind_coefficient(
    theta_rel: float,
    p: FujiwaraParams,
    constants: FujiwaraConstants | None = None,
    blend: float = math.radians(5.0),
    form: str = "printed",
) -> float:
    """Wind resistance coefficient C_AA at relative wind angle ``theta_rel``.

    The head- and stern-sector sub-coefficients are blended linearly over
    ``90 deg +- blend`` so the curve has no jump at beam wind.

    ``form="printed"`` evaluates the component sum exactly as written in the
    module docstring. ``form="iso15016"`` uses the standard's cross-force
    term ``C_XLI (sin t - 0.5 sin t cos^2 t) sin t cos t``, which vanishes at
    beam wind.
    """
    if form not in FORMS:
        raise InvalidParameterError(f"form must be one of {FORMS}, got {form!r}")
    if constants is None:
        constants = default_fujiwara()
    t = abs(math.remainder(theta_rel, 2.0 * math.pi))
    ratios = p.ratios()
    half = 0.5 * math.pi
    if blend > 0:
        w = min(max((t - (half - blend)) / (2.0 * blend), 0.0), 1.0)
    else:
        w = 1.0 if t > half else 0.0
    c = np.zeros(3)
    if w < 1.0:
        c += (1.0 - w) * _sub_coefficients(constants.head, ratios)
    if w > 0.0:
        c += w * _sub_coefficients(constants.stern, ratios)
    c_lf, c_xli, c_alf = c
    s, co = math.sin(t), math.cos(t)
    co3 = co**3
    if form == "iso15016":
        cross = (s - 0.5 * s * co * co) * s * co
    else:
        cross = s - 0.5 * s * co3
    return float(c_lf * co + c_xli * cross + c_alf * s * co3)


@dataclass(frozen=True)
class WindCoefficientTable:
    """C_AA sampled on [0, pi]; linear interpolation, mirrored about the centreline."""

    angles: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        a = np.asarray(self.angles, float)
        if len(a) < 2 or a[0] != 0.0 or not math.isclose(a[-1], math.pi) or np.any(np.diff(a) <= 0):
            raise InvalidParameterError("angle grid must increase from 0 to pi inclusive")
        if len(self.values) != len(a):
            raise InvalidParameterError("angles and values differ in length")
        if not self.values[0] > 0:
            raise InvalidParameterError("C_AA(0) must be positive")
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_v", np.asarray(self.values, float))

    @classmethod
    def from_params(
        cls,
        p: FujiwaraParams,
        constants: FujiwaraConstants | None = None,
        resolution: float = math.radians(1.0),
        form: str = "printed",
    ) -> "WindCoefficientTable":
        n = int(round(math.pi / resolution)) + 1
        grid = np.linspace(0.0, math.pi, n)
        return cls(tuple(grid), tuple(wind_coefficient(t, p, constants, form=form) for t in grid))

    def __call__(self, theta):
        t = np.abs(np.remainder(np.asarray(theta, float) + math.pi, 2.0 * math.pi) - math.pi)
        out = np.interp(t, self._a, self._v)
        return float(out) if out.ndim == 0 else out


def added_wind_resistance(
    env: EnvironmentState, sog: float, a_xv: float, coeffs: WindCoefficientTable
) -> float:
    """Wind resistance relative to the still-air resistance at ``sog`` (N).

    Negative for following winds: the ship is pushed along.
    """
    if not a_xv > 0:
        raise InvalidParameterError("a_xv must be positive")
    q = 0.5 * env.air_density * a_xv
    return q * coeffs(env.wind_dir_rel) * env.wind_speed_rel**2 - q * coeffs(0.0) * sog**2


@dataclass(frozen=True)
class WindSetup:
    """Laden and ballast coefficient tables for one vessel."""

    vessel: VesselParticulars
    laden: WindCoefficientTable
    ballast: WindCoefficientTable
    laden_draft_threshold: float

    @classmethod
    def build(
        cls,
        vessel: VesselParticulars,
        laden_draft_threshold: float,
        coeffs: KitamuraCoefficients | None = None,
        constants: FujiwaraConstants | None = None,
        form: str = "printed",
    ) -> "WindSetup":
        if coeffs is None:
            coeffs = load_kitamura(vessel.ship_type)
        p = estimate_fujiwara_params(vessel.length_overall, vessel.beam, coeffs)
        laden = WindCoefficientTable.from_params(
            replace(p, a_xv=vessel.transverse_area_laden), constants, form=form
        )
        ballast = WindCoefficientTable.from_params(
            replace(p, a_xv=vessel.transverse_area_ballast), constants, form=form
        )
        return cls(vessel, laden, ballast, laden_draft_threshold)

    def resistance(self, env: EnvironmentState, sog: float, draft_mean: float) -> float:
        if draft_mean >= self.laden_draft_threshold:
            return added_wind_resistance(env, sog, self.vessel.transverse_area_laden, self.laden)
        return added_wind_resistance(env, sog, self.vessel.transverse_area_ballast, self.ballast)


_DEFAULT_FUJIWARA: FujiwaraConstants | None = None


def default_fujiwara() -> FujiwaraConstants:
    global _DEFAULT_FUJIWARA
    if _DEFAULT_FUJIWARA is None:
        _DEFAULT_FUJIWARA = load_fujiwara()
    return _DEFAULT_FUJIWARA


def _read_json(path, packaged: str) -> dict:
    try:
        if path is None:
            text = resources.files("shipperf.resources").joinpath(packaged).read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed coefficient file: {exc}") from exc
