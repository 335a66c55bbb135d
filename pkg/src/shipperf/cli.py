"""Command-line front end: ``shipperf <command> [options]``.

Every command reads an optional ``runconfig/1`` JSON file, derives all
random seeds from one root seed and writes its artifacts into ``--out``.
Exit status is 0 when all outputs were written, 1 on data or model errors
and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import mlmodel
from .calmwater import CalmWaterModel
from .core import KNOT, EnvironmentState, VesselParticulars
from .data import (
    FilterPolicy,
    SyntheticScenario,
    default_vessel,
    derive_seed,
    filter_steady_state,
    generate,
    ingest_csv,
    write_csv,
)
from .errors import SchemaError, ShipPerfError, TrainingDivergedError
from .evaluation import (
    benchmark,
    binned_mape,
    fit_calm_from_records,
    kfold_evaluate,
    metrics,
    predict_power,
    write_benchmark_csv,
    write_benchmark_svg,
    write_binned_csv,
    write_binned_svg,
    write_mape_matrix_csv,
)
from .waves import default_registry, get_theory, polar_sweep, write_polar_csv
from .wind import WindSetup, load_fujiwara, load_kitamura

log = logging.getLogger("shipperf")

RUNCONFIG_SCHEMA = "runconfig/1"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Settings shared by all commands. Paths are relative to the config file."""

    seed: int = 0
    vessel: VesselParticulars = field(default_factory=default_vessel)
    kitamura_file: str | None = None
    fujiwara_file: str | None = None
    response_function_files: list[str] = field(default_factory=list)
    wind_form: str = "printed"
    laden_draft_threshold: float = 9.0
    filter: FilterPolicy = field(default_factory=FilterPolicy)
    calm_theory: str = "kreitner-directional"
    breakpoints: int = 1
    delta_kn: float = 0.5
    calm_hs_max: float = 1.0
    train: mlmodel.TrainConfig = field(default_factory=mlmodel.TrainConfig)
    k_folds: int = 5
    n_bins: int = 12
    theories: list[str] | None = None
    conventional_mape: bool = False
    scenario_file: str | None = None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from None
        return cls.from_dict(d, path.parent)

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "RunConfig":
        if d.get("schema") != RUNCONFIG_SCHEMA:
            raise ConfigError(f"expected schema {RUNCONFIG_SCHEMA!r}, got {d.get('schema')!r}")
        known = {f.name for f in fields(cls)} | {"schema", "vessel_file"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = {k: v for k, v in d.items() if k not in ("schema", "vessel_file", "vessel", "filter", "train")}

        def resolve(p):
            q = (base / p) if not Path(p).is_absolute() else Path(p)
            if not q.exists():
                raise ConfigError(f"referenced file does not exist: {q}")
            return str(q)

        try:
            if "vessel_file" in d:
                kw["vessel"] = VesselParticulars(**json.loads(Path(resolve(d["vessel_file"])).read_text()))
            elif "vessel" in d:
                kw["vessel"] = VesselParticulars(**d["vessel"])
            if "filter" in d:
                kw["filter"] = FilterPolicy(**d["filter"])
            if "train" in d:
                kw["train"] = mlmodel.TrainConfig(**d["train"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        for key in ("kitamura_file", "fujiwara_file", "scenario_file"):
            if kw.get(key):
                kw[key] = resolve(kw[key])
        kw["response_function_files"] = [resolve(p) for p in kw.get("response_function_files", [])]
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    def to_dict(self) -> dict:
        return {"schema": RUNCONFIG_SCHEMA, **asdict(self)}

    # -- derived objects --
    def registry(self):
        return default_registry(extra_files=self.response_function_files)

    def wind(self) -> WindSetup:
        coeffs = load_kitamura(self.vessel.ship_type, self.kitamura_file)
        consts = load_fujiwara(self.fujiwara_file) if self.fujiwara_file else None
        return WindSetup.build(self.vessel, self.laden_draft_threshold, coeffs, consts, form=self.wind_form)

    def theory_list(self):
        reg = self.registry()
        names = self.theories if self.theories is not None else list(reg)
        return [get_theory(n, reg) for n in names]


# --- helpers ------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_records(path, cfg: RunConfig, filtered: bool = True):
    records, report = ingest_csv(path)
    if len(report):
        log.warning("%d rows rejected on ingestion:\n%s", len(report), report.to_text().rstrip())
    if filtered:
        records, counts = filter_steady_state(records, cfg.filter)
        dropped = {k: v for k, v in counts.items() if v}
        if dropped:
            log.info("steady-state filter dropped %s", dropped)
    return records, report


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _mode(args) -> str:
    return "strict" if args.strict_validity else "flag"


# --- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    path = args.scenario or cfg.scenario_file
    scenario = SyntheticScenario.load(path) if path else SyntheticScenario()
    if args.n is not None:
        scenario = SyntheticScenario.from_dict({**scenario.to_dict(), "n_records": args.n})
    if args.seed is not None or args.config:
        scenario = SyntheticScenario.from_dict({**scenario.to_dict(), "seed": derive_seed(cfg.seed, "generate")})
    out = _out_dir(args)
    records = generate(scenario)
    write_csv(records, out / "voyage.csv")
    scenario.save(out / "scenario.json")
    print(f"wrote {len(records)} records to {out / 'voyage.csv'}")
    return 0


def cmd_fit_calm(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    records, _ = _read_records(args.voyage_csv, cfg)
    theory = get_theory(cfg.calm_theory, cfg.registry())
    res = fit_calm_from_records(
        records, cfg.vessel, cfg.wind(), theory, k=cfg.breakpoints,
        delta=cfg.delta_kn * KNOT, hs_max=cfg.calm_hs_max, mode=_mode(args),
    )
    res.model.save(out / "calm_model.json")
    diag = {
        "n_records": len(records),
        "n_calm_weather": res.n_calm,
        "n_dropped_nonpositive": res.diagnostics.n_dropped,
        "n_out_of_validity": res.n_out_of_validity,
        "residual_sse": res.diagnostics.residual_sse,
        "effective_exponents": res.diagnostics.effective_exponents,
        "breakpoints_kn": [b.speed / KNOT for b in res.model.breakpoints],
        "theory": theory.name,
    }
    _write_json(diag, out / "calm_fit.json")
    for b in res.model.breakpoints:
        print(f"breakpoint {b.speed / KNOT:.3f} kn")
    print("exponents " + " -> ".join(f"{e:.3f}" for e in res.diagnostics.effective_exponents))
    return 0


def cmd_train_nn(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    records, _ = _read_records(args.voyage_csv, cfg)
    tc = mlmodel.TrainConfig(**{**asdict(cfg.train), "seed": derive_seed(cfg.seed, "train-nn")})
    print(f"training: batch_size={tc.batch_size} learning_rate={tc.learning_rate} epochs={tc.epochs}")

    def trainer(recs):
        m, _ = mlmodel.train(recs, tc)
        return lambda rs: mlmodel.predict(m, rs)

    try:
        kf = kfold_evaluate(records, cfg.k_folds, trainer, derive_seed(cfg.seed, "kfold"), cfg.conventional_mape)
        model, trace = mlmodel.train(records, tc)
    except TrainingDivergedError as exc:
        trace_path = out / "loss_trace.csv"
        _write_rows(trace_path, ["epoch", "loss"], enumerate(exc.loss_trace, 1))
        print(f"error: {exc}; loss trace written to {trace_path}", file=sys.stderr)
        return 1
    mlmodel.save(model, out / "nn_model.json")
    rows = [(i + 1, *_metric_fields(r)) for i, r in enumerate(kf.folds)] + [("mean", *_metric_fields(kf.mean))]
    _write_rows(out / "kfold_report.csv", ["fold", "n", "mae_w", "mape", "mbe_w", "r2"], rows)
    _write_rows(out / "loss_trace.csv", ["epoch", "loss"], enumerate(trace, 1))
    print(f"k-fold ({cfg.k_folds}) mean MAPE {100 * kf.mean.mape:.3f} %")
    return 0


def _metric_fields(r):
    return r.n, repr(r.mae), repr(r.mape), repr(r.mbe), repr(r.r2)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def cmd_benchmark(args) -> int:
    cfg = _load_config(args)
    for p in [args.calm_model, args.nn_model]:
        if p is not None and not Path(p).is_file():
            print(f"error: model file not found: {p}", file=sys.stderr)
            return 1
    theories = cfg.theory_list()
    out = _out_dir(args)
    records, _ = _read_records(args.voyage_csv, cfg)
    calm = CalmWaterModel.load(args.calm_model)
    wind = cfg.wind()
    direct = {}
    nn = None
    if args.nn_model:
        nn = mlmodel.load(args.nn_model)
        direct["nn"] = mlmodel.predict(nn, records)
    if args.strict_validity:
        for t in theories:
            predict_power(records, cfg.vessel, calm, wind, t, mode="strict")
    res = benchmark(records, cfg.vessel, theories, {"fitted-calm": calm}, wind, direct, cfg.conventional_mape)
    write_benchmark_csv(res, out / "benchmark.csv")
    write_mape_matrix_csv(res, out / "mape_matrix.csv")
    write_benchmark_svg(res, out / "benchmark.svg")

    # binned error of the configured physics pipeline (and the network)
    actual = np.array([r.brake_power for r in records])
    phys, _ = predict_power(records, cfg.vessel, calm, wind, get_theory(cfg.calm_theory, cfg.registry()))
    by = {
        "hs": np.array([r.environment.sig_wave_height for r in records]),
        "wind": np.array([r.environment.wind_speed_rel for r in records]),
    }
    for name, pred in [("physics", phys)] + ([("nn", direct["nn"])] if nn is not None else []):
        for var, values in by.items():
            b = binned_mape(actual, pred, values, cfg.n_bins, cfg.conventional_mape)
            write_binned_csv(b, out / f"binned_{name}_{var}.csv", var)
            write_binned_svg(b, out / f"binned_{name}_{var}.svg", var)
    for row in res.rows:
        cells = ", ".join(
            f"{c}={100 * res.cells[(row, c)].mape:.2f}%" for c in res.columns if (row, c) in res.cells
        )
        print(f"{row}: {cells}")
    return 0


def cmd_polar_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    v = cfg.vessel if cfg.vessel.draft is not None else cfg.vessel.with_draft(args.draft)
    env = EnvironmentState(sig_wave_height=args.hs, wave_peak_period=args.tp)
    rows = polar_sweep(cfg.theory_list(), v, env, args.stw_kn * KNOT, args.step)
    write_polar_csv(rows, out / "polar.csv")
    print(f"wrote {len(rows)} rows to {out / 'polar.csv'}")
    return 0


def cmd_metrics(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    actual, pred = [], []
    with open(args.predictions_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"actual", "predicted"} - set(reader.fieldnames or [])
        if missing:
            raise SchemaError(f"predictions file lacks columns: {', '.join(sorted(missing))}")
        for row in reader:
            actual.append(float(row["actual"]))
            pred.append(float(row["predicted"]))
    rep = metrics(actual, pred, cfg.conventional_mape)
    _write_rows(out / "metrics.csv", ["n", "mae", "mape", "mbe", "r2"], [_metric_fields(rep)])
    print(f"n={rep.n} MAE={rep.mae:.6g} MAPE={100 * rep.mape:.4f}% MBE={rep.mbe:.6g} R2={rep.r2:.6f}")
    return 0


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="runconfig/1 JSON file")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--strict-validity", action="store_true",
                        help="fail instead of flagging records outside a theory's validity range")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="shipperf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic voyage CSV")
    g.add_argument("--scenario", help="scenario/1 JSON file (default scenario if omitted)")
    g.add_argument("-n", type=int, help="override the record count")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit-calm", parents=[common], help="fit the calm-water model")
    f.add_argument("voyage_csv")
    f.set_defaults(func=cmd_fit_calm)

    t = sub.add_parser("train-nn", parents=[common], help="k-fold evaluate and train the network")
    t.add_argument("voyage_csv")
    t.set_defaults(func=cmd_train_nn)

    b = sub.add_parser("benchmark", parents=[common], help="MAPE matrix over wave theories")
    b.add_argument("voyage_csv")
    b.add_argument("--calm-model", required=True, help="calmwater/1 JSON from fit-calm")
    b.add_argument("--nn-model", help="fnn/1 JSON from train-nn")
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("polar-sweep", parents=[common], help="added wave resistance against heading")
    s.add_argument("--hs", type=float, default=3.0, help="significant wave height, m")
    s.add_argument("--tp", type=float, default=9.0, help="peak period, s")
    s.add_argument("--stw-kn", type=float, default=13.0, help="speed through water, kn")
    s.add_argument("--draft", type=float, default=10.0, help="mean draft, m (if the vessel has none)")
    s.add_argument("--step", type=float, default=5.0, help="heading step, deg")
    s.set_defaults(func=cmd_polar_sweep)

    m = sub.add_parser("metrics", parents=[common], help="metrics of a predictions CSV (actual,predicted)")
    m.add_argument("predictions_csv")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ShipPerfError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
