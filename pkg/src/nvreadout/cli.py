"""Command-line runner: one subcommand per reproducible experiment.

Subcommands and the data set each one produces:

  contrast-sweep        PL contrast of all nine ground-state basis states versus field
  repump                Ramsey visibility and phase versus repump time (one CSV per kind)
  fidelity-map          nuclear process fidelity over (field, pump time)
  phase-susceptibility  analytic excited-state phase susceptibility versus field
  tomography            electron qutrit tomography of the artificial thermal state
  polarization          nuclear polarization after optical pumping versus field
  eslac                 location of the excited-state anti-crossing
  fit                   fit a two-column CSV with one of the curve models
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import analytics as an
from . import engine as en
from . import fitting as ft
from . import nvmodel as nv
from . import sequences as sq
from . import tomography as tm
from .nvmodel import ModelParams, RateTable

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


PARAM_KEYS = {
    "D_gs_MHz": "D_gs", "D_es_MHz": "D_es", "gamma_e_MHz_per_G": "gamma_e",
    "gamma_n_MHz_per_G": "gamma_n", "P_quad_MHz": "P_quad", "A_par_MHz": "A_par",
    "A_perp_MHz": "A_perp", "C_par_MHz": "C_par", "C_perp_MHz": "C_perp", "es_flipflop": "es_flipflop",
}
RATE_KEYS = {f"Gamma{k}_MHz": f"Gamma{k}" for k in range(8)}
RATE_KEYS.update({"T1_gs_us": "T1_gs", "T2_gs_us": "T2_gs", "T1_es_us": "T1_es", "T2_es_us": "T2_es"})
SWEEP_KEYS = {"start_G", "stop_G", "step_G"}


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    rates: RateTable = field(default_factory=RateTable)
    field_G: float = 500.0
    sweep_G: tuple[float, float, float] = (200.0, 800.0, 25.0)
    repump_times_us: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(21))
    theta_count: int = 12
    kinds: tuple[str, ...] = sq.RAMSEY_KINDS
    pump_times_us: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(20))
    pump_us: float = en.INIT_PUMP_US
    relax_us: float = en.RELAX_US
    t2star_us: float | None = None
    T_es_us: float = an.DEFAULT_T_ES
    readout_noise: float = 0.0
    repetitions: int = 50
    seed: int = 0
    state_prep: dict | None = None

    def fields(self) -> np.ndarray:
        start, stop, step = self.sweep_G
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)

    def echo(self) -> dict:
        out = {
            "params": {k: getattr(self.params, v) for k, v in PARAM_KEYS.items()},
            "rates": {k: getattr(self.rates, v) for k, v in RATE_KEYS.items()},
        }
        for f in dataclasses.fields(self):
            if f.name in ("params", "rates"):
                continue
            value = getattr(self, f.name)
            if f.name == "sweep_G":
                value = dict(zip(("start_G", "stop_G", "step_G"), value))
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_SCALARS = {"field_G": float, "theta_count": int, "pump_us": float, "relax_us": float, "T_es_us": float,
            "readout_noise": float, "repetitions": int, "seed": int}
_LISTS = {"repump_times_us": float, "pump_times_us": float, "kinds": str}


def parse_config(data: dict) -> RunConfig:
    """Validate a JSON config; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"params", "rates", "sweep_G", "t2star_us", "state_prep"} | set(_SCALARS) | set(_LISTS)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw: dict[str, Any] = {}
    try:
        if "params" in data:
            bad = set(data["params"]) - set(PARAM_KEYS)
            if bad:
                raise ConfigError(f"unknown params keys: {sorted(bad)}")
            kw["params"] = ModelParams(**{PARAM_KEYS[k]: v for k, v in data["params"].items()})
        if "rates" in data:
            bad = set(data["rates"]) - set(RATE_KEYS)
            if bad:
                raise ConfigError(f"unknown rates keys: {sorted(bad)}")
            kw["rates"] = RateTable(**{RATE_KEYS[k]: float(v) for k, v in data["rates"].items()})
        if "sweep_G" in data:
            sw = data["sweep_G"]
            if set(sw) != SWEEP_KEYS:
                raise ConfigError(f"sweep_G needs exactly {sorted(SWEEP_KEYS)}")
            start, stop, step = float(sw["start_G"]), float(sw["stop_G"]), float(sw["step_G"])
            if step <= 0 or stop < start or start < 0:
                raise ConfigError("sweep needs step > 0 and 0 <= start <= stop")
            kw["sweep_G"] = (start, stop, step)
        for key, typ in _SCALARS.items():
            if key in data:
                kw[key] = typ(data[key])
        for key, typ in _LISTS.items():
            if key in data:
                kw[key] = tuple(typ(v) for v in data[key])
        if "t2star_us" in data:
            kw["t2star_us"] = None if data["t2star_us"] is None else float(data["t2star_us"])
        if "state_prep" in data:
            sq.Sequence.from_dict(data["state_prep"])
            kw["state_prep"] = data["state_prep"]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(**kw)
    if cfg.theta_count < 4:
        raise ConfigError("theta_count must be at least 4")
    if any(k not in sq.RAMSEY_KINDS for k in cfg.kinds):
        raise ConfigError(f"kinds must be drawn from {sq.RAMSEY_KINDS}")
    if any(t < 0 for t in cfg.repump_times_us + cfg.pump_times_us):
        raise ConfigError("times must be non-negative")
    if cfg.readout_noise < 0 or cfg.repetitions < 1:
        raise ConfigError("readout_noise must be >= 0 and repetitions >= 1")
    if cfg.t2star_us is not None and cfg.t2star_us <= 0:
        raise ConfigError("t2star_us must be positive")
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def complex_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _pool_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands: each returns {filename: text}


def state_column(ms: int, mi: int) -> str:
    return f"ms{ms:+d}_mi{mi:+d}"


def cmd_contrast_sweep(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    fields = cfg.fields()
    rows = _pool_map(lambda B: en.all_contrasts(cfg.params, cfg.rates, B), list(fields), threads)
    header = ["field_G"] + [state_column(ms, mi) for ms, mi in nv.GS_BASIS]
    body = [[B] + [c[s] for s in nv.GS_BASIS] for B, c in zip(fields, rows)]
    return {"contrast_sweep.csv": csv_text(header, body)}


def cmd_repump(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    fields = cfg.fields()
    thetas = 2 * np.pi * np.arange(cfg.theta_count) / cfg.theta_count
    out = {}
    for kind in cfg.kinds:
        def run(B, kind=kind):
            return sq.repump_scan(kind, B, cfg.repump_times_us, cfg.params, cfg.rates, thetas,
                                  cfg.t2star_us, cfg.relax_us)
        per_field = _pool_map(run, list(fields), threads)
        rows = [[pt.field_G, pt.repump_us, pt.visibility, pt.phase_rad, pt.fit_residual, pt.converged]
                for pts in per_field for pt in pts]
        out[f"repump_{kind}.csv"] = csv_text(
            ["field_G", "repump_us", "visibility", "phase_rad", "fit_residual", "converged"], rows)
        fringe_rows = [[pt.field_G, pt.repump_us, th, s] for pts in per_field for pt in pts
                       for th, s in zip(thetas, pt.signal)]
        out[f"fringes_{kind}.csv"] = csv_text(["field_G", "repump_us", "theta_rad", "signal"], fringe_rows)
    return out


def cmd_fidelity_map(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    fields = cfg.fields()
    times = np.asarray(cfg.pump_times_us)
    per_field = _pool_map(lambda B: tm.nuclear_fidelity_point_series(B, times, cfg.params, cfg.rates,
                                                                     cfg.relax_us), list(fields), threads)
    rows = []
    for B, (F, F_lin, kept) in zip(fields, per_field):
        for k in np.argsort(times, kind="stable"):
            rows.append([B, times[k], F[k], F_lin[k], kept[k]])
    return {"fidelity_map.csv": csv_text(["field_G", "pump_us", "F", "F_linear", "retained_min"], rows)}


def cmd_phase_susceptibility(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    fields = cfg.fields()
    p, T = cfg.params, cfg.T_es_us
    gamma0 = cfg.rates.Gamma0

    def row(B):
        return [B, an.phase_susceptibility(p, B, T), an.phase_susceptibility(p, B, T, nuclear_frame=True),
                an.phase_susceptibility_per_pump(p, B, gamma0, T),
                an.phase_susceptibility_per_pump(p, B, gamma0, T, nuclear_frame=True)]

    rows = _pool_map(row, list(fields), threads)
    header = ["field_G", "chi_phi", "chi_phi_nuclear_frame", "chi_phi_per_pump_us",
              "chi_phi_nuclear_frame_per_pump_us"]
    return {"phase_susceptibility.csv": csv_text(header, rows)}


def cmd_tomography(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    B = cfg.field_G
    if cfg.state_prep is not None:
        prep = sq.Sequence.from_dict(cfg.state_prep)
    else:
        prep = sq.Sequence("thermal-prep", sq.thermal_prep_segments(), B)
    target = np.eye(3) / 3
    exact = tm.qst_qutrit(B, prep, cfg.params, cfg.rates)
    report = {
        "field_G": B,
        "state_prep": prep.to_dict(),
        "rho": complex_matrix(exact.rho),
        "fidelity_vs_mixed": tm.state_fidelity(exact.rho, target),
        "calibration": {"C_plus": exact.calibration[0], "C_minus": exact.calibration[1]},
        "lambdas": exact.lambdas,
        "readout_noise": cfg.readout_noise,
    }
    if cfg.readout_noise > 0:
        boot = tm.qst_bootstrap(B, prep, cfg.params, cfg.rates, cfg.readout_noise, cfg.repetitions, cfg.seed,
                                target)
        report["noisy"] = {
            "seed": cfg.seed, "repetitions": cfg.repetitions,
            "fidelity_mean": boot["mean"], "fidelity_std": boot["std"],
            "fidelities": boot["fidelities"], "rho_mean": complex_matrix(boot["rho_mean"]),
        }
    return {"tomography.json": json_text(report)}


def cmd_polarization(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    fields = cfg.fields()
    vals = _pool_map(lambda B: en.pump_polarization(cfg.params, cfg.rates, B, cfg.pump_us,
                                                    relax=cfg.relax_us), list(fields), threads)
    return {"polarization.csv": csv_text(["field_G", "polarization"], list(zip(fields, vals)))}


def cmd_eslac(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    p = cfg.params
    report = {}
    for conv in ("spin1", "reduced"):
        pc = p.replace(es_flipflop=conv)
        B = nv.find_eslac(pc)
        report[conv] = {"eslac_G": B, "min_gap_MHz": nv.eslac_pair_gap(pc, B)}
    report["selected_convention"] = p.es_flipflop
    report["four_level_anticrossing_G"] = an.anticrossing_field(p)
    return {"eslac.json": json_text(report)}


def read_xy(path: Path, x_col: str | None, y_col: str | None) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    if len(header) < 2:
        raise ConfigError("input CSV needs at least two columns")
    xi = header.index(x_col) if x_col else 0
    yi = header.index(y_col) if y_col else 1
    try:
        xs = np.array([float(r[xi]) for r in rows])
        ys = np.array([float(r[yi]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed CSV: {exc}") from exc
    return xs, ys


def cmd_fit(path: Path, model: str, x_col: str | None = None, y_col: str | None = None,
            seed: int | None = None) -> dict[str, str]:
    xs, ys = read_xy(path, x_col, y_col)
    res = ft.MODELS[model](xs, ys)
    res.seed = seed
    record = res.to_json()
    record["meta"] = {k: v for k, v in res.meta.items() if not k.startswith("_")}
    record["model"] = model
    return {"fit.json": json_text(record)}


COMMANDS = {
    "contrast-sweep": cmd_contrast_sweep,
    "repump": cmd_repump,
    "fidelity-map": cmd_fidelity_map,
    "phase-susceptibility": cmd_phase_susceptibility,
    "tomography": cmd_tomography,
    "polarization": cmd_polarization,
    "eslac": cmd_eslac,
}

HELP = {
    "contrast-sweep": "PL contrasts of the nine ground-state basis states vs field",
    "repump": "Ramsey visibility/phase vs repump time, per Ramsey kind",
    "fidelity-map": "nuclear process fidelity over field and pump time",
    "phase-susceptibility": "analytic excited-state phase susceptibility vs field",
    "tomography": "qutrit tomography of the artificial thermal electron state",
    "polarization": "nuclear polarization after optical pumping vs field",
    "eslac": "excited-state anti-crossing location for both flip-flop conventions",
    "fit": "fit a two-column CSV with a named model",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvreadout", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config (unknown keys are rejected)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    fit = sub.add_parser("fit", parents=[common], help=HELP["fit"])
    fit.add_argument("--input", type=Path, required=True)
    fit.add_argument("--model", required=True, choices=sorted(ft.MODELS))
    fit.add_argument("--x-column")
    fit.add_argument("--y-column")
    return parser


def load_config(path: Path | None, seed: int | None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    cfg = parse_config(data)
    if seed is not None:
        cfg.seed = seed
    return cfg


def write_outputs(out_dir: Path, command: str, outputs: dict[str, str], echo: dict, started: str,
                  elapsed: float) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for name, text in outputs.items():
        data = text.encode()
        (out_dir / name).write_bytes(data)
        checksums[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "command": command,
        "version": __version__,
        "started_utc": started,
        "wall_clock_s": elapsed,
        "config": echo,
        "outputs": checksums,
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json_text(manifest))
    return path


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        if args.command == "fit":
            if not args.input.exists():
                print(f"input file not found: {args.input}", file=sys.stderr)
                return EXIT_USAGE
            outputs = cmd_fit(args.input, args.model, args.x_column, args.y_column, args.seed)
            echo = {"input": str(args.input), "model": args.model, "seed": args.seed}
        else:
            cfg = load_config(args.config, args.seed)
            outputs = COMMANDS[args.command](cfg, args.threads)
            echo = cfg.echo()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and signal runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        write_outputs(args.out, args.command, outputs, echo, started, time.perf_counter() - t0)
    except OSError as exc:
        print(f"could not write outputs: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in outputs:
        print(args.out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
