"""Command-line driver: simulate, compare-shapes, optimize, export-map-template."""
from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
import time
from pathlib import Path

from .contour import CANONICAL, FootContour, load_contour, make_canonical, save_contour
from .gait import GaitFormatError, ReachError, load_gait, synth_gait
from .metrics import metrics
from .optimize import GAConfig, ShapeSpace, convexity_note, optimize, report
from .sim import Scenario, SimulationDiverged, WalkerParams, simulate
from .stressmap import MapFormatError, generic_map, load_stress_map, test_map, write_stress_map

# flat config keys, their types and defaults; CLI flags mirror these names
DEFAULTS = {
    "map": "generic",
    "zeta": 1.0,
    "gait": "synth",
    "step_length": 0.5,
    "step_period": 0.6,
    "lift_height": 0.1,
    "n_steps": 4,
    "foot": "rectangle",
    "foot_right": None,
    "contact_length": 0.26,
    "mass": 60.0,
    "dt": 1e-4,
    "tf": None,
    "settle_time": 1.0,
    "log_dt": 1e-3,
    "plates": 100,
    "foot_width": 0.08,
    "out": "out",
    "seed": 0,
    "shapes": ",".join(CANONICAL),
    "n": 11,
    "K": 10,
    "L": 0.13,
    "H": 0.03,
    "population": 40,
    "generations": 60,
    "crossover_rate": 0.9,
    "mutation_rate": None,
    "elites": 2,
    "parallel": False,
}
TYPES = {
    "map": str, "gait": str, "foot": str, "foot_right": str, "out": str, "shapes": str,
    "n_steps": int, "plates": int, "seed": int, "n": int, "K": int,
    "population": int, "generations": int, "elites": int, "parallel": bool,
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, value):
    if value is None:
        return None
    kind = TYPES.get(key, float)
    try:
        if kind is bool:
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes")
            return bool(value)
        if kind is int and isinstance(value, float) and value != int(value):
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config file and explicit flags (in that order)."""
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        cfg.update(data)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return {k: _coerce(k, v) for k, v in cfg.items()}


def build_map(cfg: dict):
    spec = cfg["map"]
    if spec == "generic":
        smap = generic_map()
    elif spec.startswith("test:"):
        try:
            smap = test_map(float(spec[5:]))
        except ValueError as e:
            raise ConfigError(f"bad test map {spec!r}: {e}") from None
    else:
        path = Path(spec)
        if not path.is_file():
            raise ConfigError(f"stress map not found: {path}")
        smap = load_stress_map(path)
    if not cfg["zeta"] > 0:
        raise ConfigError("zeta must be positive")
    return smap.with_zeta(cfg["zeta"])


def build_params(cfg: dict) -> WalkerParams:
    try:
        return WalkerParams(M=cfg["mass"], dt=cfg["dt"], t_f=cfg["tf"], foot_width=cfg["foot_width"],
                            N=cfg["plates"], settle_time=cfg["settle_time"], log_dt=cfg["log_dt"])
    except ValueError as e:
        raise ConfigError(str(e)) from None


def build_scenario(cfg: dict) -> Scenario:
    params = build_params(cfg)
    spec = cfg["gait"]
    if spec == "synth":
        gait = synth_gait(cfg["step_length"], cfg["step_period"], cfg["lift_height"],
                          cfg["n_steps"], l1=params.l1, l2=params.l2)
    else:
        path = Path(spec)
        if not path.is_file():
            raise ConfigError(f"gait file not found: {path}")
        gait = load_gait(path, params.l1, params.l2)
    return Scenario(gait, build_map(cfg), params)


def build_foot(spec: str, cfg: dict) -> FootContour:
    if spec in CANONICAL:
        return make_canonical(spec, cfg["contact_length"], cfg["foot_width"])
    if spec.startswith("genome:"):
        try:
            k = [int(v) for v in spec[7:].split(",")]
        except ValueError:
            raise ConfigError(f"bad genome {spec!r}") from None
        return _space(cfg, n=len(k)).contour(k)
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"foot must be one of {', '.join(CANONICAL)}, genome:k1,k2,..., "
                          f"or a contour JSON file; not found: {path}")
    return load_contour(path)


def _space(cfg: dict, n: int | None = None) -> ShapeSpace:
    try:
        return ShapeSpace(n=cfg["n"] if n is None else n, K=cfg["K"], L=cfg["L"], H=cfg["H"],
                          width=cfg["foot_width"])
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _scenario_echo(cfg: dict) -> dict:
    keys = ("map", "zeta", "gait", "step_length", "step_period", "lift_height", "n_steps",
            "mass", "dt", "tf", "settle_time", "log_dt", "plates", "foot_width")
    return {k: cfg[k] for k in keys}


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _sidecar(out: Path, command: str, cfg: dict) -> None:
    # timestamps and host details live here, never in the reports
    line = json.dumps({"command": command, "time": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                       "host": platform.node(), "python": platform.python_version(),
                       "config": cfg}, sort_keys=True)
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: dict) -> int:
    scenario = build_scenario(cfg)
    left = build_foot(cfg["foot"], cfg)
    right = build_foot(cfg["foot_right"], cfg) if cfg["foot_right"] else left
    traj = simulate(scenario, left, right)
    cost = metrics(traj)
    out = _out_dir(cfg)
    traj.to_csv(out / "trajectory.csv")
    _write_text(out / "metrics.json", cost.to_json())
    _sidecar(out, "simulate", cfg)
    print(f"x_tf={cost.x_tf:.4f} m  z_bar={cost.z_bar:.4f} m  |W|={cost.w_abs:.3f} J  "
          f"p_max={cost.p_max:.3f} W  dVx={cost.dvx:.4f} m/s  J_W={cost.J_W:.6g}")
    return 0


COMPARE_COLUMNS = ("shape", "contact_length", "x_tf", "z_bar", "w_abs_l", "w_abs_r", "w_abs",
                   "p_max", "dvx", "J_W")


def cmd_compare_shapes(cfg: dict) -> int:
    shapes = [s.strip() for s in cfg["shapes"].split(",") if s.strip()]
    if not shapes:
        raise ConfigError("no shapes given")
    feet = [build_foot(s, cfg) for s in shapes]
    scenario = build_scenario(cfg)
    out = _out_dir(cfg)
    rows = []
    for i, (name, foot) in enumerate(zip(shapes, feet)):
        traj = simulate(scenario, foot)
        cost = metrics(traj)
        traj.to_csv(out / f"traj_{i:02d}_{Path(name).stem.replace(':', '_')}.csv")
        rows.append({"shape": name, "contact_length": cfg["contact_length"], "x_tf": cost.x_tf,
                     "z_bar": cost.z_bar, "w_abs_l": abs(float(traj.w_l[-1])),
                     "w_abs_r": abs(float(traj.w_r[-1])), "w_abs": cost.w_abs,
                     "p_max": cost.p_max, "dvx": cost.dvx, "J_W": cost.J_W})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, COMPARE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    _write_text(out / "comparison.csv", buf.getvalue())
    _write_text(out / "comparison.json", json.dumps(rows, indent=2) + "\n")
    _sidecar(out, "compare-shapes", cfg)
    for row in rows:
        print(f"{row['shape']:>12s}  x_tf={row['x_tf']:.4f}  z_bar={row['z_bar']:.4f}  "
              f"|W|={row['w_abs']:.3f}  p_max={row['p_max']:.3f}  dVx={row['dvx']:.4f}  "
              f"J_W={row['J_W']:.6g}")
    return 0


def cmd_optimize(cfg: dict) -> int:
    space = _space(cfg)
    try:
        ga = GAConfig(population=cfg["population"], generations=cfg["generations"],
                      crossover_rate=cfg["crossover_rate"], mutation_rate=cfg["mutation_rate"],
                      elites=cfg["elites"], seed=cfg["seed"], parallel=cfg["parallel"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    scenario = build_scenario(cfg)

    def progress(gen, best, mean):
        print(f"gen {gen:3d}  best J_W={best:.6g}  mean J_W={mean:.6g}", flush=True)

    result = optimize(ga, scenario, space, on_generation=progress)
    out = _out_dir(cfg)
    body = report(ga, space, result, _scenario_echo(cfg))
    _write_text(out / "report.json", json.dumps(body, indent=2) + "\n")
    save_contour(space.contour(result.best), out / "best_contour.json")
    _sidecar(out, "optimize", cfg)
    print(f"best k={list(result.best)}  J_W={result.best_cost.J_W:.6g}")
    print(convexity_note(result.best))
    return 0


def cmd_export_map_template(cfg: dict) -> int:
    smap = build_map(dict(cfg, zeta=1.0))
    out = Path(cfg["out"])
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "stress_map_template.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_stress_map(smap, out, comment="angles in degrees, stresses in N/m^3")
    print(f"wrote {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "compare-shapes": cmd_compare_shapes,
    "optimize": cmd_optimize,
    "export-map-template": cmd_export_map_template,
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rftwalk", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flat keys; flags override it")
    helps = {
        "map": "generic | test:<a> | path to a stress-map CSV",
        "gait": "synth | path to a gait CSV",
        "foot": f"{' | '.join(CANONICAL)} | genome:k1,..,kn | contour JSON",
        "foot_right": "right foot, same forms as --foot (default: same as left)",
        "shapes": "comma-separated feet for compare-shapes",
        "tf": "terminal time of the gait phase (s); default: whole gait",
        "plates": "plates per foot",
        "mass": "walker mass (kg)",
        "mutation_rate": "per-gene mutation probability (default 1/n)",
    }
    for key, default in DEFAULTS.items():
        kwargs = {"default": None, "dest": key,
                  "help": helps.get(key, f"default: {default}")}
        if TYPES.get(key) is bool:
            kwargs["action"] = "store_const"
            kwargs["const"] = True
        else:
            kwargs["type"] = TYPES.get(key, float)
        common.add_argument(_flag(key), **kwargs)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MapFormatError, GaitFormatError, ReachError, ValueError) as e:
        print(f"rftwalk {args.command}: error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"rftwalk {args.command}: error: {e}", file=sys.stderr)
        return 2
    except SimulationDiverged as e:
        print(f"rftwalk {args.command}: simulation diverged: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"rftwalk {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
