"""Command-line interface: ``stochbif {orbit,scan,sweep,oracle,reproduce}``.

Settings are resolved as flags > config file (TOML) > defaults, and the
effective settings are written as ``#`` comments at the top of every CSV.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bifurcation import MODES, sweep, system_for_mode, write_diagram_csv, write_summary_csv
from .equilibria import ScanConfig, detect_equilibria
from .errors import ConfigError, OutputError, StochBifError
from .fpe import POLICIES, delta_init, evolve, write_density_csv
from .montecarlo import EnsembleConfig, em_mean_orbit
from .orbits import mean_orbits, write_orbit_csv
from .systems import BUILTIN_NAMES, lookup_builtin, system_from_config

log = logging.getLogger("stochbif")

OUTPUT_ENV = "STOCHBIF_OUTPUT_DIR"
COMMANDS = ("orbit", "scan", "sweep", "oracle", "reproduce")

DEFAULTS = {
    "system": None,
    "drift": None,
    "diffusion": None,
    "mode": "stochastic",
    "r": 1.0,
    "x0": [0.5],
    "x_min": None,
    "x_max": None,
    "n": None,
    "policy": None,
    "grade_at": None,
    "t_final": None,  # per-command, see COMMAND_DEFAULTS
    "dt": None,
    "sample_stride": 100,
    "fan": None,
    "fan_size": 21,
    "settle_tol": 1e-4,
    "merge_tol": 0.02,
    "r_min": None,
    "r_max": None,
    "r_steps": None,
    "refine_width": None,
    "n_paths": 100_000,
    "seed": 0,
    "domain_clip": None,
    "workers": None,  # available CPUs
    "output": None,
    "dump_density": False,
}
COMMAND_DEFAULTS = {
    "orbit": {"t_final": 40.0, "dt": 1e-3},
    "scan": {"t_final": 40.0, "dt": 1e-3},
    "sweep": {"t_final": 40.0, "dt": 1e-3, "r_steps": 21},
    "oracle": {"t_final": 5.0, "dt": 1e-3},
    "reproduce": {"t_final": 40.0, "dt": 1e-3},
}

# Ranges for the stochastic and deterministic diagrams written by ``reproduce``.
REPRODUCE_RANGES = {
    "saddle-node": (-1.0, 1.0, 21),
    "transcritical": (-5.0, 2.0, 29),
    "pitchfork": (-0.5, 1.0, 31),
}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Glue values such as ``-1,0.5`` or ``-1e-2`` to their flag; argparse would read them as options."""
    out: list[str] = []
    for tok in argv:
        prev = out[-1] if out else ""
        if tok.startswith("-") and prev.startswith("--") and "=" not in prev:
            try:
                _floats(tok)
            except argparse.ArgumentTypeError:
                pass
            else:
                out[-1] = f"{prev}={tok}"
                continue
        out.append(tok)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochbif", description="Mean-orbit bifurcation analysis of scalar SDEs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("system")
    g.add_argument("--config", type=Path, help="TOML file with any of the settings below")
    g.add_argument("--system", choices=BUILTIN_NAMES)
    g.add_argument("--mode", choices=MODES)
    g = common.add_argument_group("grid and solver")
    g.add_argument("--x-min", type=float)
    g.add_argument("--x-max", type=float)
    g.add_argument("--n", type=int, help="number of cells")
    g.add_argument("--policy", choices=POLICIES)
    g.add_argument("--grade-at", type=float, metavar="X",
                   help="refine the grid geometrically toward X (e.g. a zero of sigma); n sets the coarse spacing")
    g.add_argument("--t-final", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--sample-stride", type=int)
    g = common.add_argument_group("output")
    g.add_argument("-o", "--output", type=Path, help=f"output file (directory for reproduce); default under ${OUTPUT_ENV}")
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="store_true")

    scan_opts = argparse.ArgumentParser(add_help=False)
    g = scan_opts.add_argument_group("scan")
    g.add_argument("--fan", type=_floats, help="explicit initial points, comma separated")
    g.add_argument("--fan-size", type=int)
    g.add_argument("--settle-tol", type=float)
    g.add_argument("--merge-tol", type=float)

    o = sub.add_parser("orbit", parents=[common], help="mean orbits from one or more x0")
    o.add_argument("--r", type=float)
    o.add_argument("--x0", type=_floats)
    o.add_argument("--dump-density", action="store_true", default=None,
                   help="also write density snapshots t,x,p for the first x0")

    s = sub.add_parser("scan", parents=[common, scan_opts], help="mean equilibria at one r")
    s.add_argument("--r", type=float)

    w = sub.add_parser("sweep", parents=[common, scan_opts], help="bifurcation diagram over r")
    w.add_argument("--r-min", type=float)
    w.add_argument("--r-max", type=float)
    w.add_argument("--r-steps", type=int)
    w.add_argument("--refine-width", type=float)

    m = sub.add_parser("oracle", parents=[common], help="Euler-Maruyama ensemble mean orbits")
    m.add_argument("--r", type=float)
    m.add_argument("--x0", type=_floats)
    m.add_argument("--n-paths", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--domain-clip", type=float)

    rp = sub.add_parser("reproduce", parents=[common, scan_opts],
                        help="stochastic and deterministic diagrams for the three builtin systems")
    rp.add_argument("--r-steps", type=int, help="override the per-system number of r values")
    return p


def load_config_file(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from None
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r} in {path}")
        out[k] = value
    if "x0" in out and not isinstance(out["x0"], list):
        out["x0"] = [out["x0"]]
    return out


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[args.command])
    if getattr(args, "config", None) is not None:
        cfg.update(load_config_file(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "system", None) is not None:
        # a --system flag overrides a polynomial system from the file
        cfg["drift"] = cfg["diffusion"] = None
    if cfg["workers"] is None:
        cfg["workers"] = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    cfg["command"] = args.command
    return cfg


def scan_config(cfg: dict) -> ScanConfig:
    known = {f.name for f in fields(ScanConfig)}
    kw = {k: cfg[k] for k in known if k in cfg and cfg[k] is not None}
    if "fan" in kw:
        kw["fan"] = tuple(float(v) for v in kw["fan"])
    sc = ScanConfig(**kw)
    sc.validate()
    return sc


def header(cfg: dict) -> list[str]:
    lines = [f"stochbif {__version__}"]
    for k in sorted(cfg):
        lines.append(f"{k} = {cfg[k]!r}")
    return lines


def _output_path(cfg: dict, default_name: str) -> Path:
    if cfg["output"] is not None:
        return Path(cfg["output"])
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _check_positive_int(cfg, key, minimum=1):
    v = cfg[key]
    if v is None or int(v) != v or v < minimum:
        raise ConfigError(f"{key.replace('_', '-')} must be an integer >= {minimum}, got {v}")


def _system(cfg):
    if cfg["system"] is None and cfg["drift"] is None and cfg["diffusion"] is None:
        raise ConfigError("no system given: use --system or set drift/diffusion in a config file")
    return system_for_mode(system_from_config(cfg), cfg["mode"])


def _name(cfg):
    return cfg["system"] or "polynomial"


def plan(cfg: dict):
    """Validate everything and return (outputs, compute) without computing.

    ``compute()`` returns a mapping of path -> text.  Files are only written
    once every computation has finished.
    """
    cmd = cfg["command"]
    _check_positive_int(cfg, "workers")
    _check_positive_int(cfg, "sample_stride")
    if cmd == "reproduce":
        return _plan_reproduce(cfg)
    system = _system(cfg)
    sc = scan_config(cfg)
    comments = header(cfg)
    tag = f"{_name(cfg)}_{cfg['mode']}"

    if cmd == "orbit":
        grid = sc.grid_for(system, cfg["r"])
        x0s = [float(v) for v in cfg["x0"]]
        if not x0s:
            raise ConfigError("need at least one x0")
        for v in x0s:
            delta_init(grid, v)
        path = _output_path(cfg, f"orbit_{tag}.csv")
        dump = path.with_name(path.stem + "_density.csv")

        def compute():
            orbits = mean_orbits(system, cfg["r"], grid, x0s, sc.t_final, sc.dt, sc.sample_stride)
            out = {path: _render(write_orbit_csv, orbits, comments + _grid_lines(grid))}
            if cfg["dump_density"]:
                snaps = evolve(system, cfg["r"], grid, x0s[0], sc.t_final, sc.dt, sc.sample_stride)
                out[dump] = _render(write_density_csv, snaps, comments + _grid_lines(grid))
            return out

        return compute

    if cmd == "scan":
        path = _output_path(cfg, f"scan_{tag}.csv")
        sc.fan_for(sc.grid_for(system, cfg["r"]))

        def compute():
            scan = detect_equilibria(system, cfg["r"], sc)
            return {path: _render(write_scan_csv, scan, cfg["mode"], comments + _grid_lines(scan.grid))}

        return compute

    if cmd == "sweep":
        for key in ("r_min", "r_max"):
            if cfg[key] is None:
                raise ConfigError(f"sweep needs --{key.replace('_', '-')}")
        _check_positive_int(cfg, "r_steps", 2)
        if not cfg["r_min"] < cfg["r_max"]:
            raise ConfigError(f"need r_min < r_max, got ({cfg['r_min']}, {cfg['r_max']})")
        if cfg["refine_width"] is not None and not cfg["refine_width"] > 0:
            raise ConfigError("refine-width must be positive")
        path = _output_path(cfg, f"diagram_{tag}.csv")
        summary = path.with_name(path.stem + "_summary.csv")

        def compute():
            d = sweep(system, cfg["mode"], cfg["r_min"], cfg["r_max"], int(cfg["r_steps"]), sc,
                      refine_width=cfg["refine_width"], workers=int(cfg["workers"]))
            return {
                path: _render(write_diagram_csv, d, comments),
                summary: _render(write_summary_csv, d, comments),
            }

        return compute

    if cmd == "oracle":
        grid = sc.grid_for(system, cfg["r"])
        clip = cfg["domain_clip"]
        if clip is None:
            clip = max(abs(grid.x_min), abs(grid.x_max))
            cfg["domain_clip"] = clip
            comments = header(cfg)
        ens = EnsembleConfig(n_paths=cfg["n_paths"], dt=sc.dt, t_final=sc.t_final, seed=cfg["seed"],
                             domain_clip=clip, sample_stride=sc.sample_stride)
        ens.validate()
        x0s = [float(v) for v in cfg["x0"]]
        for v in x0s:
            if not abs(v) < clip:
                raise ConfigError(f"x0 = {v} lies outside the clip range +-{clip}")
        path = _output_path(cfg, f"oracle_{tag}.csv")

        def compute():
            orbits = [em_mean_orbit(system, cfg["r"], v, ens) for v in x0s]
            return {path: _render(write_orbit_csv, orbits, comments)}

        return compute

    raise ConfigError(f"unknown command {cmd!r}")


def _plan_reproduce(cfg):
    if cfg["system"] is not None or cfg["drift"] is not None:
        raise ConfigError("reproduce always runs the three builtin systems; drop --system")
    if cfg["r_steps"] is not None:
        _check_positive_int(cfg, "r_steps", 2)
    sc = scan_config(cfg)
    outdir = Path(cfg["output"]) if cfg["output"] is not None else Path(os.environ.get(OUTPUT_ENV, "."))
    jobs = []
    for name, (lo, hi, steps) in REPRODUCE_RANGES.items():
        if cfg["r_steps"] is not None:
            steps = int(cfg["r_steps"])
        for mode in ("stochastic", "deterministic"):
            jobs.append((name, mode, lo, hi, steps))

    def compute():
        out = {}
        for name, mode, lo, hi, steps in jobs:
            run_cfg = dict(cfg, system=name, mode=mode, r_min=lo, r_max=hi, r_steps=steps, command="sweep")
            log.info("sweeping %s (%s) over [%g, %g] with %d values", name, mode, lo, hi, steps)
            d = sweep(lookup_builtin(name), mode, lo, hi, steps, sc, refine_width=cfg["refine_width"],
                      workers=int(cfg["workers"]))
            out[outdir / f"diagram_{name}_{mode}.csv"] = _render(write_diagram_csv, d, header(run_cfg))
            out[outdir / f"diagram_{name}_{mode}_summary.csv"] = _render(write_summary_csv, d, header(run_cfg))
        return out

    return compute


def _grid_lines(grid) -> list[str]:
    lines = [f"grid = ({grid.x_min!r}, {grid.x_max!r}, {grid.n}, {grid.policy!r})"]
    if grid.grading is not None:
        lines.append(f"grading = {grid.grading!r}")
    return lines


def _render(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args[:-1], buf, args[-1])
    return buf.getvalue()


def write_scan_csv(scan, mode, stream, comments=()) -> None:
    """One row per equilibrium: ``r,location,stability,residual,mode,conditioned,notes``."""
    for line in comments:
        stream.write(f"# {line}\n")
    for d in scan.diagnostics:
        stream.write(f"# diagnostic: {d}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["r", "location", "stability", "residual", "mode", "conditioned", "notes"])
    if not scan.equilibria:
        w.writerow([repr(scan.r), "nan", "escape", "nan", mode, "false", ""])
    for e in scan.equilibria:
        w.writerow([repr(scan.r), repr(float(e.location)), e.stability, repr(float(e.residual)), mode,
                    "true" if e.conditioned else "false", "; ".join(e.notes)])


def write_outputs(files: dict) -> None:
    for path, text in files.items():
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from None
        print(path)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_attach_negative_values(sys.argv[1:] if argv is None else list(argv)))
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        compute = plan(cfg)
        write_outputs(compute())
    except StochBifError as exc:
        print(f"stochbif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
