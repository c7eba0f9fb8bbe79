"""Command-line front end.

Exit status is 0 on success, 1 when a simulation fails and 2 for
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import NO_FORMING, detect_forming_voltage, sweep_k1_k2, uniformity
from .fv import SolverError
from .io import ConfigError, RunConfig, default_config_text, load_config, metadata, write_csv, write_trace, write_vtk
from .protocol import TraceResult

log = logging.getLogger("rramfv")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SWEEP_COLUMNS = ("K1", "K2", "V_f", "R_HRS", "R_LRS", "ratio", "cv_HRS", "cv_LRS")
STATUS_COLUMNS = ("K1", "K2", "status", "seed")
CYCLE_COLUMNS = ("cycle", "R_HRS", "R_LRS")
IV_COLUMNS = ("V1", "V2", "I")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="root random seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rramfv", description="Filament forming and switching simulator.")
    parser.add_argument("--version", action="version", version=f"rramfv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("form", help="apply the forming waveform to a pristine device")
    _common(p)
    p = sub.add_parser("cycle", help="form, then run set/reset cycles")
    _common(p)
    p.add_argument("-n", "--cycles", type=int, help="number of cycles (default from config)")
    p = sub.add_parser("sweep", help="forming voltage and switching metrics over a (K1, K2) grid")
    _common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p = sub.add_parser("iv", help="quasi-static DC I-V sweep")
    _common(p)
    p = sub.add_parser("validate", help="run the built-in verification suite")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--quick", action="store_true", help="smaller meshes, looser runtime")
    p = sub.add_parser("print-config", help="print the full configuration")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--seed", type=int)
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative", "command line")
        cfg = cfg.with_seed(args.seed)
    return cfg


def _diagnostics(out: Path, command: str, exc: SolverError, cfg: RunConfig):
    out.mkdir(parents=True, exist_ok=True)
    info = {k: (v if isinstance(v, (int, float, str)) else repr(v)) for k, v in exc.info.items()}
    payload = {"command": command, "error": str(exc), "info": info, **metadata(cfg)}
    path = out / "diagnostics.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _summary(path: Path, items: dict, meta: dict):
    write_csv(path, ("quantity", "value"), list(items.items()), meta)


def cmd_form(cfg: RunConfig, out: Path) -> int:
    scn = cfg.scenario
    mesh = scn.mesh()
    R0 = scn.read(scn.pristine_state(mesh), mesh)
    trace = scn.form(snapshot_times=cfg.output.snapshots)
    meta = metadata(cfg, command="form")
    out.mkdir(parents=True, exist_ok=True)
    write_trace(out / "trace.csv", trace, meta)
    if cfg.output.vtk:
        for k, (t, st) in enumerate(trace.snapshots):
            write_vtk(out / f"snapshot_{k:03d}.vtk", mesh, st)
    vf = detect_forming_voltage(trace, scn.I_CC)
    R1 = scn.read(trace.final_state, mesh)
    _summary(out / "summary.csv", {
        "V_f": "no-forming" if vf is NO_FORMING else vf,
        "R_initial": R0,
        "R_final": R1,
        "T_peak_max": float(np.max(trace.T_peak)),
        "I_final": float(trace.I[-1]),
    }, meta)
    print(f"V_f = {'no-forming' if vf is NO_FORMING else f'{vf:.4f} V'}; R {R0:.4g} -> {R1:.4g} ohm; "
          f"peak T {np.max(trace.T_peak):.1f} K")
    return EXIT_OK


def cmd_cycle(cfg: RunConfig, out: Path, n: int | None = None) -> int:
    scn = cfg.scenario
    n = scn.cycles if n is None else n
    if n < 1:
        raise ConfigError("number of cycles must be >= 1", "command line")
    mesh = scn.mesh()
    formed = scn.form()
    try:
        res = scn.cycle(formed.final_state, N=n)
    except SolverError as exc:
        exc.info.setdefault("cycle", "?")
        raise
    meta = metadata(cfg, command="cycle", cycles=n)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "cycles.csv", CYCLE_COLUMNS,
              [(k + 1, h, l) for k, (h, l) in enumerate(zip(res.R_HRS, res.R_LRS))], meta)
    rows = []
    for k, (tr_set, tr_reset) in enumerate(res.traces):
        for phase, tr in (("set", tr_set), ("reset", tr_reset)):
            rows.extend((k + 1, phase, *r) for r in tr.rows().tolist())
    write_csv(out / "traces.csv", ("cycle", "phase", *TraceResult.COLUMNS), rows, meta)
    if n >= 2:
        cv_h, cv_l = uniformity(res.R_HRS), uniformity(res.R_LRS)
        summary = {"cv_HRS": cv_h, "cv_LRS": cv_l}
        print(f"HRS sigma/mu = {cv_h:.4f}, LRS sigma/mu = {cv_l:.4f}")
    else:
        summary = {"cv_HRS": "unavailable", "cv_LRS": "unavailable"}
        print("uniformity unavailable: needs at least 2 cycles")
    summary.update({"median_R_HRS": float(np.median(res.R_HRS)), "median_R_LRS": float(np.median(res.R_LRS))})
    _summary(out / "summary.csv", summary, meta)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1", "command line")
    scn = cfg.scenario.replace(resolution=cfg.sweep.resolution)

    def progress(idx, cell):
        log.info("cell %d K1=%g K2=%g %s V_f=%s", idx, cell.K1, cell.K2, cell.status, cell.V_f)

    smap = sweep_k1_k2(cfg.sweep.K1, cfg.sweep.K2, scn, jobs=jobs, cycles=cfg.sweep.cycles,
                       root_seed=cfg.seed, progress=progress)
    meta = metadata(cfg, command="sweep")
    out.mkdir(parents=True, exist_ok=True)
    rows = [(c.K1, c.K2, c.V_f, c.R_HRS, c.R_LRS, c.ratio, c.cv_HRS, c.cv_LRS) for c in smap.cells]
    write_csv(out / "sweep_map.csv", SWEEP_COLUMNS, rows, meta)
    write_csv(out / "sweep_status.csv", STATUS_COLUMNS, [(c.K1, c.K2, c.status, c.seed) for c in smap.cells], meta)
    done = smap.completed
    print(f"{sum(c.status == 'ok' for c in smap.cells)}/{len(smap.cells)} cells completed")
    return EXIT_OK if done >= 0.9 else EXIT_FAIL


def cmd_iv(cfg: RunConfig, out: Path) -> int:
    scn = cfg.scenario
    curve = scn.iv_sweep(cfg.iv.waveform(), step=cfg.iv.step, dwell=cfg.iv.dwell)
    meta = metadata(cfg, command="iv")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "iv.csv", IV_COLUMNS, list(zip(curve.V1.tolist(), curve.V2.tolist(), curve.I.tolist())), meta)
    write_trace(out / "trace.csv", curve.trace, meta)
    print(f"{len(curve.I)} I-V points written")
    return EXIT_OK


def cmd_validate(quick: bool = False) -> int:
    from .verification import run_all

    results = run_all(quick=quick)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose if hasattr(args, "verbose") else 0, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return cmd_validate(args.quick)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "print-config":
        text = default_config_text() if args.config is None and args.seed is None else _dump(cfg)
        sys.stdout.write(text)
        return EXIT_OK

    out = Path(args.out)
    try:
        if args.command == "form":
            return cmd_form(cfg, out)
        if args.command == "cycle":
            return cmd_cycle(cfg, out, args.cycles)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.jobs)
        if args.command == "iv":
            return cmd_iv(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        path = _diagnostics(out, args.command, exc, cfg)
        print(f"simulation failed: {exc} (details in {path})", file=sys.stderr)
        return EXIT_FAIL
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


def _dump(cfg: RunConfig) -> str:
    import yaml

    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


if __name__ == "__main__":
    sys.exit(main())
