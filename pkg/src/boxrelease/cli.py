"""Command-line runner: ``boxrelease {density,current,trajectories,arrival}``.

Each command resolves a scenario (defaults, then ``--config``, then explicit
flags), writes its table(s) into ``--out`` and records a ``run.json``
manifest beside them.  Numbers are written with ``repr`` so they round-trip
exactly.

Exit status: 0 when everything succeeded, 1 when an evaluation raised,
2 for bad arguments or an invalid scenario, 3 when outputs were written but
some trajectories or detector series did not complete.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .arrival import ArrivalError, arrival, current_series, detection_probability
from .bohmian import COMPLETED, ensemble
from .observables import density
from .scenario import (Eigenstate, GridSpec, Scenario, ScenarioError, parse_state,
                       read_config, scenario_from_mapping, validate)
from .wavefunction import evaluate

log = logging.getLogger("boxrelease")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


def _num(v) -> str:
    return repr(float(v))


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


# Scenario resolution -------------------------------------------------------------

def resolve_scenario(args) -> Scenario:
    sc = Scenario()
    if args.config:
        sc = scenario_from_mapping(read_config(args.config), sc)
    if args.state:
        sc = replace(sc, state=parse_state(args.state))
    if args.detector_x is not None:
        sc = replace(sc, detector_x=args.detector_x)
    if args.grid_x:
        sc = replace(sc, x_grid=GridSpec.parse(args.grid_x))
    if args.grid_t:
        g = GridSpec.parse(args.grid_t)
        sc = replace(sc, t_start=g.min, t_max=g.max, t_count=g.count)
    if args.t_start is not None:
        sc = replace(sc, t_start=args.t_start)
    if args.t_max is not None:
        sc = replace(sc, t_max=args.t_max)
    return validate(sc)


def time_grid(sc: Scenario, spacing: str) -> np.ndarray:
    if spacing == "geometric":
        return np.geomspace(sc.t_start, sc.t_max, sc.t_count)
    return sc.t_grid.values()


# Writers ---------------------------------------------------------------------------

class Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.paths: list[str] = []

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        self.paths.append(name)
        return self.root / name

    def table(self, name: str, header: list[str], rows, fmt: str) -> None:
        rows = list(rows)
        if fmt == "json":
            cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
            self.json(f"{name}.json", cols)
            return
        with open(self._path(f"{name}.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])

    def json(self, name: str, obj) -> None:
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, allow_nan=False)
            fh.write("\n")


# Commands --------------------------------------------------------------------------

def cmd_density(sc: Scenario, args, out: Outputs) -> int:
    times = _floats(args.times) if args.times else np.linspace(sc.t_start, sc.t_max, 6).tolist()
    if any(t <= 0 for t in times):
        raise ScenarioError(["density times must be > 0"])
    x = sc.x_grid.values()
    cols = [density(evaluate(sc.state, x, t, sc)) for t in times]
    header = ["x_um"] + [f"t={_num(t)}ms" for t in times]
    rows = ([float(x[i])] + [float(c[i]) for c in cols] for i in range(x.size))
    out.table("density", header, rows, args.format)
    return EXIT_OK


def cmd_current(sc: Scenario, args, out: Outputs) -> int:
    s = current_series(sc, sc.detector_x, time_grid(sc, args.t_spacing))
    out.table("current", ["t_ms", "j_per_ms"], zip(s.times.tolist(), s.j.tolist()), args.format)
    return EXIT_OK


def cmd_trajectories(sc: Scenario, args, out: Outputs) -> int:
    ts = time_grid(sc, args.t_spacing)
    ens = ensemble(sc, args.count, args.seed, sc.t_max, mode=args.mode, sample_times=ts)
    rows = []
    for i, tr in enumerate(ens.trajectories):
        last = len(tr.t) - 1
        for k, (t, x, v) in enumerate(tr.samples):
            rows.append([i, t, x, v, tr.status if k == last else COMPLETED])
    out.table("trajectories", ["trajectory_id", "t_ms", "x_um", "v_um_per_ms", "status"],
              rows, args.format)
    bad = [tr for tr in ens.trajectories if tr.status != COMPLETED]
    for tr in bad:
        log.warning("trajectory from x0=%r: %s (%s)", tr.x0, tr.status, tr.message)
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_arrival(sc: Scenario, args, out: Outputs) -> int:
    ns = _ints(args.n) if args.n else [None]
    ts = time_grid(sc, args.t_spacing)
    summary, status = [], EXIT_OK
    for n in ns:
        scn = sc if n is None else validate(sc.with_state(Eigenstate(n)))
        label = scn.state.n if isinstance(scn.state, Eigenstate) else None
        entry = {"n": label, "state": scn.state.spec(), "method": args.method}
        series = current_series(scn, scn.detector_x, ts)
        try:
            dist = arrival(series, args.method)
        except ArrivalError as exc:
            entry.update(mean_ms=None, detection_probability=None, error=str(exc))
            summary.append(entry)
            status = EXIT_PARTIAL
            continue
        entry.update(mean_ms=dist.mean, detection_probability=detection_probability(series),
                     single_signed=bool(np.all(series.j >= 0) or np.all(series.j <= 0)))
        summary.append(entry)
        if args.distribution:
            tag = f"n{label}" if label is not None else "state"
            out.table(f"arrival_{tag}", ["t_ms", "pi_per_ms"],
                      zip(dist.times.tolist(), dist.pi.tolist()), "csv")
    out.json("arrival_summary.json", {"detector_x_um": sc.detector_x, "results": summary})
    return status


COMMANDS = {
    "density": cmd_density,
    "current": cmd_current,
    "trajectories": cmd_trajectories,
    "arrival": cmd_arrival,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scenario")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--state", help="n:<int> | gaussian:<x0>,<sigma0> | free-gaussian:<x0>,<sigma0>")
    g.add_argument("--detector-x", type=float, help="detector position (um)")
    g.add_argument("--t-start", type=float, help="first time (ms)")
    g.add_argument("--t-max", type=float, help="last time (ms)")
    g.add_argument("--grid-x", help="min:max:count in um")
    g.add_argument("--grid-t", help="min:max:count in ms (sets t-start, t-max and the count)")
    g.add_argument("--t-spacing", choices=("linear", "geometric"), default="linear")
    o = common.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.add_argument("--out", default=".", help="output directory")
    o.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="boxrelease", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("density", parents=[common], help="|psi|^2 on the x grid")
    p.add_argument("--times", help="comma-separated times in ms (default: 6 between t-start and t-max)")
    sub.add_parser("current", parents=[common], help="j(t) at the detector")
    p = sub.add_parser("trajectories", parents=[common], help="Bohmian paths")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("quantile", "born"), default="quantile")
    p = sub.add_parser("arrival", parents=[common], help="arrival-time distributions")
    p.add_argument("--method", choices=("leavens", "cutoff"), default="leavens")
    p.add_argument("--n", help="comma-separated eigenstate indices (default: --state)")
    p.add_argument("--distribution", action="store_true", help="also write Pi(t) per state as CSV")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        sc = resolve_scenario(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"boxrelease: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Outputs(Path(args.out))
    try:
        status = COMMANDS[args.command](sc, args, out)
    except ScenarioError as exc:
        print(f"boxrelease: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and fail the run
        log.exception("%s failed", args.command)
        print(f"boxrelease: {args.command} failed: {exc}", file=sys.stderr)
        status = EXIT_FAILED
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:] if argv is None else list(argv),
        "scenario": sc.to_dict(),
        "seed": getattr(args, "seed", None),
        "outputs": list(out.paths),
        "version": __version__,
        "exit_status": status,
        "duration_s": round(time.perf_counter() - start, 3),
    }
    out.json("run.json", manifest)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
