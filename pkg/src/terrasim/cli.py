"""terrasim command line.

Exit codes: 0 ok, 2 validation failure or missing input, 3 internal error.
Only the rendered report goes to stdout; everything else goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from terrasim import __version__
from terrasim.simkernel.ledger import DowntimeLedger, LedgerError
from terrasim.simkernel.report import build_report
from terrasim.simkernel.scenario import Scenario, ScenarioError, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 2, 3
FORMATS = ("table", "csv", "json")
log = logging.getLogger("terrasim")


class InputError(Exception):
    """Bad or missing user input; maps to exit code 2."""


def bundled_dir() -> Path:
    return Path(str(resources.files("terrasim") / "scenarios"))


def resolve_scenario(ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    candidate = bundled_dir() / f"{stem}.json"
    if candidate.is_file():
        return candidate
    raise InputError(f"scenario file not found: {ref}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load(ref: str) -> Scenario:
    path = resolve_scenario(ref)
    try:
        return load_scenario(path)
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {exc.filename}") from exc
    except ScenarioError as exc:
        raise InputError(str(exc)) from exc


def run_one(scenario: Scenario, out: Path, fmt: str, seed: int | None,
            threshold: int | None, plots: bool = True):
    """Simulate and write every artifact into `out`; returns (rendered report, result)."""
    from terrasim.simkernel.engine import run

    res = run(scenario, seed=seed, threshold=threshold)
    res.report.meta["seed_override"] = seed is not None
    res.report.meta["horizon_h"] = scenario.horizon_h
    rendered = res.report.render(fmt)
    _write(out / "ledger.csv", res.ledger.to_csv())
    _write(out / f"report.{fmt}", rendered)
    _write(out / "events.log", res.events_text())
    _write(out / "failovers.csv", res.failovers_csv())
    _write(out / "backups.csv", res.backups_csv())
    _write(out / "run.json", json.dumps({
        "scenario": scenario.name, "source": scenario.source, "seed": res.seed,
        "seed_override": seed is not None, "threshold": res.threshold,
        "horizon_h": scenario.horizon_h, "version": __version__,
        "restores": [[r.t, r.partition, r.result] for r in res.restores],
        "web_outages": [[w.site, w.start, w.end] for w in res.web_outages],
        "traffic": res.traffic,
    }, indent=2, sort_keys=True) + "\n")
    if plots:
        from terrasim import plots as pl

        pl.downtime_by_category(res.report, out / "downtime_by_category.png")
        pl.outage_timeline(res.ledger, out / "outage_timeline.png")
    return rendered, res


def _batch_job(args: tuple) -> tuple[int, int, float]:
    scenario, out, fmt, seed, threshold, plots = args
    _, res = run_one(scenario, out, fmt, seed, threshold, plots)
    return seed, res.report.total_s, res.report.percent_available


def default_out() -> str:
    return os.environ.get("TERRASIM_OUT", "out")


# -- subcommands -------------------------------------------------------------

def cmd_run(a) -> int:
    scenario = _load(a.scenario)
    out = Path(a.out)
    if a.batch and a.batch > 1:
        base = a.seed if a.seed is not None else scenario.seed
        jobs = [(scenario, out / f"seed-{base + i}", a.format, base + i, a.threshold, not a.no_plots)
                for i in range(a.batch)]
        with ProcessPoolExecutor() as pool:
            rows = list(pool.map(_batch_job, jobs))
        lines = ["seed,total_s,percent_available"]
        lines += [f"{s},{tot},{pct:.2f}" for s, tot, pct in rows]
        summary = "\n".join(lines) + "\n"
        _write(out / "batch.csv", summary)
        if not a.quiet:
            sys.stdout.write(summary)
        log.info("wrote %d runs under %s", a.batch, out)
        return EXIT_OK
    rendered, _ = run_one(scenario, out, a.format, a.seed, a.threshold, not a.no_plots)
    if not a.quiet:
        sys.stdout.write(rendered)
    log.info("wrote ledger, report, events and figures to %s", out)
    return EXIT_OK


def cmd_validate(a) -> int:
    from terrasim.topology import load_topology, validate_topology

    problems: list[str] = []
    topo_refs: list = []
    if a.scenario:
        sc = _load(a.scenario)
        topo_refs.append(sc.topology)
        topo_refs += [s.params["topology"] for s in sc.steps
                      if s.action == "expand" and s.params.get("topology") is not None]
    if a.topology:
        topo_refs.append(a.topology)
    if not topo_refs:
        topo_refs = ["default"]
    for ref in topo_refs:
        if isinstance(ref, str) and ref not in ("default", "initial") and not Path(ref).is_file():
            raise InputError(f"topology file not found: {ref}")
        try:
            topo = load_topology(ref)
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"topology {ref!r} cannot be parsed: {exc}") from exc
        found = validate_topology(topo)
        problems += [f"{topo.name}: {v}" for v in found]
        if not a.quiet:
            sys.stdout.write(f"{topo.name}: {'ok' if not found else f'{len(found)} violation(s)'}\n")
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_report(a) -> int:
    path = Path(a.ledger)
    if not path.is_file():
        raise InputError(f"ledger file not found: {a.ledger}")
    try:
        ledger = DowntimeLedger.from_csv(path.read_text(encoding="utf-8"))
    except LedgerError as exc:
        raise InputError(f"{a.ledger}: {exc}") from exc
    rendered = build_report(ledger, {"ledger": str(path)}).render(a.format)
    if a.out_given:
        _write(Path(a.out) / f"report.{a.format}", rendered)
    if not a.quiet:
        sys.stdout.write(rendered)
    return EXIT_OK


def cmd_calibrate(a) -> int:
    from terrasim.backup import TapeLibrarySpec, backup_report_csv, run_backup
    from terrasim.storage import StorageCalibration, throughput_report_csv

    cal = StorageCalibration()
    if a.calibration:
        p = Path(a.calibration)
        if not p.is_file():
            raise InputError(f"calibration file not found: {a.calibration}")
        try:
            cal = StorageCalibration.from_dict(json.loads(p.read_text(encoding="utf-8")))
        except (ValueError, TypeError) as exc:
            raise InputError(f"{a.calibration}: {exc}") from exc
    text = throughput_report_csv(volume_counts=range(1, 11), calibration=cal)
    jobs = [run_backup("DRG_DB", 1.05, TapeLibrarySpec(drives=d)) for d in (4, 2)]
    out = Path(a.out)
    _write(out / "throughput.csv", text)
    _write(out / "backup_model.csv", backup_report_csv(jobs))
    if not a.no_plots:
        from terrasim import plots as pl

        pl.throughput_curves(out / "throughput.png", cal)
    if not a.quiet:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_list(a) -> int:
    for p in sorted(bundled_dir().glob("*.json")):
        sc = load_scenario(p)
        sys.stdout.write(f"{p.stem}\t{sc.horizon_h:g} h\t{len(sc.steps)} steps\t{sc.description}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="terrasim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"terrasim {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, scenario=False):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
        p.add_argument("--out", default=None, help="output directory (default $TERRASIM_OUT or ./out)")
        p.add_argument("--format", choices=FORMATS, default="table")
        p.add_argument("--quiet", action="store_true", help="write files only, nothing on stdout")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("run", help="simulate a scenario")
    common(p, scenario=True)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--threshold", type=int, choices=(2, 3), default=None,
                   help="failed members that take a mirror set down")
    p.add_argument("--batch", type=int, default=0, help="run N consecutive seeds in parallel")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("validate", help="validate a scenario and its topologies")
    p.add_argument("--scenario")
    p.add_argument("--topology", help="'default', 'initial' or a topology JSON path")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("report", help="render a report from a ledger CSV")
    common(p)
    p.add_argument("--ledger", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("calibrate", help="emit the throughput envelope and backup model tables")
    common(p)
    p.add_argument("--calibration", help="JSON file of storage calibration overrides")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(fn=cmd_list)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="terrasim: %(message)s", stream=sys.stderr)
    if hasattr(args, "out"):
        args.out_given = args.out is not None
        args.out = args.out or default_out()
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"terrasim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:  # noqa: BLE001
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
