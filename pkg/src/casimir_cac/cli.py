"""Command-line front end.

    casimir-cac force           --config run.json --out out/ --jobs 4 --resolution 32,64
    casimir-cac contour-table   --config run.json
    casimir-cac omega-scan      --config run.json
    casimir-cac experiment-plan --config run.json
    casimir-cac oracles
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .contours import check_physicality
from .experiment import (AntennaPlan, bandwidth_report, fluid_contour, hz_to_xi,
                         synthetic_smatrix, write_report)
from .greens import SolverBreakdown
from .oracle import run_oracle_suite, write_reports
from .quadrature import integrate_force, richardson
from .stress import ForceProblem, field_model

JOBS_ENV = "CASIMIR_CAC_JOBS"


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_")


def _resolutions(text):
    if text is None:
        return None
    vals = [int(v) for v in text.split(",") if v.strip()]
    if not 1 <= len(vals) <= 2:
        raise argparse.ArgumentTypeError("give one or two resolutions, e.g. 32 or 32,64")
    return vals


def _default_jobs():
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def load_config(args) -> RunConfig:
    """--jobs beats the config file, which beats the environment."""
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    cfg = RunConfig.from_dict(raw)
    jobs = args.jobs if args.jobs is not None else (None if "jobs" in raw else _default_jobs())
    return cfg.override(out=args.out, jobs=jobs, resolutions=args.resolution)


def _problem(cfg: RunConfig, setup) -> ForceProblem:
    return ForceProblem(setup, field_model(cfg["model"]),
                        vacuum_subtraction=cfg["vacuum_subtraction"],
                        use_symmetry=cfg["use_symmetry"],
                        closure_offset=cfg["closure_offset"])


def run_force(cfg: RunConfig) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = cfg.header()
    summary = {"config_sha256": cfg.sha256(), "model": cfg["model"], "runs": []}
    ok = True
    forces = {}
    for res in cfg["resolutions"]:
        setup = cfg.setup(res)
        problem = _problem(cfg, setup)
        for contour in cfg.contours():
            result = integrate_force(contour, problem, cfg.quadrature(contour), jobs=cfg["jobs"])
            stem = f"{_slug(contour.label)}_r{res}"
            result.meta.update({"resolution": res, "model": cfg["model"],
                                "config_sha256": cfg.sha256()})
            result.write_json(out / f"force_{stem}.json")
            result.write_partial_csv(out / f"partial_{stem}.csv", header)
            result.write_integrand_csv(out / f"integrand_{stem}.csv", header)
            forces.setdefault(contour.label, []).append(result.force)
            summary["runs"].append({"contour": contour.label, "resolution": res,
                                    "force": [float(v) for v in result.force],
                                    "converged": result.converged, "tail": result.tail,
                                    "nodes": result.node_count})
            print(f"{contour.label:32s} res={res:4d} F_x={result.fx:+.8f} "
                  f"nodes={result.node_count} converged={result.converged}")
            if not result.converged:
                ok = False
                print(f"  not converged: tail {result.tail:.3e} > {result.rel_tol:g} |F|",
                      file=sys.stderr)
    if len(cfg["resolutions"]) == 2:
        r1, r2 = cfg["resolutions"]
        ratio = r2 / r1
        summary["extrapolated"] = {}
        for label, (f1, f2) in forces.items():
            fx = richardson(f1, f2, ratio=ratio, order=2)
            summary["extrapolated"][label] = [float(v) for v in fx]
            print(f"{label:32s} extrapolated F_x={fx[0]:+.8f}")
    with open(out / "force_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if ok else 2


def run_contour_table(cfg: RunConfig) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["probes"]
    probes = np.logspace(np.log10(p["min"]), np.log10(p["max"]), p["n"])
    with open(out / "contour_table.csv", "w", newline="") as fh:
        fh.write(f"# {cfg.header()}\n")
        w = csv.writer(fh)
        w.writerow(["contour", "conjugate_symmetric", "passive", "physical", "witness"])
        for contour in cfg.contours():
            rep = check_physicality(contour, probes)
            witness = "" if rep.witness is None else f"xi={rep.witness[0]:.3g}: {rep.witness[2]}"
            w.writerow([contour.label, rep.conjugate_symmetric, rep.passive, rep.physical, witness])
            print(f"{contour.label:40s} symmetric={rep.conjugate_symmetric!s:5s} "
                  f"passive={rep.passive!s:5s} physical={rep.physical}")
    return 0


def run_omega_scan(cfg: RunConfig) -> int:
    s = cfg["scan"]
    print("warning: coarse scan at reduced resolution; values near the real axis are "
          "qualitative only", file=sys.stderr)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    problem = _problem(cfg, cfg.setup(s["resolution"]))
    re_vals = np.linspace(s["re_min"], s["re_max"], s["n_re"])
    im_vals = np.linspace(s["im_min"], s["im_max"], s["n_im"])
    with open(out / "omega_scan.csv", "w", newline="") as fh:
        fh.write(f"# {cfg.header()} resolution={s['resolution']}\n")
        w = csv.writer(fh)
        w.writerow(["re_omega", "im_omega", "re_dFx_domega", "im_dFx_domega", "status"])
        for wi in im_vals:
            for wr in re_vals:
                omega = complex(wr, wi)
                if omega == 0:
                    w.writerow([repr(float(wr)), repr(float(wi)), "nan", "nan", "excluded"])
                    continue
                try:
                    val = problem.integrand(float("nan"), omega).dF[0]
                    w.writerow([repr(float(wr)), repr(float(wi)), repr(float(val.real)), repr(float(val.imag)), "ok"])
                except SolverBreakdown:
                    w.writerow([repr(float(wr)), repr(float(wi)), "nan", "nan", "breakdown"])
    return 0


def run_experiment_plan(cfg: RunConfig) -> int:
    e = cfg["experiment"]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    fluid = cfg.fluid()
    setup = cfg.setup(cfg["resolutions"][0])
    try:
        report, _ = bandwidth_report(setup, fluid, e["d_m"], e["fraction"], cfg["model"],
                                     tuple(e["orientations"]), jobs=cfg["jobs"])
    except ValueError as exc:
        print(f"experiment plan failed: {exc}", file=sys.stderr)
        return 2
    report["config_sha256"] = cfg.sha256()
    write_report(report, out / "bandwidth.json")
    plan = AntennaPlan.from_setup(setup, e["d_m"], tuple(e["orientations"]))
    n_ant = min(e["antennas"], len(plan.positions_code))
    pick = np.linspace(0, len(plan.positions_code) - 1, n_ant).round().astype(int)
    plan = AntennaPlan(plan.positions_code[pick], plan.orientations, e["d_m"])
    f = np.geomspace(e["f_min_Hz"], e["f_max_Hz"], e["n_freq"])
    spec = synthetic_smatrix(setup, fluid_contour(fluid, e["d_m"]), plan, hz_to_xi(f, e["d_m"]))
    spec.to_csv(out / "smatrix.csv", cfg.header())
    print(f"xi_{int(round(100 * e['fraction']))} = {report['xi_fraction_Hz']:.4g} Hz, "
          f"{report['antennas']['antenna_measurements']} antenna measurements")
    return 0


def run_oracles(cfg: RunConfig) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports = run_oracle_suite()
    write_reports(reports, out / "oracles.csv", cfg.header())
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.quantity}: engine={r.engine:.10g} "
              f"oracle={r.oracle:.10g} rel={r.rel_error:.2e}")
    return 0 if all(r.passed for r in reports) else 1


COMMANDS = {
    "force": run_force,
    "contour-table": run_contour_table,
    "omega-scan": run_omega_scan,
    "experiment-plan": run_experiment_plan,
    "oracles": run_oracles,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="casimir-cac",
                                 description="Casimir forces along complex-frequency contours")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    ap.add_argument("--resolution", type=_resolutions, help="R or R1,R2 (cells per d)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except Exception as exc:  # schema and file errors
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
