"""Config-driven command line: validate measure pairs, run experiments, merge
report tables.

    krflx validate --config cfg.json
    krflx run --config cfg.json --out results/ [--seed N] [--workers K]
              [--force] [--verbose]
    krflx tabulate results_a results_b --out merged.csv

The CLI never computes mathematics itself; it parses configs, calls the
harness, and writes report.json, tables/*.csv, plots/*.svg.  Exit codes:
0 all criteria pass, 2 any failure, 3 inconclusive, 64 usage or schema error.
The seed priority is --seed > config "seed" > env KRFLX_SEED > 0.  Reports
are byte-deterministic for a given (config, seed); wall-clock data goes to
run_meta.json instead.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from . import harness
from .strings import (DomainError, check_M1, check_condition_C, parse_jump,
                      parse_measure)
from . import levy

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 2, 3, 64

_AXIS_COLUMNS = ("gamma", "time_scale", "lambda", "t", "lam", "mu", "s", "q")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SystemExit(_usage_error(f"config not found: {path}"))
    except json.JSONDecodeError as exc:
        raise SystemExit(_usage_error(f"malformed JSON in {path}: {exc}"))


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def cmd_validate(args) -> int:
    raw = _load_config(args.config)
    try:
        spec = harness.spec_from_dict(raw)
        m, j = spec.measures()
    except (harness.SpecError, DomainError) as exc:
        return _usage_error(f"schema: {exc}")
    c1 = check_M1(m)
    c2 = check_condition_C(m, j)
    print(f"M1: {c1.status} ({c1.detail})")
    if c2.status == "true":
        try:
            b = levy.drift_b(m, j)
            extra = f" (kappa={j.kappa:.6g}, b={b:.6g})"
        except Exception:
            extra = f" (kappa={j.kappa:.6g})"
        print(f"C: satisfied{extra}")
    else:
        print(f"C: {'violated' if c2.status == 'false' else 'inconclusive'} "
              f"- {c2.detail}")
    if spec.m_minus is not None or spec.j_minus is not None:
        mm, jm = spec.measures_minus()
        print(f"M1(-): {check_M1(mm).status}")
        print(f"C(-): {check_condition_C(mm, jm).status}")
    if "false" in (c1.status, c2.status):
        return EXIT_FAIL
    if "inconclusive" in (c1.status, c2.status):
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _write_tables(report, out_dir: str):
    tdir = os.path.join(out_dir, "tables")
    os.makedirs(tdir, exist_ok=True)
    for name, tab in report.tables.items():
        with open(os.path.join(tdir, f"{name}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(tab["columns"])
            w.writerows(tab["rows"])


def _write_plots(report, out_dir: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pdir = os.path.join(out_dir, "plots")
    os.makedirs(pdir, exist_ok=True)
    for name, tab in report.tables.items():
        cols, rows = tab["columns"], tab["rows"]
        if not rows:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.4))
        try:
            if name == "tail":
                s = [r[0] for r in rows]
                v = [max(r[1], 1e-300) for r in rows]
                ax.loglog(s, v, "o-", ms=3)
                ax.set_xlabel("s")
                ax.set_ylabel("survival per unit local time")
            elif name == "ladder":
                g = [r[0] for r in rows]
                e = [max(r[5], 1e-16) for r in rows]
                ax.loglog(g, e, "o-", ms=3)
                ax.set_xlabel("gamma")
                ax.set_ylabel("relative error")
            elif name.startswith("quantiles"):
                sim_q = [r[1] for r in rows]
                ref_q = [r[2] for r in rows]
                ax.plot(ref_q, sim_q, "o", ms=3)
                lo = min(ref_q + sim_q); hi = max(ref_q + sim_q)
                ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
                ax.set_xlabel("reference quantile")
                ax.set_ylabel("simulated quantile")
            else:
                plt.close(fig)
                continue
            ax.set_title(f"{report.experiment}: {name}")
            fig.tight_layout()
            fig.savefig(os.path.join(pdir, f"{name}.svg"))
        finally:
            plt.close(fig)


def cmd_run(args) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw and os.environ.get("KRFLX_SEED"):
        raw["seed"] = int(os.environ["KRFLX_SEED"])
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.force:
        raw["force"] = True
    try:
        spec = harness.spec_from_dict(raw)
    except harness.SpecError as exc:
        return _usage_error(f"schema: {exc}")
    out_dir = args.out
    if os.path.exists(os.path.join(out_dir, "report.json")) and not args.force:
        return _usage_error(f"{out_dir} already holds a report; use --force")
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.time()
    try:
        report = harness.run_experiment(spec)
    except Exception as exc:
        pdir = os.path.join(out_dir, "partial")
        os.makedirs(pdir, exist_ok=True)
        with open(os.path.join(pdir, "error.json"), "w") as fh:
            json.dump({"error": str(exc), "spec": spec.canonical_dict()}, fh, indent=1)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.time() - t0
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "run_meta.json"), "w") as fh:
        json.dump({"runtime_seconds": elapsed, "workers": spec.workers}, fh)
    _write_tables(report, out_dir)
    _write_plots(report, out_dir)
    if args.verbose:
        for c in report.criteria:
            flag = "PASS" if c.passed else "FAIL"
            print(f"[{flag}] {c.name}: value={c.value:.6g} tol={c.tol:.6g} {c.detail}")
    print(f"{report.experiment}: {report.status} ({elapsed:.1f}s) -> {out_dir}/report.json")
    if report.status == "pass":
        return EXIT_PASS
    if report.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_FAIL


def cmd_tabulate(args) -> int:
    merged = {}
    order = []
    for run_dir in args.out_dirs:
        path = os.path.join(run_dir, "report.json")
        if not os.path.exists(path):
            return _usage_error(f"no report.json under {run_dir}")
        with open(path) as fh:
            rep = json.load(fh)
        if not isinstance(rep.get("tables"), dict):
            return _usage_error(f"report schema mismatch in {run_dir}")
        for tname, tab in rep["tables"].items():
            cols = tab["columns"]
            axis_idx = [i for i, c in enumerate(cols) if c in _AXIS_COLUMNS]
            for row in tab["rows"]:
                key = (rep["experiment"], tname,
                       tuple(row[i] for i in axis_idx))
                val = (cols, row, run_dir)
                if key in merged:
                    prev_cols, prev_row, prev_dir = merged[key]
                    if prev_row != row:
                        return _usage_error(
                            f"conflicting duplicate key {key}: "
                            f"{prev_dir} vs {run_dir}")
                else:
                    merged[key] = val
                    order.append(key)
    out = args.out or "merged.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "table", "columns", "row"])
        for key in order:
            cols, row, _dir = merged[key]
            w.writerow([key[0], key[1], ";".join(map(str, cols)),
                        ";".join(map(str, row))])
    print(f"wrote {len(order)} rows -> {out}")
    return EXIT_PASS


_EXPERIMENT_HELP = """experiment tags (config "experiment"):
  conv_jump         deterministic exponent convergence to kappa*lam*H (ladder)
  conv_bm           alpha = 2 exponent convergence to the Brownian exponent
  ilt_alpha         ILT fluctuation KS vs spectrally positive stable, alpha in (1,2)
  ilt_alpha2        ILT fluctuation vs Brownian marginals (alpha = 2)
  ilt_alpha1        ILT fluctuation vs the alpha = 1 skewed reference
  tail              excursion-duration survival slope/intercept regression
  occupation_alpha  bilateral occupation fluctuation vs difference of stables
  occupation_alpha2 same, Brownian branch
  occupation_alpha1 same, null-recurrent log branch (experimental)
  arcsine           A(t)/t vs the generalized arcsine law
  double_laplace    MC double Laplace transform of A(t) vs the closed form
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="krflx",
        description="strings, spectral characteristics, and fluctuation "
                    "scaling-limit experiments for jumping-in diffusions",
        epilog=_EXPERIMENT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    pv = sub.add_parser("validate", help="check a config's measures (M1, admissibility)")
    pv.add_argument("--config", required=True)
    pv.set_defaults(fn=cmd_validate)

    pr = sub.add_parser("run", help="run one experiment config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--workers", type=int, default=None)
    pr.add_argument("--force", action="store_true")
    pr.add_argument("--verbose", "-v", action="store_true")
    pr.set_defaults(fn=cmd_run)

    pt = sub.add_parser("tabulate", help="merge report tables across runs")
    pt.add_argument("out_dirs", nargs="+")
    pt.add_argument("--out", default="merged.csv")
    pt.set_defaults(fn=cmd_tabulate)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
