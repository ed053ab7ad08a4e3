"""Command line: gthermo-plots <results_dir> --out <figures_dir>.

Renders every figure the artifacts in results_dir support: dichotomy bars
when exact/product rows are present, the sweep curve when several epsilons
are, and convergence curves for history_*.csv files.  Exit codes: 0 ok,
2 schema/input error (message names the offending column or file).
"""

import argparse
import glob
import os
import sys

from .tables import ResultTable, SchemaError
from .figures import plot_dichotomy, plot_sweep, plot_convergence


def render_dir(results_dir, out_dir):
    made = []
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(results_dir, "results.csv")
    if os.path.exists(csv_path):
        table = ResultTable.load(csv_path)
        if "config_id" in table.columns:
            ids = {r.get("config_id") for r in table.rows}
            if {"exact", "product"} & ids:
                made.append(plot_dichotomy(table, os.path.join(out_dir, "dichotomy.png")))
            eps_rows = [r for r in table.rows
                        if isinstance(r.get("epsilon"), (int, float))]
            if len({r["epsilon"] for r in eps_rows}) >= 2:
                made.append(plot_sweep(table, os.path.join(out_dir, "sweep.png")))
    histories = sorted(glob.glob(os.path.join(results_dir, "history_*.csv")))
    if histories:
        made.append(plot_convergence(histories,
                                     os.path.join(out_dir, "convergence.png")))
    if not made:
        raise SchemaError(f"{results_dir}: no renderable artifacts found")
    return made


def main(argv=None):
    ap = argparse.ArgumentParser(prog="gthermo-plots",
                                 description="Figures from gthermo artifacts")
    ap.add_argument("results_dir")
    ap.add_argument("--out", required=True, help="figures output directory")
    args = ap.parse_args(argv)
    try:
        made = render_dir(args.results_dir, args.out)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return 2
    for path in made:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
