"""Figure builders over parsed result tables.

Rendering is deterministic: Agg backend, fixed geometry/dpi, fixed PNG
metadata, so identical inputs regenerate bit-identical files.
"""

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .tables import ResultTable, SchemaError

_SAVE = dict(dpi=120, metadata={"Software": "gthermo-plots"})
_RUN_COLS = ("config_id", "epsilon", "e_birk", "e_birk_se", "e_lyap",
             "e_lyap_se", "status")


def _style(ax):
    ax.grid(True, alpha=0.3)
    ax.axhline(0.0, color="k", lw=0.8)


def plot_dichotomy(table: ResultTable, out_path):
    """Exact vs product entropy production with 3-sigma bars and a zero line."""
    table.require(*_RUN_COLS)
    groups = []
    missing = []
    for cid in ("exact", "product"):
        rows = table.select(config_id=cid)
        if rows:
            groups.append((cid, rows[0]))
        else:
            missing.append(cid)
    if not groups:
        raise SchemaError(f"{table.path}: no dichotomy rows "
                          f"(missing config_id: {', '.join(missing)})")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.35
    for i, (cid, row) in enumerate(groups):
        for j, (est, se, color) in enumerate(
                (("e_birk", "e_birk_se", "#1f77b4"),
                 ("e_lyap", "e_lyap_se", "#ff7f0e"))):
            x = i + (j - 0.5) * width
            ax.bar(x, row[est], width=width * 0.9, color=color,
                   label=est if i == 0 else None)
            ax.errorbar(x, row[est], yerr=3.0 * row[se], color="k", capsize=4)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels([f"{cid} field\n(eps={row['epsilon']:g})"
                        for cid, row in groups])
    ax.set_ylabel("entropy production")
    ax.set_title("exact vs non-exact external field (3-sigma bars)")
    if missing:
        ax.annotate(f"warning: missing rows: {', '.join(missing)}",
                    xy=(0.02, 0.95), xycoords="axes fraction", color="red")
    _style(ax)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)
    return out_path


def plot_sweep(table: ResultTable, out_path):
    """Entropy production vs field strength with a 3-sigma band."""
    table.require(*_RUN_COLS)
    rows = sorted((r for r in table.rows if r["status"] == "ok"),
                  key=lambda r: r["epsilon"])
    if not rows:
        raise SchemaError(f"{table.path}: no completed sweep rows")
    eps = np.array([r["epsilon"] for r in rows], dtype=float)
    e = np.array([r["e_birk"] for r in rows], dtype=float)
    se = np.array([r["e_birk_se"] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(eps, e - 3 * se, e + 3 * se, alpha=0.25, label="3-sigma band")
    ax.plot(eps, e, "o-", label="e (divergence estimator)")
    ax.set_xlabel("field strength epsilon")
    ax.set_ylabel("entropy production")
    ax.set_title("entropy production vs field strength")
    _style(ax)
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)
    return out_path


def plot_convergence(history_paths, out_path):
    """Running Lyapunov exponent estimates over log time, per history file."""
    if not history_paths:
        raise SchemaError("no history files given")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path in history_paths:
        tab = load_history(path)
        t = np.array([r["t"] for r in tab.rows])
        for k, color in zip(("lam1", "lam2", "lam3"),
                            ("#1f77b4", "#2ca02c", "#d62728")):
            ax.plot(t, [r[k] for r in tab.rows], color=color,
                    label=k if path == history_paths[0] else None)
    ax.set_xscale("log")
    ax.set_xlabel("time")
    ax.set_ylabel("running exponent estimate")
    ax.set_title("Lyapunov exponent convergence")
    _style(ax)
    ax.legend(loc="center right")
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE)
    plt.close(fig)
    return out_path


def load_history(path):
    """History CSV (t, lam1, lam2, lam3); schema checked, columns named on error."""
    import os
    if not os.path.exists(path):
        raise SchemaError(f"{path}: file not found")
    with open(path) as fh:
        columns = fh.readline().rstrip("\n").split(",")
        rows = []
        for i, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(columns):
                raise SchemaError(f"{path}:{i}: ragged row")
            rows.append({k: float(v) for k, v in zip(columns, parts)})
    tab = ResultTable(columns=columns, rows=rows, path=path)
    missing = [c for c in ("t", "lam1", "lam2", "lam3") if c not in columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s): " + ", ".join(missing))
    return tab
