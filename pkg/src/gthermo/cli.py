"""Configuration-driven experiment runner.

Subcommands: verify (identity suites), dichotomy (exact vs product field),
scan (field-strength sweep, resumable), lyapunov (single spectrum).
Config files are INI (key = value under [sections]); unknown keys are
rejected with a line-anchored message.  Exit codes: 0 ok, 2 config error,
3 numerical failure.
"""

import argparse
import hashlib
import json
import os
import re
import sys

import numpy as np

from . import __version__, presets, suites, ergodic
from .errors import ConfigError, NumericalError
from .geometry import UnitTangent

SCHEMA_VERSION = suites.SCHEMA_VERSION

_FIELD_KEYS = {"preset": str, "epsilon": float, "a0": float, "b0": float,
               "m0": float}
for _p in ("exact", "p1", "p2", "mag"):
    for _q in ("amp", "rho", "cx", "cy"):
        _FIELD_KEYS[f"{_p}_{_q}"] = float

_SCHEMA = {
    "surface": {"kind": str, "amp": float, "nx": int, "ny": int,
                "Lx": float, "Ly": float},
    "field": _FIELD_KEYS,
    "spec": {"variant": str},
    "run": {"dt": float, "T": float, "burn_in": float, "ensemble": int,
            "seed": int, "n_samples": int, "renorm_interval": float,
            "positivity_samples": int, "n_states": int},
    "output": {"directory": str, "formats": str},
    "verify": {"identities": str},
    "scan": {"epsilons": str},
    "dichotomy": {"exact_preset": str, "product_preset": str},
    "lyapunov": {"x0": float, "y0": float, "phi0": float},
}

_RANGES = {
    ("run", "dt"): (1e-6, 4e-3),
    ("run", "T"): (1e-3, 1e6),
    ("run", "burn_in"): (0.0, 1e4),
    ("run", "ensemble"): (1, 100000),
    ("run", "n_samples"): (100, 100_000_000),
    ("run", "positivity_samples"): (16, 1_000_000),
    ("run", "n_states"): (1, 1_000_000),
    ("run", "renorm_interval"): (1e-3, 100.0),
    ("field", "epsilon"): (0.0, 2.0),
    ("surface", "amp"): (0.0, 1.0),
}

_DEFAULTS = {
    "surface": {"kind": "octagon"},
    "field": {"preset": "none", "epsilon": 0.3},
    "spec": {},
    "run": {"dt": 1e-3, "T": 1000.0, "burn_in": 50.0, "ensemble": 100,
            "seed": 12345, "n_samples": 1_000_000, "renorm_interval": 1.0,
            "positivity_samples": 512, "n_states": 1000},
    "output": {"directory": "out", "formats": "csv,json"},
    "verify": {"identities": "bracket,pestov,integral,riccati,positivity,liouville"},
    "scan": {"epsilons": "0.0,0.1,0.2,0.3"},
    "dichotomy": {"exact_preset": "exact_bump", "product_preset": "product_bumps"},
    "lyapunov": {"x0": 0.1, "y0": 0.05, "phi0": 0.3},
}


def _find_line(text, name):
    for i, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"\s*\[?{re.escape(name)}\]?\s*([=:\]]|$)", line):
            return i
    return None


def load_config(path):
    """Parse + validate; returns a nested dict with defaults filled in."""
    import configparser
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str          # keys are case-sensitive (T vs t, Lx)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        raise ConfigError(str(e).replace("\n", " "), line=line)
    cfg = {sec: dict(vals) for sec, vals in _DEFAULTS.items()}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", line=_find_line(text, sec))
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]",
                                  line=_find_line(text, key))
            typ = _SCHEMA[sec][key]
            try:
                val = typ(raw) if typ is not str else raw.strip()
            except ValueError:
                raise ConfigError(f"{sec}.{key}: cannot parse {raw!r} as {typ.__name__}",
                                  line=_find_line(text, key))
            rng = _RANGES.get((sec, key))
            if rng is not None and not (rng[0] <= val <= rng[1]):
                raise ConfigError(f"{sec}.{key} = {val} outside [{rng[0]}, {rng[1]}]",
                                  line=_find_line(text, key))
            cfg[sec][key] = val
    _validate_semantics(cfg, text)
    return cfg


def _validate_semantics(cfg, text):
    kind = cfg["surface"]["kind"]
    if kind not in presets.SURFACE_PRESETS:
        raise ConfigError(f"surface.kind must be one of {presets.SURFACE_PRESETS}",
                          line=_find_line(text, "kind"))
    preset = cfg["field"]["preset"]
    if preset not in presets.FIELD_PRESETS:
        raise ConfigError(f"field.preset must be one of {presets.FIELD_PRESETS}",
                          line=_find_line(text, "preset"))
    variant = cfg["spec"].get("variant")
    if variant is not None:
        expected = ("geodesic" if preset == "none" else
                    "magnetic" if preset.startswith("magnetic") else "gaussian")
        if variant != expected:
            raise ConfigError(f"spec.variant {variant!r} inconsistent with field "
                              f"preset {preset!r} (expected {expected!r})",
                              line=_find_line(text, "variant"))
    if kind == "octagon" and preset == "constant_form":
        raise ConfigError("constant_form is torus-only",
                          line=_find_line(text, "preset"))
    eps = sorted_epsilons(cfg)
    if eps is not None and list(eps) != sorted(eps):
        raise ConfigError("scan.epsilons must be ascending",
                          line=_find_line(text, "epsilons"))


def sorted_epsilons(cfg):
    raw = cfg["scan"]["epsilons"]
    try:
        eps = [float(t) for t in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"scan.epsilons: cannot parse {raw!r}")
    if not eps:
        raise ConfigError("scan.epsilons is empty")
    return eps


def build_surface(cfg):
    sec = cfg["surface"]
    params = {k: v for k, v in sec.items() if k != "kind"}
    return presets.make_surface(sec["kind"], **params)


def field_params(cfg):
    out = {}
    sec = cfg["field"]
    for p in ("exact", "p1", "p2", "mag"):
        cx, cy = sec.get(f"{p}_cx"), sec.get(f"{p}_cy")
        if cx is not None or cy is not None:
            d = presets.field_defaults(build_surface(cfg))[f"{p}_center"]
            out[f"{p}_center"] = (cx if cx is not None else d[0],
                                  cy if cy is not None else d[1])
        for q in ("amp", "rho"):
            v = sec.get(f"{p}_{q}")
            if v is not None:
                out[f"{p}_{q}"] = v
    for k in ("a0", "b0", "m0"):
        if k in sec:
            out[k] = sec[k]
    return out


def build_spec(cfg, surface, epsilon=None):
    sec = cfg["field"]
    eps = sec["epsilon"] if epsilon is None else epsilon
    return presets.make_spec(surface, sec["preset"], epsilon=eps, **field_params(cfg))


def ensemble_config(cfg, seed_override=None):
    run = cfg["run"]
    return ergodic.EnsembleConfig(
        n_traj=run["ensemble"], T=run["T"], dt=run["dt"], burn_in=run["burn_in"],
        seed=run["seed"] if seed_override is None else seed_override,
        renorm_interval=run["renorm_interval"])


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def write_rows(path, columns, rows, append=False):
    new = not (append and os.path.exists(path))
    mode = "a" if not new else "w"
    with open(path, mode) as fh:
        if new:
            fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "")) for c in columns) + "\n")


def _native(obj):
    if isinstance(obj, dict):
        return {k: _native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_native(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def read_results(path):
    """results.csv rows as dicts (numeric strings parsed)."""
    rows = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = {}
            for k, v in zip(header, parts):
                if v in ("true", "false"):
                    row[k] = v == "true"
                else:
                    try:
                        row[k] = float(v) if ("." in v or "e" in v or "nan" in v
                                              or "inf" in v) else int(v)
                    except ValueError:
                        row[k] = v
            rows.append(row)
    return rows


def write_artifacts(outdir, cfg, command, columns, rows, extra_summary=None,
                    append=False, summary_rows=None):
    rows = _native(rows)
    os.makedirs(outdir, exist_ok=True)
    formats = [f.strip() for f in cfg["output"]["formats"].split(",") if f.strip()]
    csv_path = os.path.join(outdir, "results.csv")
    if "csv" in formats:
        write_rows(csv_path, columns, rows, append=append)
        if append and summary_rows is None and os.path.exists(csv_path):
            summary_rows = read_results(csv_path)
    manifest = {"schema_version": SCHEMA_VERSION, "command": command,
                "code_version": __version__, "config": cfg,
                "config_hash": config_hash(cfg), "seed": cfg["run"]["seed"],
                "columns": list(columns)}
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if "json" in formats:
        summary = {"schema_version": SCHEMA_VERSION, "command": command,
                   "config_hash": manifest["config_hash"],
                   "rows": rows if summary_rows is None else _native(summary_rows)}
        if extra_summary:
            summary.update(_native(extra_summary))
        with open(os.path.join(outdir, "summary.json"), "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify(cfg, outdir):
    run = cfg["run"]
    which = [t.strip() for t in cfg["verify"]["identities"].split(",") if t.strip()]
    unknown = set(which) - {"bracket", "pestov", "integral", "riccati",
                            "positivity", "liouville"}
    if unknown:
        raise ConfigError(f"unknown identities {sorted(unknown)}")
    rows = suites.verify_all(n_states=run["n_states"], n_samples=run["n_samples"],
                             seed=run["seed"], epsilon=cfg["field"]["epsilon"],
                             positivity_samples=run["positivity_samples"],
                             which=which)
    n_fail = sum(1 for r in rows if not r["passed"])
    write_artifacts(outdir, cfg, "verify", suites.VERIFY_COLUMNS, rows,
                    extra_summary={"n_rows": len(rows), "n_failed": n_fail})
    for r in rows:
        mark = "PASS" if r["passed"] else "FAIL"
        print(f"[{mark}] {r['config_id']}: lhs={r['lhs']:.6g} rhs={r['rhs']:.6g} "
              f"z={r['z']:.3g}")
    return 0 if n_fail == 0 else 3


def cmd_dichotomy(cfg, outdir):
    ecfg = ensemble_config(cfg)
    rows = suites.dichotomy_experiment(
        ecfg, epsilon=cfg["field"]["epsilon"],
        exact_preset=cfg["dichotomy"]["exact_preset"],
        product_preset=cfg["dichotomy"]["product_preset"])
    by = {r["config_id"]: r for r in rows}
    verdict = {}
    if by["exact"]["status"] == "ok" and by["product"]["status"] == "ok":
        ex, pr = by["exact"], by["product"]
        verdict = {
            "exact_consistent_with_zero": bool(abs(ex["e_birk"]) <= 3 * ex["e_birk_se"]),
            "product_positive_3sigma": bool(pr["e_birk"] > 3 * pr["e_birk_se"]),
            "estimators_agree": bool(ex["agree_z"] <= 3 and pr["agree_z"] <= 3),
        }
    write_artifacts(outdir, cfg, "dichotomy", suites.RUN_COLUMNS, rows,
                    extra_summary={"verdict": verdict})
    for r in rows:
        print(f"{r['config_id']}: e_birk={r['e_birk']:+.6f}±{r['e_birk_se']:.6f} "
              f"e_lyap={r['e_lyap']:+.6f}±{r['e_lyap_se']:.6f} status={r['status']}")
    print("verdict:", verdict)
    if any(r["status"] != "ok" for r in rows):
        return 3
    return 0


def _read_done_epsilons(outdir, cfg):
    path = os.path.join(outdir, "results.csv")
    man = os.path.join(outdir, "manifest.json")
    if not (os.path.exists(path) and os.path.exists(man)):
        return []
    try:
        with open(man) as fh:
            if json.load(fh).get("config_hash") != config_hash(cfg):
                return []
        done = []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            i = header.index("epsilon")
            j = header.index("status")
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) == len(header) and parts[j] == "ok":
                    done.append(float(parts[i]))
        return done
    except (ValueError, OSError, KeyError):
        return []


def cmd_scan(cfg, outdir):
    eps = sorted_epsilons(cfg)
    os.makedirs(outdir, exist_ok=True)
    done = _read_done_epsilons(outdir, cfg)
    ecfg = ensemble_config(cfg)
    preset = cfg["field"]["preset"]
    if preset == "none":
        preset = "product_bumps"
    rows = suites.scan_experiment(ecfg, eps, preset=preset, done=done)
    write_artifacts(outdir, cfg, "scan", suites.RUN_COLUMNS, rows, append=True,
                    extra_summary={"epsilons": eps, "resumed_rows": len(done)})
    for r in rows:
        print(f"eps={r['epsilon']:g}: e_birk={r['e_birk']:+.6f}±{r['e_birk_se']:.6f} "
              f"lam=({r['lam1']:.4f},{r['lam2']:.4f},{r['lam3']:.4f}) status={r['status']}")
    if any(r["status"] != "ok" for r in rows):
        return 3
    return 0


def cmd_lyapunov(cfg, outdir):
    run = cfg["run"]
    ly = cfg["lyapunov"]
    s0 = UnitTangent(ly["x0"], ly["y0"], ly["phi0"])
    row, res = suites.lyapunov_experiment(
        cfg["surface"]["kind"], cfg["field"]["preset"], cfg["field"]["epsilon"],
        s0, run["T"], dt=run["dt"], burn_in=run["burn_in"],
        renorm_interval=run["renorm_interval"])
    os.makedirs(outdir, exist_ok=True)
    hist_path = os.path.join(outdir, "history_lyapunov.csv")
    with open(hist_path, "w") as fh:
        fh.write("t,lam1,lam2,lam3\n")
        for t, (l1, l2, l3) in zip(res.history_t, res.history):
            fh.write(f"{float(t)!r},{float(l1)!r},{float(l2)!r},{float(l3)!r}\n")
    write_artifacts(outdir, cfg, "lyapunov", suites.RUN_COLUMNS, [row],
                    extra_summary={"history_file": "history_lyapunov.csv",
                                   "middle_ok": res.middle_ok})
    print(f"exponents: {res.exponents}  sum={res.exponent_sum:+.2e} "
          f"middle_ok={res.middle_ok}")
    return 0


def _set_threads(n):
    import numba
    avail = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    numba.set_num_threads(max(1, min(int(n), avail)))


def main(argv=None):
    ap = argparse.ArgumentParser(prog="gthermo",
                                 description="Isokinetic-thermostat experiment runner")
    ap.add_argument("command", choices=["verify", "dichotomy", "scan", "lyapunov"])
    ap.add_argument("--config", required=True, help="INI experiment config")
    ap.add_argument("--out", default=None, help="output directory (overrides config)")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (or env GTHERMO_THREADS)")
    ap.add_argument("--seed", type=int, default=None, help="override run.seed")
    args = ap.parse_args(argv)

    threads = args.threads
    if threads is None and os.environ.get("GTHERMO_THREADS"):
        try:
            threads = int(os.environ["GTHERMO_THREADS"])
        except ValueError:
            print("error: GTHERMO_THREADS is not an integer", file=sys.stderr)
            return 2
    if threads is not None:
        _set_threads(threads)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        outdir = args.out or cfg["output"]["directory"]
        handler = {"verify": cmd_verify, "dichotomy": cmd_dichotomy,
                   "scan": cmd_scan, "lyapunov": cmd_lyapunov}[args.command]
        return handler(cfg, outdir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure [{getattr(e, 'stage', 'numerics')}]: {e}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
