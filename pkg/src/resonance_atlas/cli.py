"""Command-line front end.

    resonance-atlas [--config PATH] [--out DIR] [--jobs N] [--resume] [--no-timestamp]
                    {trace,tables,threelevel,critical} ...

Exit codes: 0 all comparisons pass, 2 some comparison failed, 3 aborted.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contour import RootSettings
from .errors import AtlasError, ConfigError, ContinuationLost

EXIT_OK, EXIT_FAIL, EXIT_ABORT = 0, 2, 3
CSV_HEADER = "mu,re,im,branch,residual,iterations"

GLOBAL_DEFAULTS = {"out": ".", "jobs": 1, "resume": False, "no_timestamp": False}
TRACE_DEFAULTS = {"sector": "one", "family": 0, "lam": 0.1, "mu": "0:2:200",
                  "root_abs_tol": 1e-13, "root_rel_tol": 1e-11}
THREE_DEFAULTS = {"e1": 1.0, "e2": 2.3, "l01": 0.05, "l12": 0.07, "l02": 0.01,
                  "s0": "0", "s1": "0", "s2": "0", "n": 1, "N": None, "family": "01"}


# ---------------------------------------------------------------------------
# helpers


def parse_grid(text) -> list:
    """'a:b:n' (n points, endpoints included) or a comma list of values."""
    try:
        if isinstance(text, (list, tuple)):
            vals = [float(v) for v in text]
        elif ":" in str(text):
            parts = str(text).split(":")
            if len(parts) != 3:
                raise ConfigError(f"grid {text!r} must read start:stop:count")
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ConfigError("grid count must be positive")
            vals = [float(v) for v in np.linspace(a, b, n)]
        else:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError("empty grid")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("grid must be strictly increasing")
    if vals[0] < 0:
        raise ConfigError("mu must be non-negative")
    return vals


def fmt(x: float) -> str:
    """Shortest round-trip representation."""
    return repr(float(x))


def _timestamp_line():
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    return f"# generated {now.isoformat()}"


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    models = [k for k in ("two_level", "three_level") if k in data]
    if len(models) > 1:
        raise ConfigError("config must contain exactly one model section")
    flat = {k: v for k, v in data.items() if k not in ("two_level", "three_level")}
    for k in models:
        section = data[k]
        if not isinstance(section, dict):
            raise ConfigError(f"{k} must be an object")
        flat.update({("lam" if key == "lambda" else key): v for key, v in section.items()})
    return flat


def _merge(args, config, defaults):
    """Flags override the config file, which overrides built-in defaults."""
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))


def _color(ok: bool, text: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{32 if ok else 31}m{text}\033[0m"


# ---------------------------------------------------------------------------
# trace


def _run_trace(sector, family, lam, grid, root):
    from .friedrichs import trace_resonance_in_mu
    from .two_excitation import trace_z02, trace_z12
    if sector == "one":
        return trace_resonance_in_mu(lam, family, grid, root=root)
    if family == 0:
        return trace_z02(lam, grid)
    return trace_z12(lam, grid)


def _read_rows(path: Path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("mu,") or not line.strip():
                continue
            rows.append(line.rstrip("\n"))
    return rows


def _row(s) -> str:
    # flags such as "bridge" ride along in the branch column
    branch = f"{s.branch}+{s.flag}" if s.flag else s.branch
    return ",".join([fmt(s.mu), fmt(s.z.real), fmt(s.z.imag), branch, fmt(s.residual), str(int(s.iterations))])


def cmd_trace(args) -> int:
    if args.sector not in ("one", "two"):
        raise ConfigError("sector must be 'one' or 'two'")
    family = int(args.family)
    if family not in (0, 1):
        raise ConfigError("family must be 0 or 1")
    lam = float(args.lam)
    if lam < 0:
        raise ConfigError("lambda must be non-negative")
    if args.root_abs_tol <= 0 or args.root_rel_tol <= 0:
        raise ConfigError("tolerances must be positive")
    grid = parse_grid(args.mu)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trace_{args.sector}_{family}_lam{lam:g}.csv"

    done = []
    if args.resume and path.exists():
        done = _read_rows(path)
        done_mu = {float(r.split(",")[0]) for r in done}
        if all(m in done_mu for m in grid):
            print(f"{path}: complete, nothing to do")
            return EXIT_OK
    root = RootSettings(abs_tol=args.root_abs_tol, rel_tol=args.root_rel_tol, max_iter=60)
    aborted = None
    try:
        traj = _run_trace(args.sector, family, lam, grid, root)
    except ContinuationLost as exc:
        traj = exc.trajectory
        aborted = exc
    samples = list(traj.samples) if traj is not None else []
    if done:
        # deterministic recomputation: keep the stored rows, append the rest
        have = {float(r.split(",")[0]) for r in done}
        new = [s for s in samples if s.mu not in have and s.mu > max(have)]
        with open(path, "a", encoding="utf-8") as fh:
            for s in new:
                fh.write(_row(s) + "\n")
                fh.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            if not args.no_timestamp:
                fh.write(_timestamp_line() + "\n")
            fh.write(CSV_HEADER + "\n")
            for s in samples:
                fh.write(_row(s) + "\n")
                fh.flush()
    if aborted is not None:
        print(f"continuation lost: {aborted}; partial file kept at {path}", file=sys.stderr)
        return EXIT_ABORT
    missing = len(grid) - len(samples)
    print(f"{path}: {len(samples)} rows" + (f" ({missing} grid points skipped)" if missing else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# tables


def _compare_table(which):
    from .reproduce import compare
    return which, compare(which)


def _table_csv(which, rows, path, stamp):
    with open(path, "w", encoding="utf-8") as fh:
        if stamp:
            fh.write(_timestamp_line() + "\n")
        fh.write("key,computed_re,computed_im,reference_re,reference_im,pass\n")
        for r in rows:
            c = r["computed"]
            c = [None, None] if c is None else (c if isinstance(c, list) else [c, 0.0])
            ref = r["reference"]
            ref = ref if isinstance(ref, list) else [ref, 0.0]
            cells = [r["key"]] + ["" if v is None else fmt(v) for v in c] + [fmt(v) for v in ref]
            fh.write(",".join(cells + [str(r["pass"]).lower()]) + "\n")


def cmd_tables(args) -> int:
    which = args.which
    if isinstance(which, str):
        which = [which]
    for w in which:
        if w not in ("1", "2", "3", "anchors"):
            raise ConfigError(f"unknown table {w!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = max(1, int(args.jobs))
    if jobs > 1 and len(which) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_compare_table, which))
    else:
        results = dict(_compare_table(w) for w in which)
    failed = False
    for w in which:
        rows = results[w]
        _table_csv(w, rows, out / f"table_{w}.csv", not args.no_timestamp)
        with open(out / f"report_{w}.json", "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
            fh.write("\n")
        for r in rows:
            tag = _color(r["pass"], "PASS" if r["pass"] else "FAIL")
            extra = f"  [{r['error']}]" if "error" in r else ""
            print(f"{tag} {r['location']}: computed={r['computed']} reference={r['reference']} "
                  f"({r['tolerance']}){extra}")
            failed |= not r["pass"]
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# three-level


def _three_model(args):
    from .three_level import ThreeLevelModel
    try:
        return ThreeLevelModel(float(args.e1), float(args.e2), float(args.l01), float(args.l12),
                               float(args.l02), complex(str(args.s0).replace(" ", "")),
                               complex(str(args.s1).replace(" ", "")), complex(str(args.s2).replace(" ", "")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def threelevel_spectrum(model) -> dict:
    from . import three_level as tl
    fock, H = tl.build_truncated_hamiltonian(model, 3, include_v=False)
    one = np.linalg.eigvalsh(tl.sector_block(fock, H, 1, modes_used=2))
    p41 = [e for e, _ in tl.prop41_spectrum(model)]
    res = {"prop41": p41, "prop41_oracle_delta": float(max(min(abs(one - e)) for e in p41))}
    if abs(model.s1) < 1 - 1e-12:
        two = np.linalg.eigvalsh(tl.sector_block(fock, H, 2, modes_used=2))
        b2 = [complex(v).real for v in tl.b2_spectrum(model)]
        res["b2"] = b2
        res["b2_second_order"] = tl.b2_second_order(model)
        res["b2_oracle_delta"] = float(np.max(np.abs(np.sort(two) - np.sort(b2))))
    return res


def threelevel_kato(model, family, n, N) -> dict:
    from . import three_level as tl
    matrix = tl.kato_matrix_second_order(model, family, n, N)
    zeta = tl.zeta_01(model) if family == "01" else tl.zeta_11(model)
    out = {"family": family, "n": n, "zeta": zeta, "matrix": matrix,
           "matrix_raw_ratio": tl.kato_matrix_second_order(model, family, n, N, raw=True),
           "shift": matrix - zeta}
    for conv in tl.CONVENTIONS:
        val = tl.kato_z2(model, family, n, conv)
        out[f"analytic_{conv}"] = val
        out[f"delta_{conv}"] = abs(val - matrix)
    return out


def cmd_threelevel(args) -> int:
    model = _three_model(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "spectrum":
        res = threelevel_spectrum(model)
        ok = res["prop41_oracle_delta"] <= 1e-9 and res.get("b2_oracle_delta", 0.0) <= 1e-9
    else:
        if args.family not in ("01", "11"):
            raise ConfigError("family must be 01 or 11")
        res = threelevel_kato(model, args.family, int(args.n), None if args.N is None else int(args.N))
        ok = res["delta_n1_squared"] <= 1e-10 * (1 + abs(res["shift"]))
    res["model"] = {k: _jsonable(v) for k, v in model.__dict__.items()}
    res["pass"] = bool(ok)
    text = json.dumps(_jsonable(res), indent=1)
    (out / f"threelevel_{args.mode}.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# critical


def cmd_critical(args) -> int:
    from .reproduce import critical_values
    lam = float(args.lam)
    if lam < 0:
        raise ConfigError("lambda must be non-negative")
    v = critical_values(lam)
    print(f"mu_c({lam:g}) closed form = {v['closed_form']:.10g}")
    print(f"mu_c({lam:g}) quadrature  = {v['quadrature']:.10g}")
    print(f"difference               = {v['difference']:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resonance-atlas", description="Resonances of the Friedrichs model "
                                "and a three-level atom: traces, tables and perturbative checks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file mirroring the flags")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--jobs", type=int, help="worker processes for independent tables")
    p.add_argument("--resume", action="store_true", default=None, help="continue an existing trace file")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true", default=None,
                   help="omit the ISO-8601 comment line")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trace", help="trace a resonance over mu")
    t.add_argument("--sector", choices=["one", "two"])
    t.add_argument("--family", type=int, choices=[0, 1])
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--mu", help="start:stop:count or comma list")
    t.add_argument("--root-abs-tol", dest="root_abs_tol", type=float)
    t.add_argument("--root-rel-tol", dest="root_rel_tol", type=float)

    tb = sub.add_parser("tables", help="reproduce reference tables")
    tb.add_argument("--which", nargs="+", choices=["1", "2", "3", "anchors"], default=["1"])

    th = sub.add_parser("threelevel", help="three-level spectra and Kato splittings")
    th.add_argument("mode", choices=["spectrum", "kato"])
    for name in ("e1", "e2", "l01", "l12", "l02"):
        th.add_argument(f"--{name}", type=float)
    for name in ("s0", "s1", "s2"):
        th.add_argument(f"--{name}", help="complex overlap, e.g. 0.2+0.1j")
    th.add_argument("--n", type=int)
    th.add_argument("--N", type=int, help="excitation cutoff of the Fock space")
    th.add_argument("--family", choices=["01", "11"])

    c = sub.add_parser("critical", help="print mu_c(lambda)")
    c.add_argument("--lambda", dest="lam", type=float, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        _merge(args, config, GLOBAL_DEFAULTS)
        if args.command == "trace":
            _merge(args, config, TRACE_DEFAULTS)
            return cmd_trace(args)
        if args.command == "tables":
            return cmd_tables(args)
        if args.command == "threelevel":
            _merge(args, config, THREE_DEFAULTS)
            return cmd_threelevel(args)
        _merge(args, config, {"lam": 0.1})
        return cmd_critical(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except AtlasError as exc:
        print(f"aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
