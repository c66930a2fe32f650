"""Command-line front end: hermbasket <subcommand> [options].

Exit codes: 0 success, 2 invalid input, 3 moment matching failed, 4 I/O error.
Results go to standard output (or --out); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION, __version__, bench, fixture_path, hedgesim, mc, pricer
from .hermite import MatchFailure
from .model import ValidationError, load_basket, validate_basket
from .moments import MomentOverflow, target_moments

EXIT_OK, EXIT_INVALID, EXIT_MATCH, EXIT_IO = 0, 2, 3, 4
GBM_BASKETS = [f"basket{i}" for i in range(1, 7)]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- helpers ----------------------------------------------------------------------


def _resolve_config(value: str) -> Path:
    """A file path, or the name of a bundled fixture such as ``basket1``."""
    path = Path(value)
    if path.exists():
        return path
    try:
        return Path(str(fixture_path(value)))
    except FileNotFoundError:
        raise CliError(f"config not found: {value}", EXIT_IO) from None


def _load(value: str):
    path = _resolve_config(value)
    try:
        return path, validate_basket(load_basket(path))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid config {path}: {exc}", EXIT_INVALID) from exc


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _manifest(args, config=None, methods=None, outputs=(), started=None, deterministic=False) -> dict:
    out = {
        "tool": "hermbasket",
        "version": __version__,
        "schema": SCHEMA_VERSION,
        "subcommand": args.command,
        "config": str(config) if config is not None else None,
        "seed": getattr(args, "seed", None),
        "methods": list(methods) if methods else None,
    }
    if not deterministic:
        out["outputs"] = [str(p) for p in outputs]
        out["wall_time"] = round(time.perf_counter() - started, 3) if started is not None else None
    return out


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _emit(text: str, out: str | None):
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    else:
        sys.stdout.write(text)


def _emit_json(doc: dict, out: str | None):
    _emit(json.dumps(_clean(doc), indent=2) + "\n", out)


def _csv_text(rows: list[dict], manifest: dict) -> str:
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(_clean(manifest), sort_keys=True) + "\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                             for k, v in row.items()})
    return buf.getvalue()


def _write_csv(path: str, rows: list[dict], manifest: dict):
    try:
        Path(path).write_text(_csv_text(rows, manifest))
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _methods(value: str) -> list[str]:
    out = [m.strip() for m in value.split(",") if m.strip()]
    for m in out:
        if m not in pricer.METHODS:
            raise CliError(f"unknown method {m!r}; choose from {', '.join(pricer.METHODS)}", EXIT_INVALID)
    return out


def _plot(kind: str, out_dir: str, *payload) -> list[str]:
    from . import plotting

    try:
        files = getattr(plotting, f"plot_{kind}")(*payload, out_dir)
    except OSError as exc:
        raise CliError(f"cannot write figures to {out_dir}: {exc}", EXIT_IO) from exc
    for f in files:
        print(f"figure: {f}", file=sys.stderr)
    return [str(f) for f in files]


# -- subcommands --------------------------------------------------------------------


def cmd_price(args, started):
    path, spec = _load(args.config)
    quote = pricer.price(spec, args.method)
    doc = {"quote": quote.to_dict()}
    if args.greeks:
        names = pricer.all_parameters(spec) if args.greeks == "all" else args.greeks.split(",")
        doc["greeks"] = [_greek(spec, args.method, u.strip(), quote) for u in names]
    doc["manifest"] = _manifest(args, path, [args.method], [args.out] if args.out else (), started)
    _emit_json(doc, args.out)


def _greek(spec, method, u, quote):
    try:
        return pricer.greek(spec, method, u, quote=quote).to_dict()
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from exc
    except pricer.SingularJacobian as exc:
        return {"parameter": u, "value": None, "mode": "failed", "error": str(exc)}


def cmd_greeks(args, started):
    path, spec = _load(args.config)
    quote = pricer.price(spec, args.method)
    names = pricer.all_parameters(spec) if args.params == "all" else args.params.split(",")
    doc = {
        "price": quote.price,
        "method": args.method,
        "greeks": [_greek(spec, args.method, u.strip(), quote) for u in names],
        "manifest": _manifest(args, path, [args.method], [args.out] if args.out else (), started),
    }
    _emit_json(doc, args.out)


def cmd_moments(args, started):
    path, spec = _load(args.config)
    a = target_moments(spec, "A", args.order)
    b = target_moments(spec, "B", args.order)
    doc = {
        "b0": spec.b0,
        "shifted_strike": spec.shifted_k,
        "forward": a.forward,
        "raw": a.raw,
        "target_A": a.target,
        "target_B": b.target,
        "manifest": _manifest(args, path, None, [args.out] if args.out else (), started),
    }
    _emit_json(doc, args.out)


def cmd_mc(args, started):
    path, spec = _load(args.config)
    cfg = mc.McConfig(paths=args.paths, seed=_seed(args), antithetic=args.antithetic)
    doc = {"price": mc.mc_price(spec, cfg).to_dict()}
    if args.moments:
        est = mc.mc_moments(spec, None, args.moments, cfg)
        doc["moments"] = {"order": est.order, "value": est.value, "std_error": est.std_error,
                          "paths": est.paths}
    doc["manifest"] = _manifest(args, path, None, [args.out] if args.out else (), started)
    _emit_json(doc, args.out)


def cmd_hedge(args, started):
    path, spec = _load(args.config)
    cfg = mc.McConfig(seed=_seed(args))
    report = hedgesim.run_hedge(spec, args.method, args.rebalances, args.paths, cfg,
                                nested_paths=args.nested_paths)
    outputs = [p for p in (args.out, args.csv) if p]
    figures = _plot("hedge", args.plot, report) if args.plot else []
    manifest = _manifest(args, path, [args.method], outputs + figures, started)
    if args.csv:
        rows = [{"path": i, "terminal_error": r.terminal_error, "delta_vol": r.delta_vol,
                 "carried": r.carried} for i, r in enumerate(report.records)]
        summary = report.summary()
        rows.append({"path": "summary", "terminal_error": summary["c10"], "delta_vol": summary["c4"],
                     "carried": summary["carried_steps"]})
        _write_csv(args.csv, rows, _manifest(args, path, [args.method], deterministic=True))
    _emit_json({"report": report.summary(), "manifest": manifest}, args.out)


def cmd_suite(args, started):
    seed = _seed(args)
    methods = _methods(args.methods)
    scenarios = bench.generate_scenarios(bench.ScenarioConfig(args.set, args.count, seed))
    result = bench.evaluate_methods(scenarios, methods, mc.McConfig(seed=seed), paths_oracle=args.paths_oracle)
    rows = result.rows()
    if args.csv:
        _write_csv(args.csv, rows, _manifest(args, None, methods, deterministic=True))
    figures = _plot("suite", args.plot, rows, result.methods) if args.plot else []
    outputs = [p for p in (args.out, args.csv) if p] + figures
    _emit_json({"table": result.table, "manifest": _manifest(args, None, methods, outputs, started)}, args.out)


def cmd_table2(args, started):
    seed = _seed(args)
    methods = _methods(args.methods)
    specs = [validate_basket(load_basket(fixture_path(name))) for name in GBM_BASKETS]
    prices = {m: [] for m in methods}
    for spec in specs:
        for m in methods:
            try:
                prices[m].append(pricer.price(spec, m).price)
            except MatchFailure:
                prices[m].append(math.nan)
    ests = [mc.mc_price(s, mc.McConfig(paths=args.mc_paths, seed=seed)) for s in specs]
    oracles = [bench.OracleResult(e.value, e.std_error, e.paths) for e in ests]
    results = {m: [bench._score(i, m, None if math.isnan(v) else v, oracles[i])
                   for i, v in enumerate(prices[m])] for m in methods}
    crit = bench.criteria(results, oracles, list(range(len(specs))))
    rows = []
    for i in range(len(specs)):
        row = {"basket": i + 1}
        row.update({m: prices[m][i] for m in methods})
        row.update({"MC": ests[i].value, "MC_se": ests[i].std_error})
        rows.append(row)
    if args.csv:
        _write_csv(args.csv, rows, _manifest(args, None, methods, deterministic=True))
    figures = (_plot("table2", args.plot, prices, [e.value for e in ests], [e.std_error for e in ests])
               if args.plot else [])
    outputs = [p for p in (args.out, args.csv) if p] + figures
    if args.json:
        _emit_json({"rows": rows, "criteria": crit, "manifest": _manifest(args, None, methods, outputs, started)},
                   args.out)
        return
    lines = ["basket " + " ".join(f"{m:>9}" for m in methods) + f" {'MC':>9} {'(SE)':>8}"]
    for row in rows:
        lines.append(f"{row['basket']:>6} " + " ".join(f"{row[m]:9.4f}" for m in methods)
                     + f" {row['MC']:9.4f} ({row['MC_se']:.4f})")
    lines.append("    C1 " + " ".join(f"{crit['methods'][m]['c1']:>9d}" for m in methods))
    lines.append("    C3 " + " ".join(f"{crit['methods'][m]['c3']:9.4f}" for m in methods))
    lines.append("# manifest: " + json.dumps(_clean(_manifest(args, None, methods, outputs, started))))
    _emit("\n".join(lines) + "\n", args.out)


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermbasket", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"hermbasket {__version__} (config schema {SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="basket JSON file or bundled fixture name")
        sp.add_argument("--out", help="write the result here instead of standard output")
        sp.add_argument("--json", action="store_true", help="JSON output (default for most commands)")

    sp = sub.add_parser("price", help="Hermite price of a basket call")
    common(sp)
    sp.add_argument("--method", default="4GA", choices=pricer.METHODS)
    sp.add_argument("--greeks", help="comma-separated parameter ids, or 'all'")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("greeks", help="sensitivities of the Hermite price")
    common(sp)
    sp.add_argument("--method", default="4GA", choices=pricer.METHODS)
    sp.add_argument("--params", default="B0", help="comma-separated ids (B0, r, T, sigma:1, ...) or 'all'")
    sp.set_defaults(func=cmd_greeks)

    sp = sub.add_parser("moments", help="raw and normalized basket moments")
    common(sp)
    sp.add_argument("--order", type=int, default=4, choices=(4, 6))
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("mc", help="Monte Carlo price and sample moments")
    common(sp)
    sp.add_argument("--paths", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--moments", type=int, choices=range(1, 7), metavar="K")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("hedge", help="Delta-hedging backtest")
    common(sp)
    sp.add_argument("--method", default="4GA", choices=pricer.METHODS)
    sp.add_argument("--paths", type=int, default=1000)
    sp.add_argument("--rebalances", type=int, default=12)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--nested-paths", type=int, default=0, help="nested MC paths for C5 (0 skips it)")
    sp.add_argument("--csv", help="per-path CSV output")
    sp.add_argument("--plot", metavar="DIR", help="write figures to DIR")
    sp.set_defaults(func=cmd_hedge)

    sp = sub.add_parser("suite", help="random scenario benchmark")
    common(sp, config=False)
    sp.add_argument("--set", type=int, default=1, choices=(1, 2))
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--methods", default="4GA,4GB,6GA,6GB")
    sp.add_argument("--paths-oracle", type=int, help="fixed oracle path count")
    sp.add_argument("--csv", help="per-scenario CSV output")
    sp.add_argument("--plot", metavar="DIR", help="write figures to DIR")
    sp.set_defaults(func=cmd_suite)

    sp = sub.add_parser("table2", help="bundled GBM baskets under every method and MC")
    common(sp, config=False)
    sp.add_argument("--methods", default="4GA,4GB,6GA,6GB")
    sp.add_argument("--mc-paths", type=int, default=4_000_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--csv", help="CSV output")
    sp.add_argument("--plot", metavar="DIR", help="write figures to DIR")
    sp.set_defaults(func=cmd_table2)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    started = time.perf_counter()
    try:
        args.func(args, started)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except MatchFailure as exc:
        print(f"error: moment matching failed: {exc}", file=sys.stderr)
        return EXIT_MATCH
    except (ValidationError, MomentOverflow, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
