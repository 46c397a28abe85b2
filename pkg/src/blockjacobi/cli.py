"""Batch front end: ``blockjacobi <command> [options]``.

Exit codes: 0 success, 2 input or usage error, 3 verification failure,
4 energy rejected by the channel decomposition.  Every float is written with
17 significant digits so that doubles survive a round trip through text.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings

import numpy as np

from .jacobi import ModelError, direct_spectrum, gershgorin_bounds, load_model
from .random import (AnomalyWarning, BandEdgeError, EnsembleError, birkhoff_ids_lyap,
                     channel_decomposition, ids_by_counting, load_ensemble, lyap_qr_oracle,
                     perturbation_study)
from .rotation import (BoundaryAmbiguity, _boundary_shift, count_below, spectrum_by_rotation,
                       sweep, wronskian_multiplicity)
from .verify import PROPERTIES, run_suite

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_REJECTED = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---- output -------------------------------------------------------------------

def fmt_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_value(v, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "null" if not math.isfinite(float(v)) else "%.17g" % float(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(x, indent, level + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        if len(v) == 0:
            return "[]"
        items = [f"{pad}{_json_value(x, indent, level + 1)}" for x in v]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with 17-digit floats and non-finite values written as null."""
    return _json_value(obj, indent, 0) + "\n"


def table_text(header: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "json":
        return dumps_json([dict(zip(header, r)) for r in rows])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else fmt_number(c) for c in r])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---- configuration ------------------------------------------------------------

def energies(args) -> np.ndarray:
    if args.energy:
        return np.array(sorted(args.energy), dtype=float)
    if args.emin is None or args.emax is None:
        raise UsageError("give --energy or both --emin and --emax")
    if not args.emin < args.emax:
        raise UsageError("need emin < emax")
    if args.grid < 2:
        raise UsageError("grid needs at least 2 points")
    return np.linspace(args.emin, args.emax, args.grid)


def check_common(args) -> None:
    if getattr(args, "realizations", 1) < 1:
        raise UsageError("realizations must be at least 1")
    if getattr(args, "tol", 1.0) is not None and getattr(args, "tol", 1.0) <= 0:
        raise UsageError("tolerances must be positive")
    if getattr(args, "n", 1) < 1:
        raise UsageError("n must be at least 1")


def _status(spec, E: float) -> str:
    with warnings.catch_warnings():
        warnings.simplefilter("error", AnomalyWarning)
        try:
            channel_decomposition(spec.V, spec.T, E)
        except BandEdgeError:
            return "band_edge"
        except AnomalyWarning:
            return "anomaly"
    return "ok"


# ---- commands -----------------------------------------------------------------

def cmd_spectrum(args) -> int:
    model = load_model(args.model)
    lo, hi = gershgorin_bounds(model)
    radius = max(abs(lo), abs(hi))
    tol = args.tol * max(1.0, radius)
    shift = _boundary_shift(args.phi)
    target = model.with_xi(model.xi + shift * np.eye(model.L))
    if args.phi == np.pi:
        entries, _ = spectrum_by_rotation(model)
        found = [(e.energy, e.multiplicity, e.flagged) for e in entries]
    else:
        tracks = sweep(model, phi=args.phi)
        found = []
        for c in tracks.crossings:
            k = wronskian_multiplicity(target, c.energy, 4e-12 * max(1.0, radius) + c.width)
            found.append((c.energy, c.multiplicity, k != c.multiplicity))
    oracle = direct_spectrum(target)
    clusters = direct_spectrum(target, multiplicities=True)
    starts = set(np.cumsum([0] + [m for _, m in clusters])[:-1].tolist())
    rows, ok, pos = [], True, 0
    for i, (E, mult, flagged) in enumerate(found):
        block = oracle[pos:pos + mult]
        if len(block) == mult:
            oe = float(np.mean(block))
            diff = float(np.max(np.abs(block - E)))
            same = pos in starts and (pos + mult in starts or pos + mult == len(oracle))
        else:
            oe, diff, same = float("nan"), float("nan"), False
        ok &= bool(same and not flagged and diff <= tol)
        rows.append([i, E, mult, oe, diff])
        pos += mult
    ok &= pos == len(oracle)
    emit(table_text(["index", "energy", "multiplicity", "oracle_energy", "abs_diff"], rows,
                    args.format), args.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_count(args) -> int:
    model = load_model(args.model)
    shift = _boundary_shift(args.phi)
    oracle = direct_spectrum(model.with_xi(model.xi + shift * np.eye(model.L)))
    rows, ok = [], True
    for E in energies(args):
        ref = int(np.sum(oracle <= E))
        try:
            c = count_below(model, float(E), args.phi)
            status = "ok" if c == ref else "mismatch"
        except BoundaryAmbiguity:
            c, status = float("nan"), "ambiguous"
        ok &= status != "mismatch"
        rows.append([E, c, ref, status])
    emit(table_text(["energy", "count", "oracle_count", "status"], rows, args.format), args.out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_ids(args) -> int:
    spec = load_ensemble(args.ensemble)
    rows = []
    for E in energies(args):
        status = _status(spec, E)
        c = ids_by_counting(spec, E, args.n, args.realizations, args.seed)
        b = birkhoff_ids_lyap(spec, E, args.n, args.seed, realizations=args.realizations).ids
        rows.append([E, c.mean, c.stderr, "counting", status])
        rows.append([E, b.mean, b.stderr, "birkhoff", status])
    emit(table_text(["energy", "estimate", "stderr", "method", "status"], rows, args.format), args.out)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    spec = load_ensemble(args.ensemble)
    rows = []
    for E in energies(args):
        status = _status(spec, E)
        b = birkhoff_ids_lyap(spec, E, args.n, args.seed, realizations=args.realizations).lyap
        q = lyap_qr_oracle(spec, E, args.n, args.seed, realizations=args.realizations)
        rows.append([E, b.mean, b.stderr, "birkhoff", status])
        rows.append([E, q.mean, q.stderr, "qr", status])
    emit(table_text(["energy", "estimate", "stderr", "method", "status"], rows, args.format), args.out)
    return EXIT_OK


def cmd_channels(args) -> int:
    spec = load_ensemble(args.ensemble)
    if not args.energy or len(args.energy) != 1:
        raise UsageError("channels needs exactly one --energy")
    E = args.energy[0]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AnomalyWarning)
        ch = channel_decomposition(spec.V, spec.T, E)
    rows = [[k, "hyperbolic", float("nan"), kap] for k, kap in enumerate(ch.kappa)]
    rows += [[ch.L_h + k, "elliptic", eta, 0.0] for k, eta in enumerate(ch.eta)]
    if args.format == "json":
        emit(dumps_json({
            "energy": E, "L_h": ch.L_h, "L_e": ch.L_e,
            "kappa": list(ch.kappa), "eta": list(ch.eta),
            "g_h": ch.g_h, "g_e": ch.g_e, "residual": ch.residual,
            "anomaly": bool(caught),
        }), args.out)
    else:
        emit(table_text(["channel", "kind", "eta", "kappa"], rows, "csv"), args.out)
    return EXIT_OK


def cmd_perturb(args) -> int:
    spec = load_ensemble(args.ensemble)
    if not args.lambdas:
        raise UsageError("at least one --lambda is required")
    if not args.energy or len(args.energy) != 1:
        raise UsageError("perturb needs exactly one --energy")
    report = perturbation_study(spec.with_lambda, args.energy[0], args.lambdas, args.n,
                                args.realizations, args.seed, comparator_N=args.comparator_n)
    data = report.to_dict()
    data["slope_min"] = args.slope_min
    passed = bool(np.isfinite(report.slope) and report.slope >= args.slope_min)
    data["pass"] = passed
    emit(dumps_json(data), args.out)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_verify(args) -> int:
    only = args.filter or None
    results = run_suite(args.seed, only, args.poison)
    passed = all(r.passed for r in results)
    emit(dumps_json({"seed": args.seed, "poison": args.poison,
                     "properties": [r.to_dict() for r in results], "pass": passed}), args.out)
    return EXIT_OK if passed else EXIT_VERIFY


# ---- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockjacobi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, source):
        if source == "model":
            sp.add_argument("--model", required=True, metavar="PATH")
        elif source == "ensemble":
            sp.add_argument("--ensemble", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, default=0)

    def grid(sp):
        sp.add_argument("--energy", type=float, action="append")
        sp.add_argument("--emin", type=float)
        sp.add_argument("--emax", type=float)
        sp.add_argument("--grid", type=int, default=101)

    def sampling(sp, n=20_000, realizations=8):
        sp.add_argument("--n", type=int, default=n)
        sp.add_argument("--realizations", type=int, default=realizations)

    sp = sub.add_parser("spectrum", help="eigenvalues from phase crossings, checked densely")
    common(sp, "model")
    sp.add_argument("--phi", type=float, default=np.pi)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("count", help="eigenvalue counts below given energies")
    common(sp, "model")
    grid(sp)
    sp.add_argument("--phi", type=float, default=np.pi)
    sp.set_defaults(func=cmd_count)

    sp = sub.add_parser("ids", help="integrated density of states of an ensemble")
    common(sp, "ensemble")
    grid(sp)
    sampling(sp)
    sp.set_defaults(func=cmd_ids)

    sp = sub.add_parser("lyapunov", help="Lyapunov sums by Birkhoff averages and by QR")
    common(sp, "ensemble")
    grid(sp)
    sampling(sp)
    sp.set_defaults(func=cmd_lyapunov)

    sp = sub.add_parser("channels", help="elliptic/hyperbolic channels of the clean blocks")
    common(sp, "ensemble")
    sp.add_argument("--energy", type=float, action="append")
    sp.set_defaults(func=cmd_channels)

    sp = sub.add_parser("perturb", help="quadratic-error study against the label average")
    common(sp, "ensemble")
    sp.add_argument("--energy", type=float, action="append")
    sp.add_argument("--lambda", dest="lambdas", type=float, action="append", default=[])
    sampling(sp, n=100_000, realizations=20)
    sp.add_argument("--comparator-n", type=int, default=2_000_000)
    sp.add_argument("--slope-min", type=float, default=1.5)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("verify", help="run the invariant suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--filter", action="append", choices=sorted(PROPERTIES), metavar="NAME")
    sp.add_argument("--poison", action="store_true")
    sp.add_argument("--out", metavar="PATH")
    sp.set_defaults(func=cmd_verify, format="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        check_common(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BandEdgeError as exc:
        msg = str(exc)
        if "Jordan block / band edge" not in msg:
            msg = f"Jordan block / band edge: {msg}"
        print(msg, file=sys.stderr)
        return EXIT_REJECTED
    except (OSError, json.JSONDecodeError, ModelError, EnsembleError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
