"""Command-line entry point: ``normplap <command> [options]``.

Commands: radial, solve, verify, decide, counterexample.  Options may also
come from a key=value file (``--config FILE``); keys are the long option names
without dashes, plus ``command``.  Exit status: 0 success, 1 NoSolution or
violations, 2 errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .operators import PValue, c_p
from .profiles import QProfile, parse_expression
from .radial import RadialSolution, radial_neumann, radial_value

EXIT_OK, EXIT_FLAGGED, EXIT_ERROR = 0, 1, 2

__all__ = ["main", "build_parser", "parse_domain", "read_config", "dumps_json", "ConfigError"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- serialization

def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    return s if any(ch in s for ch in ".e") else s + ".0"


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return json.dumps(_num(x)) if not math.isfinite(x) else _num(x)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON with insertion-ordered keys and floats written with 17 significant digits."""
    return _json(obj, indent, 0) + "\n"


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _emit(obj, path: Optional[str]) -> None:
    text = dumps_json(obj)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------- parsing

def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad number list for {what}: {text!r}") from None


def parse_domain(text: str, xbar: Optional[str] = None) -> geometry.Domain:
    """``ball:R[,cx,cy]`` or ``ellipse:a,b[,cx,cy]``; ``xbar`` as ``x,y``."""
    kind, _, rest = text.partition(":")
    vals = _floats(rest, "domain")
    xb = tuple(_floats(xbar, "xbar")) if xbar else None
    if xb is not None and len(xb) != 2:
        raise ConfigError("xbar needs two coordinates")
    kind = kind.strip().lower()
    if kind == "ball" and len(vals) in (1, 3):
        return geometry.ball(vals[0], tuple(vals[1:3]) or (0.0, 0.0), xb)
    if kind == "ellipse" and len(vals) in (2, 4):
        return geometry.ellipse(vals[0], vals[1], tuple(vals[2:4]) or (0.0, 0.0), xb)
    raise ConfigError(f"cannot parse domain {text!r}; use ball:R[,cx,cy] or ellipse:a,b[,cx,cy]")


def _pvalue(text: str) -> PValue:
    try:
        return PValue.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _field_function(text: str):
    f = parse_expression(text, ("x", "y"))
    return lambda x, y: np.asarray(f(x, y), dtype=float) * np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normplap", description="Normalized p-Laplacian overdetermined problems.")
    ap.add_argument("--config", help="key=value file with the command and its options")
    sub = ap.add_subparsers(dest="command")

    def common(sp, domain=True):
        sp.add_argument("--p", type=_pvalue, required=True, help="exponent in [1, inf]; spell infinity as 'inf'")
        sp.add_argument("--n", type=int, default=2, help="space dimension (default 2)")
        if domain:
            sp.add_argument("--domain", default="ball:1", help="ball:R[,cx,cy] or ellipse:a,b[,cx,cy]")
            sp.add_argument("--xbar", default=None, help="distinguished point x,y (default: domain centre)")

    sp = sub.add_parser("radial", help="radial solution on a ball: field CSV and Neumann value")
    common(sp, domain=False)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=None, help="grid spacing of the CSV (default R/32)")
    sp.add_argument("--out", default="radial_field.csv")

    sp = sub.add_parser("solve", help="grid solve of the Dirichlet problem")
    common(sp)
    sp.add_argument("--h", type=float, default=1.0 / 64)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--f", default="1", help="right-hand side, expression in x, y")
    sp.add_argument("--g", default="0", help="boundary datum, expression in x, y")
    sp.add_argument("--method", choices=("policy", "jacobi"), default="policy")
    sp.add_argument("--out", default="solution.csv", help="field CSV (x, y, u)")
    sp.add_argument("--report", default=None, help="also write the report JSON here")

    sp = sub.add_parser("verify", help="viscosity checks for closed-form candidates")
    common(sp)
    sp.add_argument("--candidate", choices=("radial", "zero", "flat"), default="radial",
                    help="radial u_R on the domain's inscribed ball, zero, or flat u = 1 - x")
    sp.add_argument("--mode", choices=("sub", "super", "solution", "neumann", "degenerate"), default="solution")
    sp.add_argument("--f", type=float, default=1.0)
    sp.add_argument("--q", default=None, help="Neumann profile q(r) for mode neumann (default c_p r)")
    sp.add_argument("--band", type=float, default=0.25, help="band width for mode degenerate")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--report", default=None)

    sp = sub.add_parser("decide", help="verdict for a Neumann profile q(r) or q(r, h)")
    common(sp)
    sp.add_argument("--q", required=True, help="expression in r (radial) or r and h (curvature form)")
    sp.add_argument("--discontinuous", action="store_true", help="do not assume q continuous")
    sp.add_argument("--report", default=None)

    sp = sub.add_parser("counterexample", help="solve on an ellipse, build q by symmetry, check it")
    common(sp)
    sp.set_defaults(domain="ellipse:0.8,1.2")
    sp.add_argument("--h", type=float, default=1.0 / 64)
    sp.add_argument("--samples", type=int, default=65)
    sp.add_argument("--out", default="q_profile.csv", help="CSV (r, q, spread)")
    sp.add_argument("--report", default=None)
    return ap


def read_config(path: str) -> list[str]:
    """Turn a key=value file into an argument list; unknown keys are rejected later by argparse."""
    command = None
    args: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            if key == "command":
                command = val
            elif key == "discontinuous":
                if val.lower() in ("1", "true", "yes"):
                    args.append("--discontinuous")
            else:
                args += [f"--{key}", val]
    if command is None:
        raise ConfigError(f"{path}: missing 'command' key")
    return [command] + args


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    ap = build_parser()
    argv = list(argv)
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise ConfigError("--config needs a file name")
        from_file = read_config(argv[i + 1])
        rest = argv[:i] + argv[i + 2:]
        # flags on the command line override the file
        if rest and rest[0] in ("radial", "solve", "verify", "decide", "counterexample"):
            if rest[0] != from_file[0]:
                raise ConfigError(f"command {rest[0]!r} conflicts with config command {from_file[0]!r}")
            rest = rest[1:]
        argv = from_file + rest
    ns, unknown = ap.parse_known_args(argv)
    if unknown:
        raise ConfigError(f"unknown option(s): {' '.join(unknown)}")
    if ns.command is None:
        raise ConfigError("no command given; choose radial, solve, verify, decide or counterexample")
    return ns


# ---------------------------------------------------------------- commands

def _cmd_radial(ns) -> int:
    s = RadialSolution(ns.p, ns.n, ns.R)
    h = ns.h or ns.R / 32
    k = int(math.floor(ns.R / h))
    ax = h * np.arange(-k, k + 1)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    keep = X**2 + Y**2 <= ns.R**2
    pts = np.zeros((int(keep.sum()), ns.n))
    pts[:, 0], pts[:, 1] = X[keep], Y[keep]
    vals = radial_value(s, pts)
    header = [f"x{i + 1}" for i in range(ns.n)] + ["u"] if ns.n > 2 else ["x", "y", "u"]
    _write_csv(ns.out, header, (tuple(p) + (v,) for p, v in zip(pts, vals)))
    sys.stdout.write(f"neumann = {_num(radial_neumann(ns.p, ns.n, ns.R))}\n")
    return EXIT_OK


def _cmd_solve(ns) -> int:
    from .solver import solve_dirichlet

    d = parse_domain(ns.domain, ns.xbar)
    if ns.n != 2:
        raise ConfigError("the grid solver is two-dimensional; use --n 2")
    fld, rep = solve_dirichlet(d, ns.p, _field_function(ns.f), _field_function(ns.g), ns.h, ns.tol, ns.method)
    X = fld.interior_points()
    _write_csv(ns.out, ["x", "y", "u"], ((x, y, u) for (x, y), u in zip(X, fld.interior_values)))
    _emit(rep.to_json_dict(), ns.report)
    return EXIT_OK if rep.converged else EXIT_FLAGGED


def _cmd_verify(ns) -> int:
    from . import viscosity as vc

    d = parse_domain(ns.domain, ns.xbar)
    R1, _ = geometry.radii(d)
    if ns.candidate == "radial":
        c = vc.radial_candidate(ns.p, ns.n, R1, d.xbar if ns.n == 2 else None)
        region = d if ns.n == 2 else vc.NBall(R1, ns.n)
    elif ns.candidate == "zero":
        c, region = vc.constant_candidate(0.0, ns.n), d if ns.n == 2 else vc.NBall(R1, ns.n)
    else:
        if ns.n != 2:
            raise ConfigError("the flat candidate is two-dimensional")
        c, region = vc.linear_candidate([-1.0, 0.0], 1.0), d
    if ns.mode == "neumann":
        q = QProfile.from_expression(ns.q) if ns.q else QProfile.radial(lambda r: c_p(ns.p, ns.n) * r)
        rep = vc.check_neumann(c, d, q, ns.p, ns.n)
        out = rep.to_json_dict()
    elif ns.mode == "degenerate":
        rep = vc.check_degenerate_relation(c, region, ns.band)
        out = rep.to_json_dict()
    else:
        pts = vc.sample_points(region, ns.samples)
        rep = vc.check_interior(c, ns.p, ns.f, pts, ns.mode)
        out = rep.to_json_dict()
    _emit(out, ns.report)
    return EXIT_OK if rep.passed else EXIT_FLAGGED


def _cmd_decide(ns) -> int:
    from .verdict import decide_theorem1, decide_theorem2

    d = parse_domain(ns.domain, ns.xbar)
    q = QProfile.from_expression(ns.q)
    if ns.discontinuous:
        q = QProfile(q.func, q.kind, False, q.monotone_in_h, q.interval, q.table, q.label)
    v = decide_theorem2(q, ns.n, d) if q.is_curvature else decide_theorem1(q, ns.p, ns.n, d)
    out = {"q": ns.q, "p": str(ns.p), "n": ns.n, "domain": ns.domain}
    out.update(v.to_json_dict())
    _emit(out, ns.report)
    return EXIT_FLAGGED if v.outcome == "NoSolution" else EXIT_OK


def _cmd_counterexample(ns) -> int:
    from .solver import solve_dirichlet
    from .verdict import build_symmetric_q, check_necessary_inequalities

    d = parse_domain(ns.domain, ns.xbar)
    fld, rep = solve_dirichlet(d, ns.p, 1.0, 0.0, ns.h)
    sq = build_symmetric_q(fld, d, ns.samples)
    _write_csv(ns.out, ["r", "q", "spread"], sq.csv_rows())
    ineq = check_necessary_inequalities(fld, sq.profile, ns.p, ns.n, d)
    out = {
        "solve": rep.to_json_dict(),
        "max_spread": float(sq.spread.max()),
        "spread_tolerance": sq.tolerance,
        "necessary_inequalities": ineq.to_json_dict(),
    }
    _emit(out, ns.report)
    return EXIT_OK if (ineq.passed and rep.converged) else EXIT_FLAGGED


_COMMANDS = {
    "radial": _cmd_radial,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "decide": _cmd_decide,
    "counterexample": _cmd_counterexample,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = _parse(argv)
        return _COMMANDS[ns.command](ns)
    except SystemExit as e:  # argparse usage errors
        return EXIT_ERROR if e.code not in (0, None) else EXIT_OK
    except (ValueError, OSError, RuntimeError, TypeError) as e:
        sys.stderr.write(f"normplap: error: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
