"""Neumann profiles q(r) and q(r, h), and a small arithmetic-expression parser."""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "QProfile",
    "ProfileError",
    "ProfileDomainError",
    "ExpressionError",
    "parse_expression",
    "expression_variables",
]


class ProfileError(ValueError):
    """q produced a non-finite value or is malformed."""


class ProfileDomainError(ProfileError):
    """q was evaluated outside the interval it is defined on."""


class ExpressionError(ValueError):
    pass


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_CONSTANTS = {"pi": math.pi}
# typographic spellings accepted on the command line
_TRANSLATE = str.maketrans({"×": "*", "·": "*", "÷": "/", "−": "-", "^": "#"})


def _normalize(text: str) -> str:
    # '^' becomes '**'; a placeholder keeps '**' typed by the user intact
    return text.translate(_TRANSLATE).replace("#", "**")


def expression_variables(text: str) -> set[str]:
    try:
        tree = ast.parse(_normalize(text), mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"cannot parse {text!r}: {e.msg}") from None
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - set(_CONSTANTS)


def parse_expression(text: str, variables: Sequence[str] = ("r",)) -> Callable:
    """Compile an arithmetic expression over ``variables`` into a function.

    Supports numbers, + - * / ^ (also × ÷ and the Unicode minus), parentheses
    and the constant ``pi``.  The result accepts scalars or numpy arrays.
    """
    try:
        tree = ast.parse(_normalize(text), mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"cannot parse {text!r}: {e.msg}") from None
    names = tuple(variables)

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            v = np.float64(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            if node.id in names:
                key = node.id
                return lambda env: env[key]
            if node.id in _CONSTANTS:
                v = _CONSTANTS[node.id]
                return lambda env: v
            raise ExpressionError(f"unknown name {node.id!r}; allowed: {', '.join(names)}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            a, b = build(node.left), build(node.right)
            return lambda env: op(a(env), b(env))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            op = _UNOPS[type(node.op)]
            a = build(node.operand)
            return lambda env: op(a(env))
        raise ExpressionError(f"unsupported syntax in {text!r}: {type(node).__name__}")

    ev = build(tree)

    def f(*args):
        if len(args) != len(names):
            raise TypeError(f"expected {len(names)} arguments ({', '.join(names)})")
        # numpy scalars turn 1/0 and overflow into inf/nan instead of raising
        env = {k: np.asarray(v, dtype=float) if not np.isscalar(v) else np.float64(v) for k, v in zip(names, args)}
        with np.errstate(all="ignore"):
            out = ev(env)
        return out if not np.isscalar(out) else float(out)

    f.__name__ = "expr"
    f.__doc__ = text
    return f


@dataclass(frozen=True)
class QProfile:
    """A prescribed Neumann datum.

    ``kind`` is ``"radial"`` (q(r) in closed form), ``"table"`` (samples on
    an interval, linearly interpolated) or ``"curvature"`` (closed-form q(r, h),
    h the mean curvature of the boundary).
    """

    func: Callable
    kind: str = "radial"
    continuous: bool = True
    monotone_in_h: Optional[bool] = None
    interval: Optional[tuple[float, float]] = None
    table: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)
    label: str = ""

    @classmethod
    def radial(cls, func: Callable, continuous: bool = True, label: str = "") -> "QProfile":
        return cls(func, "radial", continuous, None, None, None, label or getattr(func, "__doc__", "") or "")

    @classmethod
    def curvature(cls, func: Callable, monotone_in_h: Optional[bool] = None, label: str = "") -> "QProfile":
        return cls(func, "curvature", True, monotone_in_h, None, None, label)

    @classmethod
    def from_table(cls, r, q, interval: Optional[tuple[float, float]] = None, label: str = "table") -> "QProfile":
        r = np.asarray(r, dtype=float)
        q = np.asarray(q, dtype=float)
        if r.ndim != 1 or r.shape != q.shape or r.size == 0:
            raise ProfileError("table needs matching 1-D arrays of radii and values")
        if r.size > 1 and np.any(np.diff(r) <= 0):
            raise ProfileError("table radii must be strictly increasing")
        if not np.all(np.isfinite(q)):
            raise ProfileError("table values must be finite")
        lo, hi = (float(r[0]), float(r[-1])) if interval is None else (float(interval[0]), float(interval[1]))
        if r[0] < lo or r[-1] > hi:
            raise ProfileError(f"table radii [{r[0]}, {r[-1]}] leave the declared interval [{lo}, {hi}]")
        span = max(abs(hi), 1.0) * 1e-12

        def f(x):
            x = np.asarray(x, dtype=float)
            if np.any(x < r[0] - span) or np.any(x > r[-1] + span):
                raise ProfileDomainError(f"q is tabulated on [{r[0]}, {r[-1]}] only")
            if r.size == 1:
                out = np.full(x.shape, q[0])
            else:
                out = np.interp(x, r, q)
            return float(out) if out.ndim == 0 else out

        return cls(f, "table", True, None, (lo, hi), (r, q), label)

    @classmethod
    def from_expression(cls, text: str) -> "QProfile":
        used = expression_variables(text)
        extra = used - {"r", "h"}
        if extra:
            raise ExpressionError(f"unknown variable(s) {sorted(extra)}; q may use r and h")
        if "h" in used:
            return cls.curvature(parse_expression(text, ("r", "h")), label=text)
        return cls.radial(parse_expression(text, ("r",)), label=text)

    @property
    def is_curvature(self) -> bool:
        return self.kind == "curvature"

    def __call__(self, r, h=None):
        if self.is_curvature:
            if h is None:
                raise ProfileError("curvature profile needs both r and h")
            out = self.func(r, h)
        else:
            out = self.func(r)
        arr = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ProfileError(f"q is not finite at r={r!r}" + (f", h={h!r}" if h is not None else ""))
        return float(arr) if arr.ndim == 0 else arr
