"""Vectorised arithmetic expressions in x1, x2 (aliases x, y) read from config files.

Only numeric literals, the two coordinates, a fixed set of numpy functions and
arithmetic/comparison operators are accepted; anything else is rejected
before evaluation.
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .errors import ConfigError

_FUNCS = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "sinh", "cosh",
                 "arctan", "arctan2", "minimum", "maximum", "where", "sign", "hypot", "clip")
}
_CONSTS = {"pi": math.pi, "e": math.e}
_VARS = ("x1", "x2", "x", "y")

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
            ast.Compare, ast.IfExp, ast.Tuple, ast.List,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.FloorDiv, ast.USub, ast.UAdd,
            ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq)


class Expr:
    """Compiled expression; calling it with coordinate arrays returns an array (or a tuple)."""

    def __init__(self, source: str):
        if not isinstance(source, str) or not source.strip():
            raise ConfigError("expression must be a non-empty string")
        self.source = source.strip()
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED):
                raise ConfigError(f"disallowed construct {type(node).__name__} in {source!r}")
            if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                    and node.id not in _VARS:
                raise ConfigError(f"unknown name {node.id!r} in {source!r}")
            if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
                raise ConfigError(f"only whitelisted functions may be called in {source!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"only numeric literals are allowed in {source!r}")
        self._code = compile(tree, "<expr>", "eval")

    def __call__(self, x1, x2):
        env = {"__builtins__": {}, **_FUNCS, **_CONSTS, "x1": x1, "x2": x2, "x": x1, "y": x2}
        with np.errstate(all="ignore"):
            out = eval(self._code, env)  # noqa: S307 - the tree was whitelisted above
        if isinstance(out, (tuple, list)):
            return tuple(np.broadcast_to(np.asarray(o, float), np.shape(x1)) for o in out)
        return np.broadcast_to(np.asarray(out, float), np.shape(x1))

    def __repr__(self):
        return f"Expr({self.source!r})"


def parse_scalar(value):
    """Number or expression string -> constant or callable."""
    if isinstance(value, bool):
        raise ConfigError("booleans are not numbers here")
    if isinstance(value, (int, float)):
        return float(value)
    return Expr(value)


def parse_vector(value):
    """A pair of numbers/expressions, or one expression yielding a pair -> callable."""
    if isinstance(value, str):
        e = Expr(value)
        probe = e(np.zeros(1), np.zeros(1))
        if not (isinstance(probe, tuple) and len(probe) == 2):
            raise ConfigError(f"vector expression {value!r} must produce two components")
        return e
    if isinstance(value, (list, tuple)) and len(value) == 2:
        parts = [parse_scalar(v) for v in value]

        def vec(x1, x2):
            return tuple(p(x1, x2) if callable(p) else np.full(np.shape(x1), p) for p in parts)

        vec.source = [getattr(p, "source", p) for p in parts]
        return vec
    raise ConfigError("vector fields need two components")
