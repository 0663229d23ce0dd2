"""A small arithmetic language for sequences and moduli written in config files.

Only literals, the declared variables, ``+ - * / // % **``, unary minus and a
fixed set of functions are accepted; everything else is rejected at parse
time, so evaluating a config never executes arbitrary code.
"""
from __future__ import annotations

import ast
import math
import operator
from fractions import Fraction

import numpy as np

from .exact import EvaluationCeiling

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv, ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}

_NUMPY_FUNCS = {
    "sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs,
    "ceil": np.ceil, "floor": np.floor, "min": np.minimum, "max": np.maximum,
}


def _exact_unary(f):
    def g(x):
        return f(float(x))
    return g


_EXACT_FUNCS = {
    "sqrt": _exact_unary(math.sqrt), "exp": _exact_unary(math.exp), "log": _exact_unary(math.log),
    "abs": abs, "ceil": math.ceil, "floor": math.floor, "min": min, "max": max,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
MAX_POWER = 64


class ExpressionError(ValueError):
    pass


class Expression:
    """A parsed expression over a fixed set of variable names."""

    def __init__(self, text, variables=("n",)):
        if isinstance(text, bool) or not isinstance(text, (str, int, float)):
            raise ExpressionError(f"expected an expression, got {text!r}")
        self.text = str(text).strip()
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.text!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __str__(self):
        return self.text

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"only numeric literals are allowed, got {node.value!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in CONSTANTS:
                allowed = ", ".join(self.variables + tuple(CONSTANTS))
                raise ExpressionError(f"unknown name {node.id!r} (allowed: {allowed})")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _NUMPY_FUNCS:
                raise ExpressionError(f"only {sorted(_NUMPY_FUNCS)} may be called")
            if node.keywords or not node.args:
                raise ExpressionError(f"{node.func.id}() takes positional arguments only")
            for a in node.args:
                self._check(a)
        else:
            raise ExpressionError(f"{type(node).__name__} is not allowed in expressions")

    # numpy evaluation -----------------------------------------------------
    def vector(self, **env):
        """Float evaluation; variables may be arrays."""
        env = {k: np.asarray(v, dtype=np.float64) for k, v in env.items()}
        return self._eval(self._tree, env, _NUMPY_FUNCS, float)

    # exact evaluation -----------------------------------------------------
    def exact(self, **env):
        """Rational arithmetic where possible (``/`` of integers stays exact)."""
        env = {k: Fraction(v) for k, v in env.items()}
        return self._eval(self._tree, env, _EXACT_FUNCS, Fraction)

    def natural(self, **env) -> int:
        """Exact value rounded up and clamped at 0 (how moduli are read)."""
        try:
            v = self.exact(**env)
            return max(0, math.ceil(v))
        except OverflowError as exc:
            raise EvaluationCeiling(f"{self.text} overflows at {env}") from exc

    def _eval(self, node, env, funcs, lit):
        if isinstance(node, ast.Constant):
            if lit is float or isinstance(node.value, int):
                return lit(node.value)
            return Fraction(repr(node.value))  # 0.3 means 3/10
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            a = self._eval(node.left, env, funcs, lit)
            b = self._eval(node.right, env, funcs, lit)
            if isinstance(node.op, ast.Pow):
                if lit is Fraction and isinstance(b, Fraction) and b.denominator == 1:
                    if abs(b) > MAX_POWER and abs(a) != 1:
                        raise ExpressionError(f"exponent {b} too large")
                    return a ** int(b)
                if lit is Fraction:
                    return float(a) ** float(b)
            return _BINOPS[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env, funcs, lit))
        args = [self._eval(a, env, funcs, lit) for a in node.args]
        name = node.func.id
        if name in ("min", "max") and lit is float:
            out = args[0]
            for a in args[1:]:
                out = funcs[name](out, a)
            return out
        return funcs[name](*args)
