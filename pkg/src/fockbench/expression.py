"""Restricted arithmetic expressions for weights and densities.

Grammar (Python syntax, ``^`` accepted as a synonym for ``**``)::

    expr   := number | name | expr op expr | -expr | func(expr)
    op     := + - * / **
    name   := r | x | y | pi | e | w
    func   := exp | log | sqrt | abs | sin | cos

``r`` is ``|z|``, ``x`` and ``y`` are the real and imaginary parts of ``z``,
and ``w`` (densities only) is the value of the active weight at ``z``.
Anything else is rejected at parse time.
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigError

_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = {"r", "x", "y", "w"}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:
    """A parsed expression; call with a complex array (and optionally ``w``)."""

    def __init__(self, text: str, allow_weight: bool = False):
        self.text = text
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self.names: set[str] = set()
        self._check(tree.body)
        if "w" in self.names and not allow_weight:
            raise ConfigError(f"expression {text!r} may not reference the weight 'w'")
        self._tree = tree.body

    @property
    def radial(self) -> bool:
        return not (self.names & {"x", "y"})

    @property
    def uses_weight(self) -> bool:
        return "w" in self.names

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator {type(node.op).__name__} not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigError(f"unary operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"only numeric literals allowed in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in _VARS and node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.text!r}")
            if node.id in _VARS:
                self.names.add(node.id)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"unknown function in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take exactly one argument in {self.text!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            return env[node.id]
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def evaluate(self, z, w=None):
        z = np.asarray(z, dtype=complex)
        env = {"r": np.abs(z), "x": z.real, "y": z.imag, "w": w}
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), z.shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"
