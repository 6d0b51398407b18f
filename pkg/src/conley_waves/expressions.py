"""Small closed-form expression language used by run configs.

Grammar: numbers, the variables ``x`` and ``u``, the constants ``pi`` and ``e``,
binary ``+ - * /``, powers written ``^`` or ``**``, unary minus and the
functions exp, tanh, arctan, sech, cosh, sinh, sqrt, abs.  Anything else is
rejected with the column of the offending token.
"""

from __future__ import annotations

import ast
from functools import cached_property

import numpy as np
import sympy as sp

X, U = sp.symbols("x u", real=True)
_W = sp.Symbol("w", real=True)

_FUNCTIONS = {
    "exp": sp.exp,
    "tanh": sp.tanh,
    "arctan": sp.atan,
    "sech": sp.sech,
    "cosh": sp.cosh,
    "sinh": sp.sinh,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
}
_CONSTANTS = {"pi": sp.pi, "e": sp.E}
_VARIABLES = {"x": X, "u": U}

_NUMPY_EXTRAS = {"sech": lambda z: 1.0 / np.cosh(z)}


class ExpressionError(ValueError):
    def __init__(self, message: str, source: str, column: int = 0):
        super().__init__(f"{message} (column {column + 1} of {source!r})")
        self.source = source
        self.column = column
        self.reason = message


def _build(node: ast.AST, source: str) -> sp.Expr:
    col = getattr(node, "col_offset", 0)
    if isinstance(node, ast.Expression):
        return _build(node.body, source)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError("only numeric literals are allowed", source, col)
        return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _VARIABLES:
            return _VARIABLES[node.id]
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r}", source, col)
    if isinstance(node, ast.UnaryOp):
        operand = _build(node.operand, source)
        if isinstance(node.op, ast.USub):
            return -operand
        if isinstance(node.op, ast.UAdd):
            return operand
        raise ExpressionError("unsupported unary operator", source, col)
    if isinstance(node, ast.BinOp):
        left, right = _build(node.left, source), _build(node.right, source)
        op = node.op
        if isinstance(op, ast.Add):
            return left + right
        if isinstance(op, ast.Sub):
            return left - right
        if isinstance(op, ast.Mult):
            return left * right
        if isinstance(op, ast.Div):
            return left / right
        if isinstance(op, ast.Pow):
            return left**right
        raise ExpressionError("unsupported operator", source, col)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            name = getattr(node.func, "id", "?")
            raise ExpressionError(f"unknown function {name!r}", source, col)
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument", source, col)
        return _FUNCTIONS[node.func.id](_build(node.args[0], source))
    raise ExpressionError(f"unsupported syntax {type(node).__name__}", source, col)


def _caret_to_pow(source: str) -> tuple[str, list[int]]:
    out, colmap = [], []
    for i, ch in enumerate(source):
        if ch == "^":
            out.append("**")
            colmap.extend([i, i])
        else:
            out.append(ch)
            colmap.append(i)
    colmap.append(len(source))
    return "".join(out), colmap


class Expression:
    """A parsed expression in ``x`` (and optionally ``u``), evaluated with numpy."""

    def __init__(self, source: str, sym: sp.Expr | None = None):
        self.source = str(source).strip()
        if sym is None:
            if not self.source:
                raise ExpressionError("empty expression", self.source, 0)
            # '^' binds like '**', not like Python's xor
            text, colmap = _caret_to_pow(self.source)
            try:
                tree = ast.parse(text, mode="eval")
            except SyntaxError as exc:
                col = colmap[min(max((exc.offset or 1) - 1, 0), len(colmap) - 1)]
                raise ExpressionError(f"syntax error: {exc.msg}", self.source, col) from None
            try:
                sym = _build(tree, text)
            except ExpressionError as exc:
                raise ExpressionError(exc.reason, self.source, colmap[exc.column]) from None
        self.sym = sym
        self._fn = sp.lambdify((X, U), sym, modules=[_NUMPY_EXTRAS, "numpy"])

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self):
        return hash(self.source)

    @property
    def uses_u(self) -> bool:
        return U in self.sym.free_symbols

    def __call__(self, x, u=None):
        x = np.asarray(x, dtype=float)
        if u is None:
            if self.uses_u:
                raise ValueError(f"expression {self.source!r} needs a value for u")
            u = 0.0
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = self._fn(x, u)
        shape = np.broadcast_shapes(x.shape, u.shape)
        return np.array(np.broadcast_to(np.asarray(out, dtype=float), shape))

    def derivative_u(self) -> "Expression":
        d = sp.diff(self.sym, U)
        return Expression(str(d), d)

    @cached_property
    def primitive(self) -> "Expression | None":
        """Closed-form antiderivative in u vanishing at u = 0, when one checks out."""
        try:
            raw = sp.integrate(self.sym.subs(U, _W), (_W, 0, U))
        except Exception:  # sympy raises a zoo of types on hard integrands
            return None
        # log(1 + tanh u) = u - log cosh u avoids cancellation for u << 0
        candidates = [raw, raw.subs(sp.log(sp.tanh(U) + 1), U - sp.log(sp.cosh(U)))]
        for cand in candidates:
            if cand.has(sp.Integral) or cand.has(sp.Piecewise):
                continue
            expr = Expression(str(cand), cand)
            if _primitive_checks_out(self, expr):
                return expr
        return None


def _primitive_checks_out(f: Expression, prim: Expression) -> bool:
    xs = np.array([-3.0, -0.7, 0.0, 0.4, 2.5])
    us = np.array([-60.0, -7.0, -1.0, -1e-3, 0.0, 2e-3, 0.9, 6.0, 60.0])
    xx, uu = np.meshgrid(xs, us)
    vals = prim(xx, uu)
    if not np.all(np.isfinite(vals)):
        return False
    if np.max(np.abs(prim(xs, 0.0))) > 1e-12:
        return False
    step = 1e-5 * np.maximum(1.0, np.abs(uu))
    slope = (prim(xx, uu + step) - prim(xx, uu - step)) / (2 * step)
    ref = f(xx, uu)
    tol = 1e-6 * (1.0 + np.abs(ref)) + 1e-10 * np.abs(vals) / step
    return bool(np.all(np.abs(slope - ref) <= tol))


def parse(source) -> Expression:
    if isinstance(source, Expression):
        return source
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    return Expression(str(source))
