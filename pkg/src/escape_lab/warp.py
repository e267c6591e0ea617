"""Warping functions and their 2-jets.

A warping function is a closed-form expression in the radial variable ``r``.
Every built-in family is stored as an expression tree, so value, first and
second derivative all come from the same source through second-order
forward-mode arithmetic (:class:`Jet2`).  Jets work elementwise on numpy
arrays as well as on floats.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "BoundaryViolation",
    "DomainError",
    "Expr",
    "ExpressionError",
    "Jet2",
    "ManifoldSpec",
    "WarpingFunction",
    "constant",
    "custom",
    "eval_jet2",
    "linear_cone",
    "log_decay",
    "make_positive_limit",
    "parse_expression",
    "poly_decay",
    "sphere_bell",
    "sqrt_log_f",
    "validate_boundary",
    "wei_f",
]


class DomainError(ValueError):
    """Radius outside the domain of a warping function."""


class ExpressionError(ValueError):
    """Custom expression rejected at parse time or not differentiable at a point."""


# ---------------------------------------------------------------------------
# Second-order jets
# ---------------------------------------------------------------------------


def _lift(x: Any) -> "Jet2":
    if isinstance(x, Jet2):
        return x
    return Jet2(x, 0.0, 0.0)


@dataclass(frozen=True)
class Jet2:
    """Truncated Taylor triple ``(w, w', w'')`` with chain-rule arithmetic."""

    value: Any
    d1: Any
    d2: Any

    def __add__(self, other):
        o = _lift(other)
        return Jet2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.d1, -self.d2)

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        o = _lift(other)
        return Jet2(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        inv = 1.0 / self.value
        return Jet2(inv, -self.d1 * inv**2, -self.d2 * inv**2 + 2.0 * self.d1**2 * inv**3)

    def __truediv__(self, other):
        return self * _lift(other).reciprocal()

    def __rtruediv__(self, other):
        return _lift(other) * self.reciprocal()

    def powc(self, c: float) -> "Jet2":
        """Power with a constant exponent."""
        u, du, ddu = self.value, self.d1, self.d2
        if c == 0.0:
            return Jet2(u * 0.0 + 1.0, du * 0.0, ddu * 0.0)
        if c == 1.0:
            return self
        if c == 2.0:
            return self * self
        return Jet2(
            u**c,
            c * u ** (c - 1.0) * du,
            c * u ** (c - 1.0) * ddu + c * (c - 1.0) * u ** (c - 2.0) * du**2,
        )

    def __pow__(self, other):
        if isinstance(other, Jet2):
            return (other * self.log()).exp()
        return self.powc(float(other))

    def log(self) -> "Jet2":
        u = self.value
        return Jet2(np.log(u), self.d1 / u, self.d2 / u - (self.d1 / u) ** 2)

    def exp(self) -> "Jet2":
        e = np.exp(self.value)
        return Jet2(e, e * self.d1, e * (self.d2 + self.d1**2))

    def sqrt(self) -> "Jet2":
        return self.powc(0.5)

    def cos(self) -> "Jet2":
        c, s = np.cos(self.value), np.sin(self.value)
        return Jet2(c, -s * self.d1, -s * self.d2 - c * self.d1**2)

    def sin(self) -> "Jet2":
        c, s = np.cos(self.value), np.sin(self.value)
        return Jet2(s, c * self.d1, c * self.d2 - s * self.d1**2)

    def as_tuple(self) -> tuple:
        return (self.value, self.d1, self.d2)


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------

_UNARY = ("neg", "ln", "exp", "sqrt", "cos", "sin")
_BINARY = ("add", "sub", "mul", "div", "pow")


@dataclass(frozen=True)
class Expr:
    """Node of a closed-form expression in the single variable ``r``."""

    op: str
    args: tuple = ()
    const: float = 0.0

    # building sugar ---------------------------------------------------------
    def _bin(self, op, other, swap=False):
        o = other if isinstance(other, Expr) else Expr("const", const=float(other))
        return Expr(op, (o, self) if swap else (self, o))

    def __add__(self, other):
        return self._bin("add", other)

    def __radd__(self, other):
        return self._bin("add", other, swap=True)

    def __sub__(self, other):
        return self._bin("sub", other)

    def __rsub__(self, other):
        return self._bin("sub", other, swap=True)

    def __mul__(self, other):
        return self._bin("mul", other)

    def __rmul__(self, other):
        return self._bin("mul", other, swap=True)

    def __truediv__(self, other):
        return self._bin("div", other)

    def __rtruediv__(self, other):
        return self._bin("div", other, swap=True)

    def __pow__(self, other):
        return self._bin("pow", other)

    def __neg__(self):
        return Expr("neg", (self,))

    # evaluation -------------------------------------------------------------
    def jet(self, r: Jet2) -> Jet2:
        op, a = self.op, self.args
        if op == "var":
            return r
        if op == "const":
            return Jet2(self.const, 0.0, 0.0)
        if op in _UNARY:
            x = a[0].jet(r)
            if op == "neg":
                return -x
            if op == "ln":
                return x.log()
            return getattr(x, op)()
        if op == "pow" and a[1].op == "const":
            return a[0].jet(r).powc(a[1].const)
        x, y = a[0].jet(r), a[1].jet(r)
        if op == "add":
            return x + y
        if op == "sub":
            return x - y
        if op == "mul":
            return x * y
        if op == "div":
            return x / y
        if op == "pow":
            return x**y
        raise ExpressionError(f"unknown node {op!r}")

    def diff(self) -> "Expr":
        """Symbolic derivative in ``r`` (unsimplified; used for compiled fast paths)."""
        op, a = self.op, self.args
        if op == "var":
            return _const(1.0)
        if op == "const":
            return _const(0.0)
        if op == "neg":
            return -a[0].diff()
        if op in ("add", "sub"):
            return Expr(op, (a[0].diff(), a[1].diff()))
        if op == "mul":
            return a[0].diff() * a[1] + a[0] * a[1].diff()
        if op == "div":
            return (a[0].diff() * a[1] - a[0] * a[1].diff()) / a[1] ** 2.0
        if op == "ln":
            return a[0].diff() / a[0]
        if op == "exp":
            return self * a[0].diff()
        if op == "sqrt":
            return a[0].diff() / (2.0 * self)
        if op == "cos":
            return -Expr("sin", (a[0],)) * a[0].diff()
        if op == "sin":
            return Expr("cos", (a[0],)) * a[0].diff()
        if op == "pow":
            base, ex = a
            if ex.op == "const":
                return ex.const * base ** (ex.const - 1.0) * base.diff()
            return self * (ex.diff() * _ln(base) + ex * base.diff() / base)
        raise ExpressionError(f"unknown node {op!r}")

    def source(self, mod: str = "math") -> str:
        """Python source for the value only, using ``mod`` for elementary functions."""
        op, a = self.op, self.args
        if op == "var":
            return "r"
        if op == "const":
            return repr(self.const)
        if op == "neg":
            return f"(-{a[0].source(mod)})"
        if op == "ln":
            return f"{mod}.log({a[0].source(mod)})"
        if op in ("exp", "sqrt", "cos", "sin"):
            return f"{mod}.{op}({a[0].source(mod)})"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "**"}[op]
        return f"({a[0].source(mod)} {sym} {a[1].source(mod)})"


R = Expr("var")


def _const(c: float) -> Expr:
    return Expr("const", const=float(c))


def _ln(x: Expr) -> Expr:
    return Expr("ln", (x,))


_ALLOWED_CALLS = {"ln": "ln", "log": "ln", "exp": "exp", "sqrt": "sqrt"}


def parse_expression(text: str) -> Expr:
    """Parse a custom warping expression in ``r``.

    Accepted: numbers, ``r``, ``+ - * /``, ``**`` or ``pow(a, b)``, and the calls
    ``ln``/``log``, ``exp``, ``sqrt``.  Anything else raises :class:`ExpressionError`.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None

    def conv(node) -> Expr:
        if isinstance(node, ast.Expression):
            return conv(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return _const(node.value)
        if isinstance(node, ast.Name):
            if node.id == "r":
                return R
            if node.id in ("pi", "e"):
                return _const(getattr(math, node.id))
            raise ExpressionError(f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            x = conv(node.operand)
            return -x if isinstance(node.op, ast.USub) else x
        if isinstance(node, ast.BinOp):
            ops = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div", ast.Pow: "pow"}
            op = ops.get(type(node.op))
            if op is None:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
            return Expr(op, (conv(node.left), conv(node.right)))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            name = node.func.id
            if name == "pow" and len(node.args) == 2:
                return Expr("pow", (conv(node.args[0]), conv(node.args[1])))
            if name in _ALLOWED_CALLS and len(node.args) == 1:
                return Expr(_ALLOWED_CALLS[name], (conv(node.args[0]),))
            raise ExpressionError(f"function {name!r} not allowed")
        raise ExpressionError(f"construct {type(node).__name__} not allowed")

    return conv(tree)


# ---------------------------------------------------------------------------
# Warping functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WarpingFunction:
    """A warping function of ``r >= 0`` defined by an expression tree.

    ``limit`` is the value at infinity when it is known in closed form;
    ``domain_max`` bounds the domain for profiles that stop being positive.
    """

    family: str
    params: dict
    expr: Expr
    limit: float | None = None
    domain_max: float = math.inf
    _fast: Callable = field(init=False, repr=False, compare=False)
    _vec: Callable = field(init=False, repr=False, compare=False)
    _fast_d1: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # compiled value and first-derivative paths for scalar inner loops (quadrature)
        fast = eval(f"lambda r: {self.expr.source('math')}", {"math": math})  # noqa: S307
        vec = eval(f"lambda r: {self.expr.source('np')} + 0.0 * r", {"np": np})  # noqa: S307
        d1 = eval(f"lambda r: {self.expr.diff().source('math')}", {"math": math})  # noqa: S307
        object.__setattr__(self, "_fast", fast)
        object.__setattr__(self, "_vec", vec)
        object.__setattr__(self, "_fast_d1", d1)

    def __getstate__(self):
        return {k: getattr(self, k) for k in ("family", "params", "expr", "limit", "domain_max")}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)
        self.__post_init__()

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.family}({args})"

    def _check(self, r) -> None:
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > self.domain_max):
            raise DomainError(f"{self!r}: radius outside [0, {self.domain_max}]")

    def __call__(self, r):
        """Value only; floats go through ``math``, arrays through numpy."""
        if isinstance(r, float | int):
            return self._fast(float(r))
        return self._vec(np.asarray(r, dtype=float))

    def jet(self, r) -> Jet2:
        self._check(r)
        x = np.asarray(r, dtype=float)
        scalar = x.ndim == 0
        one = 1.0 if scalar else np.ones_like(x)
        try:
            with np.errstate(all="ignore"):
                j = self.expr.jet(Jet2(float(x) if scalar else x, one, 0.0 * one))
        except (ZeroDivisionError, OverflowError, ValueError):
            # scalar math raises where numpy would return inf or nan
            raise ExpressionError(f"{self!r} is not twice differentiable at r={r}") from None
        v, d1, d2 = (np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in j.as_tuple())
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise ExpressionError(f"{self!r} is not twice differentiable at some r in the request")
        if scalar:
            return Jet2(float(v), float(d1), float(d2))
        return Jet2(v.copy(), d1.copy(), d2.copy())

    def is_decreasing_to_zero(self) -> bool:
        """Known or sampled: strictly decreasing on (0, inf) with limit 0."""
        if self.limit is not None and self.limit != 0.0:
            return False
        if not math.isinf(self.domain_max):
            return False
        grid = np.geomspace(1e-3, 1e6, 400)
        if np.any(self.jet(grid).d1 >= 0.0):
            return False
        if self.limit == 0.0:
            return True
        return self(1e12) <= 1e-2 * self(0.0)


def eval_jet2(w: WarpingFunction, r: float) -> Jet2:
    """Value, first and second derivative of ``w`` at ``r``."""
    if r < 0:
        raise DomainError(f"r={r} < 0")
    return w.jet(r)


def linear_cone() -> WarpingFunction:
    return WarpingFunction("LinearCone", {}, R, limit=math.inf)


def constant(c: float) -> WarpingFunction:
    if c <= 0:
        raise ValueError("ConstantC needs c > 0")
    return WarpingFunction("ConstantC", {"c": float(c)}, _const(c) + 0.0 * R, limit=float(c))


def poly_decay(alpha: float) -> WarpingFunction:
    """``(1 + r^2)^(-alpha)``."""
    if alpha <= 0:
        raise ValueError("PolyDecay needs alpha > 0")
    return WarpingFunction("PolyDecay", {"alpha": float(alpha)}, (1.0 + R**2) ** (-float(alpha)), limit=0.0)


def log_decay(alpha: float) -> WarpingFunction:
    """``ln(2 + r^2)^(-alpha)``."""
    if alpha <= 0:
        raise ValueError("LogDecay needs alpha > 0")
    return WarpingFunction("LogDecay", {"alpha": float(alpha)}, _ln(2.0 + R**2) ** (-float(alpha)), limit=0.0)


def wei_f() -> WarpingFunction:
    """``r (1 + r^2)^(-1/4)``."""
    return WarpingFunction("WeiF", {}, R * (1.0 + R**2) ** (-0.25), limit=math.inf)


def sqrt_log_f() -> WarpingFunction:
    """``sqrt(ln 2) r ln(2 + r^2)^(-1/2)``."""
    return WarpingFunction("SqrtLogF", {}, math.sqrt(math.log(2.0)) * R * _ln(2.0 + R**2) ** (-0.5),
                           limit=math.inf)


def sphere_bell() -> WarpingFunction:
    """``cos r`` on ``[0, pi/2)``: the round sphere seen from its equator."""
    return WarpingFunction("SphereBell", {}, Expr("cos", (R,)), domain_max=0.5 * math.pi)


def custom(text: str) -> WarpingFunction:
    return WarpingFunction("Custom", {"expr": text}, parse_expression(text))


def make_positive_limit(c: float, decay: WarpingFunction) -> WarpingFunction:
    """``c + decay(r)`` where ``decay`` falls strictly to 0."""
    if c <= 0:
        raise ValueError("PositiveLimit needs c > 0")
    if not decay.is_decreasing_to_zero():
        raise ValueError(f"{decay!r} is not strictly decreasing to 0 on the sample grid")
    params = {"c": float(c), "decay": decay.family, **decay.params}
    return WarpingFunction("PositiveLimit", params, _const(c) + decay.expr, limit=float(c))


FAMILIES = {
    "LinearCone": lambda: linear_cone(),
    "ConstantC": lambda c=1.0: constant(c),
    "PolyDecay": lambda alpha=1.0: poly_decay(alpha),
    "LogDecay": lambda alpha=1.0: log_decay(alpha),
    "WeiF": lambda: wei_f(),
    "SqrtLogF": lambda: sqrt_log_f(),
    "SphereBell": lambda: sphere_bell(),
}


def build_family(family: str, **params) -> WarpingFunction:
    """Construct a warping function from a family name and its parameters."""
    if family == "Custom":
        if set(params) != {"expr"}:
            raise TypeError("Custom takes exactly one parameter, expr")
        return custom(params["expr"])
    if family == "PositiveLimit":
        decay = params.pop("decay", "PolyDecay")
        c = params.pop("c")
        return make_positive_limit(c, build_family(decay, **params))
    if family not in FAMILIES:
        raise ValueError(f"unknown warping family {family!r}")
    return FAMILIES[family](**params)


# ---------------------------------------------------------------------------
# Manifold specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryViolation:
    condition: str
    detail: str

    def __str__(self) -> str:
        return f"{self.condition} violated ({self.detail})"


@dataclass(frozen=True)
class ManifoldSpec:
    """``[0, inf) x_f S^(p-1) x_h S^1`` with metric ``dr^2 + f^2 ds^2 + h^2 dphi^2``.

    ``period`` is the length of the base circle; the default 1 makes the circle
    at radius ``r`` have length exactly ``h(r)``.
    """

    p: int
    f: WarpingFunction
    h: WarpingFunction
    period: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"p must be an integer >= 2, got {self.p}")
        if self.period <= 0:
            raise ValueError("period must be positive")

    def delta(self, r):
        """Length of the circle factor at radius ``r``."""
        return self.period * self.h(r)


def validate_boundary(spec: ManifoldSpec, tol: float = 1e-12, n_grid: int = 512) -> list[BoundaryViolation]:
    """Smoothness conditions at the pole plus positivity on a sample grid."""
    out: list[BoundaryViolation] = []
    f0 = spec.f.jet(0.0)
    h0 = spec.h.jet(0.0)
    checks = [
        ("f(0)=0", abs(f0.value) <= tol, f"f(0)={f0.value:.6g}"),
        ("f'(0)=1", abs(f0.d1 - 1.0) <= tol, f"f'(0)={f0.d1:.6g}"),
        ("f''(0)=0", abs(f0.d2) <= tol, f"f''(0)={f0.d2:.6g}"),
        ("h(0)>0", h0.value > tol, f"h(0)={h0.value:.6g}"),
        ("h'(0)=0", abs(h0.d1) <= tol, f"h'(0)={h0.d1:.6g}"),
    ]
    out.extend(BoundaryViolation(name, detail) for name, ok, detail in checks if not ok)

    top = min(1e3, min(spec.f.domain_max, spec.h.domain_max) * (1 - 1e-9))
    grid = np.geomspace(1e-3, top, n_grid)
    for name, w in (("f>0", spec.f), ("h>0", spec.h)):
        vals = w(grid)
        bad = np.flatnonzero(~(vals > 0.0))
        if bad.size:
            out.append(BoundaryViolation(name, f"r={grid[bad[0]]:.6g}"))
    return out
