"""Nonlinearity specifications and sampled certification of their hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, NamedTuple

import numpy as np
from scipy.integrate import quad_vec

from .expressions import Expression, parse
from .grid import Field, Grid
from .spectral import SplitPotential, as_function


def _as_rule(rule) -> Callable:
    if isinstance(rule, (str, int, float)) and not isinstance(rule, bool):
        return parse(rule)
    if callable(rule):
        return rule
    raise TypeError(f"cannot interpret {rule!r} as a rule f(x, u)")


def _as_split(obj) -> SplitPotential | None:
    if obj is None or isinstance(obj, SplitPotential):
        return obj
    return SplitPotential(obj)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """f(x, u) together with its declared bound fields.

    ``lipschitz`` is the split field l = l_∞ + l_0 (the decaying exponent plays
    the role of r); ``sign_bound`` is a; ``bound_m`` is m; ``alpha``/``omega``
    are the limit potentials of f(x,u)/u at zero and at infinity.
    """

    rule: Any
    lipschitz: Any = None
    bound_m: Any = None
    sign_bound: Any = None
    alpha: Any = None
    omega: Any = None
    primitive: Any = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rule", _as_rule(self.rule))
        for name in ("lipschitz", "sign_bound", "alpha", "omega"):
            object.__setattr__(self, name, _as_split(getattr(self, name)))
        if self.bound_m is not None:
            object.__setattr__(self, "bound_m", as_function(self.bound_m))
        prim = self.primitive
        if prim is not None and not callable(prim):
            prim = parse(prim)
        if prim is None and isinstance(self.rule, Expression):
            prim = self.rule.primitive
        object.__setattr__(self, "primitive", prim)

    def __call__(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.asarray(self.rule(x, u), dtype=float)
        return np.array(np.broadcast_to(out, np.broadcast_shapes(x.shape, u.shape)))

    def c(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self(x, np.zeros_like(x))

    def f_u(self, x, u) -> np.ndarray:
        """∂f/∂u by central differences."""
        u = np.asarray(u, dtype=float)
        step = 1e-6 * (1.0 + np.abs(u))
        return (self(x, u + step) - self(x, u - step)) / (2.0 * step)

    def primitive_values(self, x, u) -> np.ndarray:
        """𝓕(x, u) = ∫_0^u f(x, w) dw, closed form when available."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.primitive is not None:
            return np.asarray(self.primitive(x, u), dtype=float) * np.ones(np.broadcast_shapes(x.shape, u.shape))
        return quadrature_primitive(self, x, u)

    @cached_property
    def is_odd_zero_forcing(self) -> bool:
        xs = np.linspace(-5, 5, 41)
        return bool(np.all(self.c(xs) == 0.0))


def quadrature_primitive(f: NonlinearitySpec, x, u, tol: float = 1e-10) -> np.ndarray:
    """u·∫_0^1 f(x, θu) dθ by vectorised adaptive Gauss–Kronrod."""
    x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
    flat_x, flat_u = x.ravel(), u.ravel()
    val, err = quad_vec(lambda th: flat_u * f(flat_x, th * flat_u), 0.0, 1.0, epsabs=tol, epsrel=0.0, norm="max")
    if not np.all(np.isfinite(val)) or err > 10 * tol * max(1.0, float(np.max(np.abs(flat_u)))):
        raise ArithmeticError(f"primitive quadrature failed (error estimate {err:.3e})")
    return val.reshape(x.shape)


def nemytskii(f: NonlinearitySpec, u) -> Field | np.ndarray:
    """Pointwise application [F(u)](x) = f(x, u(x))."""
    if isinstance(u, Field):
        out = f(u.grid.x, u.values)
        if not np.all(np.isfinite(out)):
            raise ArithmeticError("nonlinearity produced non-finite values")
        return Field(u.grid, out)
    raise TypeError("nemytskii expects a Field")


class GrowthBounds(NamedTuple):
    lipschitz: float
    forcing_norm: float
    sup_l: float


def lipschitz_growth_bounds(f: NonlinearitySpec, grid: Grid) -> GrowthBounds:
    """L_F = ‖l_∞‖_∞ + Σ‖l_0‖_{L^r} and ‖c‖_{L²}; ‖F(u)‖ ≤ ‖c‖ + L_F‖u‖_{H¹}."""
    if f.lipschitz is None:
        raise ValueError("nonlinearity declares no Lipschitz field l")
    l_inf = np.abs(f.lipschitz.bounded_values(grid.x) * np.ones(grid.points))
    if not np.all(np.isfinite(l_inf)):
        raise ValueError("l_∞ is not finite on the grid")
    norms = f.lipschitz.decaying_norms(grid)
    lf = float(l_inf.max()) + float(sum(norms))
    c = f.c(grid.x)
    if not np.all(np.isfinite(c)):
        raise ValueError("c = f(., 0) is not finite on the grid")
    sup_l = float(np.max(np.abs(f.lipschitz(grid.x) * np.ones(grid.points))))
    return GrowthBounds(lf, float(np.sqrt(grid.integrate(c * c))), sup_l)


@dataclass
class StructureReport:
    seed: int
    probes: int
    forcing_l2: float
    lipschitz_ok: bool | None
    lipschitz_worst: float
    bound_ok: bool | None
    bound_worst: float
    sign_ok: bool | None
    sign_worst: float

    @property
    def ok(self) -> bool:
        return all(v is not False for v in (self.lipschitz_ok, self.bound_ok, self.sign_ok)) and np.isfinite(
            self.forcing_l2
        )


def _probe_values(rng: np.random.Generator, n: int) -> np.ndarray:
    mags = 10.0 ** rng.uniform(-3, 3, n)
    return np.where(rng.random(n) < 0.5, -mags, mags)


def certify_structure(f: NonlinearitySpec, grid: Grid, probes: int = 20000, seed: int | None = None) -> StructureReport:
    """Randomised checks of (f1), (f2), (f1)' and (f3) over grid nodes."""
    seed = f.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    x = grid.x[rng.integers(0, grid.points, probes)]
    u = _probe_values(rng, probes)
    v = np.where(rng.random(probes) < 0.5, u + rng.normal(0.0, 1.0, probes) * np.abs(u), _probe_values(rng, probes))
    fu, fv = f(x, u), f(x, v)
    c = f.c(grid.x)
    forcing = float(np.sqrt(grid.integrate(c * c))) if np.all(np.isfinite(c)) else float("inf")

    lip_ok, lip_worst = None, 0.0
    if f.lipschitz is not None:
        lhs = np.abs(fu - fv)
        rhs = f.lipschitz(x) * np.abs(u - v)
        excess = lhs - rhs * (1 + 1e-9) - 1e-12
        lip_worst = float(excess.max())
        lip_ok = lip_worst <= 0
    bnd_ok, bnd_worst = None, 0.0
    if f.bound_m is not None:
        m = f.bound_m(x)
        excess = np.maximum(np.abs(fu) - m, np.abs(fv) - m) - 1e-12
        bnd_worst = float(excess.max())
        bnd_ok = bnd_worst <= 0
    sgn_ok, sgn_worst = None, 0.0
    if f.sign_bound is not None:
        excess = u * fu - f.sign_bound(x) * u * u * (1 + 1e-9) - 1e-12
        sgn_worst = float(excess.max())
        sgn_ok = sgn_worst <= 0
    return StructureReport(seed, probes, forcing, lip_ok, lip_worst, bnd_ok, bnd_worst, sgn_ok, sgn_worst)


@dataclass
class LimitReport:
    which: str
    ladder: np.ndarray
    discrepancies: np.ndarray
    monotone: bool
    converged: bool
    tolerance: float = 1e-4


def limit_potential_check(f: NonlinearitySpec, which: str, grid: Grid, probes=None, tol: float = 1e-4) -> LimitReport:
    """max_x |f(x,u)/u - α(x)| along u → 0 (or ω(x) along |u| → ∞), both signs of u."""
    if which not in ("zero", "infinity"):
        raise ValueError("which must be 'zero' or 'infinity'")
    target = f.alpha if which == "zero" else f.omega
    if target is None:
        raise ValueError(f"no limit potential declared at {which}")
    if probes is None:
        k = np.arange(1, 7)
        probes = 10.0**-k if which == "zero" else 10.0**k
    ladder = np.asarray(probes, dtype=float)
    pot = target(grid.x) * np.ones(grid.points)
    disc = []
    for s in ladder:
        worst = 0.0
        for u in (s, -s):
            ratio = f(grid.x, np.full(grid.points, u)) / u
            worst = max(worst, float(np.max(np.abs(ratio - pot))))
        disc.append(worst)
    disc = np.array(disc)
    monotone = bool(np.all(np.diff(disc) <= 1e-14 + 1e-9 * disc[:-1]))
    return LimitReport(which, ladder, disc, monotone, bool(monotone and disc[-1] < tol), tol)


_STABLE, _VANISHING, _INCONCLUSIVE, _DIVERGENT = 0, 1, 2, 3


def _stability(first: np.ndarray, second: np.ndarray, margin: float) -> np.ndarray:
    """Per-node verdict comparing a windowed extremum over the two window halves."""
    big = np.maximum(np.abs(first), np.abs(second))
    out = np.full(first.shape, _INCONCLUSIVE)
    out[np.abs(second - first) <= 0.25 * big + margin] = _STABLE
    vanishing = (np.abs(second) <= 0.5 * np.abs(first)) | (np.abs(second) <= margin)
    out[(out == _INCONCLUSIVE) & vanishing] = _VANISHING
    # same sign and at least doubling across the window: limit is ±inf
    diverging = (np.sign(first) == np.sign(second)) & (np.abs(first) > margin) & (np.abs(second) >= 2 * np.abs(first))
    out[(out == _INCONCLUSIVE) & diverging] = _DIVERGENT
    return out


@dataclass
class ResonanceReport:
    s_max: float
    stability_factor: float
    margin: float
    f_hat_plus: np.ndarray = field(repr=False)
    f_check_plus: np.ndarray = field(repr=False)
    f_hat_minus: np.ndarray = field(repr=False)
    f_check_minus: np.ndarray = field(repr=False)
    k_hat_plus: np.ndarray = field(repr=False)
    k_check_plus: np.ndarray = field(repr=False)
    k_hat_minus: np.ndarray = field(repr=False)
    k_check_minus: np.ndarray = field(repr=False)
    conditions: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict, repr=False)
    witness_weight: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def ll_plus(self):
        return self.conditions["LL+"]

    @property
    def ll_minus(self):
        return self.conditions["LL-"]

    @property
    def sr_plus(self):
        return self.conditions["SR+"]

    @property
    def sr_minus(self):
        return self.conditions["SR-"]

    def certified(self) -> list[str]:
        return [name for name, v in self.conditions.items() if v is True]


def _window_extrema(vals: np.ndarray, half: int):
    """(max, min) overall and per window half; vals has shape (S, M)."""
    return (
        vals.max(axis=0),
        vals.min(axis=0),
        (vals[:half].max(axis=0), vals[half:].max(axis=0)),
        (vals[:half].min(axis=0), vals[half:].min(axis=0)),
    )


def resonance_conditions(
    f: NonlinearitySpec,
    grid: Grid,
    s_max: float = 1e3,
    stability_factor: float = 10.0,
    margin: float = 1e-8,
    samples: int = 64,
) -> ResonanceReport:
    """Sampled (LL)± and (SR)± verdicts; each is True, False or None (inconclusive)."""
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    if not stability_factor > 1:
        raise ValueError("stability_factor must exceed 1")
    s = np.geomspace(s_max, stability_factor * s_max, samples)
    half = samples // 2
    x = grid.x
    extrema = {}
    stab = {}
    for sign, tag in ((1.0, "+"), (-1.0, "-")):
        fs = np.array([f(x, np.full(grid.points, sign * si)) for si in s])
        ks = fs * (sign * s)[:, None]
        for name, vals in (("f", fs), ("k", ks)):
            hi, lo, (hi1, hi2), (lo1, lo2) = _window_extrema(vals, half)
            extrema[f"{name}_hat{tag}"] = hi
            extrema[f"{name}_check{tag}"] = lo
            stab[f"{name}_hat{tag}"] = _stability(hi1, hi2, margin)
            stab[f"{name}_check{tag}"] = _stability(lo1, lo2, margin)

    # f(x,s)s over the whole line, for the sign clauses of (SR)±
    line = np.concatenate([-np.geomspace(1e-6, stability_factor * s_max, samples)[::-1], [0.0],
                           np.geomspace(1e-6, stability_factor * s_max, samples)])
    prod = np.array([f(x, np.full(grid.points, si)) * si for si in line])
    prod_min, prod_max = prod.min(axis=0), prod.max(axis=0)

    w = grid.weights

    def decide(sign_ok: bool, pos_key: tuple[str, int], neg_key: tuple[str, int], name: str):
        (ka, sa), (kb, sb) = pos_key, neg_key
        a, b = extrema[ka], extrema[kb]
        settled = (_STABLE, _DIVERGENT)
        stable = np.isin(stab[ka], settled) & np.isin(stab[kb], settled)
        wit = np.flatnonzero(stable & (sa * a > margin) & (sb * b > margin))
        undecided = (stab[ka] == _INCONCLUSIVE) | (stab[kb] == _INCONCLUSIVE)
        if not sign_ok:
            verdict = False
        elif wit.size and float(w[wit].sum()) > 0:
            verdict = True
        elif np.any(undecided):
            verdict = None
        else:
            verdict = False
        return verdict, wit, float(w[wit].sum())

    conds, wits, weights = {}, {}, {}
    ll_plus_sign = bool(np.all(extrema["f_check+"] >= -margin) and np.all(extrema["f_hat-"] <= margin))
    ll_minus_sign = bool(np.all(extrema["f_hat+"] <= margin) and np.all(extrema["f_check-"] >= -margin))
    sr_plus_sign = bool(np.all(prod_min >= -margin))
    sr_minus_sign = bool(np.all(prod_max <= margin))
    for name, ok, pk, nk in (
        ("LL+", ll_plus_sign, ("f_check+", 1), ("f_hat-", -1)),
        ("LL-", ll_minus_sign, ("f_hat+", -1), ("f_check-", 1)),
        ("SR+", sr_plus_sign, ("k_check+", 1), ("k_check-", 1)),
        ("SR-", sr_minus_sign, ("k_hat+", -1), ("k_hat-", -1)),
    ):
        conds[name], wits[name], weights[name] = decide(ok, pk, nk, name)

    return ResonanceReport(
        s_max=float(s_max),
        stability_factor=float(stability_factor),
        margin=float(margin),
        f_hat_plus=extrema["f_hat+"],
        f_check_plus=extrema["f_check+"],
        f_hat_minus=extrema["f_hat-"],
        f_check_minus=extrema["f_check-"],
        k_hat_plus=extrema["k_hat+"],
        k_check_plus=extrema["k_check+"],
        k_hat_minus=extrema["k_hat-"],
        k_check_minus=extrema["k_check-"],
        conditions=conds,
        witnesses=wits,
        witness_weight=weights,
        degenerate=sr_plus_sign and sr_minus_sign,
    )
