"""Declarative run configuration: a YAML document with fixed nested blocks.

Every value is plain data (numbers, strings and lists of them); expressions
use the grammar of :mod:`conley_waves.expressions` and are checked at parse
time so that a typo is reported with the line and column where it sits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import yaml

from .expressions import ExpressionError, parse as parse_expression

SCENARIOS = ("nonresonant", "resonant_plain", "resonant_trivial_solution")
FLOWS = ("plain", "homotopy_zero", "homotopy_infinity", "resonant")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str = ""):
        where = f"line {line}, column {column}: " if line is not None else ""
        at = f"{path}: " if path else ""
        super().__init__(f"{where}{at}{message}")
        self.reason = message
        self.line, self.column, self.path = line, column, path


@dataclass(frozen=True)
class PotentialBlock:
    """bounded part, decaying parts as (expression, p) and the declared ϱ."""

    bounded: str = "0"
    decaying: tuple = ()
    rho: float | None = None


@dataclass(frozen=True)
class InitialData:
    """Either an expression in x or a multiple of an eigenfield of A."""

    expr: str | None = None
    eigenfield: int | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class GridBlock:
    L: float = 20.0
    M: int = 801


@dataclass(frozen=True)
class NonlinearityBlock:
    f: str = "0"
    l: PotentialBlock | None = None
    m: str | None = None
    a: PotentialBlock | None = None
    alpha: PotentialBlock | None = None
    omega: PotentialBlock | None = None
    primitive: str | None = None


@dataclass(frozen=True)
class SpectrumBlock:
    k: int = 4
    lambda_grid: tuple = ()
    decay_window: tuple | None = None
    tau_ker: float | None = None


@dataclass(frozen=True)
class EvolveBlock:
    T: float = 1.0
    dt: float = 0.01
    stride: int = 10
    u0: InitialData = InitialData(expr="exp(-x^2)")
    flow: str = "plain"
    s: float = 0.0
    tail_ns: tuple = ()
    tail_eps: float | None = None
    h1_ceiling: float = 1e8


@dataclass(frozen=True)
class SolverBlock:
    dt: float = 0.02
    T_max: float = 50.0
    switch_tol: float = 1e-3
    newton_tol: float = 1e-10
    max_newton: int = 60
    seeds: tuple = ()
    seed_scales: tuple = (0.5, -0.5)
    orbits: bool = True
    orbit_delta: float = 1e-4
    orbit_dt: float = 0.02
    orbit_T: float = 60.0
    orbit_tol: float = 1e-3
    probes: int = 20000


@dataclass(frozen=True)
class ResonanceBlock:
    s_max: float = 1e3
    stability_factor: float = 10.0
    R0: float = 1.0
    exit_runs: bool = True
    exit_T: float = 4.0
    exit_dt: float = 0.02


@dataclass(frozen=True)
class SweepBlock:
    lambdas: tuple = ()
    find_equilibria: bool = True


@dataclass(frozen=True)
class RunConfig:
    grid: GridBlock = GridBlock()
    potential: PotentialBlock = PotentialBlock()
    scenario: str | None = None
    lam: float | None = None
    lambda_eigen_index: int | None = None
    nonlinearity: NonlinearityBlock | None = None
    spectrum: SpectrumBlock = SpectrumBlock()
    evolve: EvolveBlock = EvolveBlock()
    solver: SolverBlock = SolverBlock()
    resonance: ResonanceBlock = ResonanceBlock()
    sweep: SweepBlock = SweepBlock()
    seed: int = 0
    output: str = "out"

    def with_seed(self, seed: int | None) -> "RunConfig":
        return self if seed is None else replace(self, seed=int(seed))

    def with_lambda(self, lam: float) -> "RunConfig":
        return replace(self, lam=float(lam), lambda_eigen_index=None)


# ---------------------------------------------------------------- parsing


class _Reader:
    """Walks a composed YAML node tree, keeping marks for diagnostics."""

    def __init__(self, root: yaml.Node):
        self.root = root

    @staticmethod
    def fail(node: yaml.Node, path: str, message: str, column_offset: int = 0):
        mark = node.start_mark
        raise ConfigError(message, mark.line + 1, mark.column + 1 + column_offset, path)

    def mapping(self, node, path, allowed) -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, path, "expected a block of key: value pairs")
        out = {}
        for k, v in node.value:
            key = k.value if isinstance(k, yaml.ScalarNode) else None
            if key not in allowed:
                self.fail(k, path, f"unknown key {key!r}; expected one of {', '.join(allowed)}")
            if key in out:
                self.fail(k, path, f"duplicate key {key!r}")
            out[key] = v
        return out

    def scalar(self, node, path) -> str | None:
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, path, "expected a single value")
        if node.tag.endswith(":null") or (node.style is None and node.value in ("", "~", "null", "Null", "NULL")):
            return None
        return node.value

    def number(self, node, path, *, positive=False, nonneg=False, optional=False) -> float | None:
        raw = self.scalar(node, path)
        if raw is None:
            if optional:
                return None
            self.fail(node, path, "a number is required")
        try:
            val = float(raw)
        except ValueError:
            self.fail(node, path, f"expected a number, got {raw!r}")
        if not math.isfinite(val):
            self.fail(node, path, "value must be finite")
        if positive and not val > 0:
            self.fail(node, path, f"must be positive, got {raw}")
        if nonneg and val < 0:
            self.fail(node, path, f"must be non-negative, got {raw}")
        return val

    def integer(self, node, path, *, minimum=None, optional=False) -> int | None:
        raw = self.scalar(node, path)
        if raw is None:
            if optional:
                return None
            self.fail(node, path, "an integer is required")
        try:
            val = int(raw)
        except ValueError:
            self.fail(node, path, f"expected an integer, got {raw!r}")
        if minimum is not None and val < minimum:
            self.fail(node, path, f"must be at least {minimum}, got {val}")
        return val

    def boolean(self, node, path) -> bool:
        raw = self.scalar(node, path)
        if raw in ("true", "True", "yes", "on"):
            return True
        if raw in ("false", "False", "no", "off"):
            return False
        self.fail(node, path, f"expected true or false, got {raw!r}")

    def expression(self, node, path, *, allow_u: bool) -> str:
        raw = self.scalar(node, path)
        if raw is None:
            self.fail(node, path, "an expression is required")
        try:
            expr = parse_expression(raw)
        except ExpressionError as exc:
            quoted = 1 if node.style in ("'", '"') else 0
            self.fail(node, path, f"bad expression: {exc.reason}", exc.column + quoted)
        if expr.uses_u and not allow_u:
            self.fail(node, path, "this expression may depend on x only")
        return expr.source

    def sequence(self, node, path) -> list:
        if isinstance(node, yaml.ScalarNode) and self.scalar(node, path) is None:
            return []
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, path, "expected a list")
        return list(node.value)

    def choice(self, node, path, options) -> str:
        raw = self.scalar(node, path)
        if raw not in options:
            self.fail(node, path, f"expected one of {', '.join(options)}, got {raw!r}")
        return raw

    # -- blocks

    def potential(self, node, path) -> PotentialBlock:
        if isinstance(node, yaml.ScalarNode):
            return PotentialBlock(bounded=self.expression(node, path, allow_u=False))
        m = self.mapping(node, path, ("bounded", "decaying", "rho"))
        bounded = self.expression(m["bounded"], f"{path}.bounded", allow_u=False) if "bounded" in m else "0"
        decaying = []
        for i, item in enumerate(self.sequence(m["decaying"], f"{path}.decaying") if "decaying" in m else []):
            ip = f"{path}.decaying[{i}]"
            if isinstance(item, yaml.MappingNode):
                d = self.mapping(item, ip, ("expr", "p"))
                if "expr" not in d:
                    self.fail(item, ip, "missing 'expr'")
                p = self.number(d["p"], f"{ip}.p") if "p" in d else 2.0
                if p < 2.0:
                    self.fail(d["p"], f"{ip}.p", f"integrability exponent must be >= 2, got {p}")
                decaying.append((self.expression(d["expr"], f"{ip}.expr", allow_u=False), p))
            else:
                decaying.append((self.expression(item, ip, allow_u=False), 2.0))
        rho = self.number(m["rho"], f"{path}.rho", optional=True) if "rho" in m else None
        return PotentialBlock(bounded, tuple(decaying), rho)

    def initial(self, node, path) -> InitialData:
        if isinstance(node, yaml.ScalarNode):
            return InitialData(expr=self.expression(node, path, allow_u=False))
        m = self.mapping(node, path, ("expr", "eigenfield", "scale"))
        has_expr, has_eig = "expr" in m, "eigenfield" in m
        if has_expr == has_eig:
            self.fail(node, path, "give exactly one of 'expr' or 'eigenfield'")
        return InitialData(
            expr=self.expression(m["expr"], f"{path}.expr", allow_u=False) if has_expr else None,
            eigenfield=self.integer(m["eigenfield"], f"{path}.eigenfield", minimum=0) if has_eig else None,
            scale=self.number(m["scale"], f"{path}.scale") if "scale" in m else 1.0,
        )

    def numbers(self, node, path, **kw) -> tuple:
        return tuple(self.number(n, f"{path}[{i}]", **kw) for i, n in enumerate(self.sequence(node, path)))


def _block(reader: _Reader, node, path, cls, spec: dict):
    """Generic reader for flat blocks: spec maps key -> callable(node, path)."""
    m = reader.mapping(node, path, tuple(spec))
    values = {k: spec[k](v, f"{path}.{k}") for k, v in m.items()}
    return cls(**values)


def parse_config(text: str) -> RunConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise ConfigError(f"YAML syntax error: {exc.problem or exc.context}", line, col) from None
    if root is None:
        raise ConfigError("configuration is empty", 1, 1)
    r = _Reader(root)
    top = r.mapping(root, "", ("scenario", "grid", "potential", "lambda", "lambda_eigen_index", "nonlinearity",
                               "spectrum", "evolve", "solver", "resonance", "sweep", "seed", "output"))
    num = lambda **kw: (lambda n, p: r.number(n, p, **kw))
    integer = lambda **kw: (lambda n, p: r.integer(n, p, **kw))
    boolean = r.boolean
    kw: dict[str, Any] = {}

    if "scenario" in top:
        kw["scenario"] = r.choice(top["scenario"], "scenario", SCENARIOS)
    if "grid" in top:
        grid = _block(r, top["grid"], "grid", GridBlock, {"L": num(positive=True), "M": integer(minimum=5)})
        kw["grid"] = grid
    if "potential" in top:
        kw["potential"] = r.potential(top["potential"], "potential")
    if "lambda" in top and "lambda_eigen_index" in top:
        r.fail(top["lambda_eigen_index"], "lambda_eigen_index", "give either 'lambda' or 'lambda_eigen_index', not both")
    if "lambda" in top:
        kw["lam"] = r.number(top["lambda"], "lambda")
    if "lambda_eigen_index" in top:
        kw["lambda_eigen_index"] = r.integer(top["lambda_eigen_index"], "lambda_eigen_index", minimum=0)
    if "nonlinearity" in top:
        pot = r.potential
        kw["nonlinearity"] = _block(r, top["nonlinearity"], "nonlinearity", NonlinearityBlock, {
            "f": lambda n, p: r.expression(n, p, allow_u=True),
            "l": pot,
            "m": lambda n, p: r.expression(n, p, allow_u=False),
            "a": pot,
            "alpha": pot,
            "omega": pot,
            "primitive": lambda n, p: r.expression(n, p, allow_u=True),
        })
    if "spectrum" in top:
        def window(n, p):
            w = r.numbers(n, p, nonneg=True)
            if len(w) != 2 or not w[0] < w[1]:
                r.fail(n, p, "decay window must be [lo, hi] with lo < hi")
            return w
        kw["spectrum"] = _block(r, top["spectrum"], "spectrum", SpectrumBlock, {
            "k": integer(minimum=1),
            "lambda_grid": lambda n, p: r.numbers(n, p),
            "decay_window": window,
            "tau_ker": num(positive=True, optional=True),
        })
    if "evolve" in top:
        ev = _block(r, top["evolve"], "evolve", EvolveBlock, {
            "T": num(positive=True),
            "dt": num(positive=True),
            "stride": integer(minimum=1),
            "u0": r.initial,
            "flow": lambda n, p: r.choice(n, p, FLOWS),
            "s": num(nonneg=True),
            "tail_ns": lambda n, p: tuple(int(v) for v in r.numbers(n, p, positive=True)),
            "tail_eps": num(positive=True, optional=True),
            "h1_ceiling": num(positive=True),
        })
        if ev.s > 1:
            r.fail(top["evolve"], "evolve.s", f"homotopy parameter must lie in [0, 1], got {ev.s}")
        kw["evolve"] = ev
    if "solver" in top:
        kw["solver"] = _block(r, top["solver"], "solver", SolverBlock, {
            "dt": num(positive=True),
            "T_max": num(positive=True),
            "switch_tol": num(positive=True),
            "newton_tol": num(positive=True),
            "max_newton": integer(minimum=1),
            "seeds": lambda n, p: tuple(r.initial(s, f"{p}[{i}]") for i, s in enumerate(r.sequence(n, p))),
            "seed_scales": lambda n, p: r.numbers(n, p),
            "orbits": boolean,
            "orbit_delta": num(positive=True),
            "orbit_dt": num(positive=True),
            "orbit_T": num(positive=True),
            "orbit_tol": num(positive=True),
            "probes": integer(minimum=1),
        })
    if "resonance" in top:
        res = _block(r, top["resonance"], "resonance", ResonanceBlock, {
            "s_max": num(positive=True),
            "stability_factor": num(positive=True),
            "R0": num(positive=True),
            "exit_runs": boolean,
            "exit_T": num(positive=True),
            "exit_dt": num(positive=True),
        })
        if not res.stability_factor > 1:
            r.fail(top["resonance"], "resonance.stability_factor", "must exceed 1")
        kw["resonance"] = res
    if "sweep" in top:
        kw["sweep"] = _block(r, top["sweep"], "sweep", SweepBlock, {
            "lambdas": lambda n, p: r.numbers(n, p),
            "find_equilibria": boolean,
        })
    if "seed" in top:
        kw["seed"] = r.integer(top["seed"], "seed", minimum=0)
    if "output" in top:
        out = r.scalar(top["output"], "output")
        if not out:
            r.fail(top["output"], "output", "output directory must be non-empty")
        kw["output"] = out
    return RunConfig(**kw)


def load_config(path) -> tuple[RunConfig, str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text), text


# ---------------------------------------------------------------- serialising


def _potential_data(p: PotentialBlock):
    if not p.decaying and p.rho is None:
        return p.bounded
    out: dict[str, Any] = {"bounded": p.bounded}
    if p.decaying:
        out["decaying"] = [e if q == 2.0 else {"expr": e, "p": q} for e, q in p.decaying]
    if p.rho is not None:
        out["rho"] = p.rho
    return out


def _initial_data(u: InitialData):
    if u.eigenfield is None and u.scale == 1.0:
        return u.expr
    out: dict[str, Any] = {"expr": u.expr} if u.eigenfield is None else {"eigenfield": u.eigenfield}
    out["scale"] = u.scale
    return out


def _plain(value):
    if isinstance(value, PotentialBlock):
        return _potential_data(value)
    if isinstance(value, InitialData):
        return _initial_data(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _block_data(block) -> dict:
    return {f.name: _plain(getattr(block, f.name)) for f in fields(block) if getattr(block, f.name) is not None}


def config_to_data(cfg: RunConfig) -> dict:
    out: dict[str, Any] = {}
    if cfg.scenario is not None:
        out["scenario"] = cfg.scenario
    out["grid"] = _block_data(cfg.grid)
    out["potential"] = _potential_data(cfg.potential)
    if cfg.lam is not None:
        out["lambda"] = cfg.lam
    if cfg.lambda_eigen_index is not None:
        out["lambda_eigen_index"] = cfg.lambda_eigen_index
    if cfg.nonlinearity is not None:
        out["nonlinearity"] = _block_data(cfg.nonlinearity)
    for name in ("spectrum", "evolve", "solver", "resonance", "sweep"):
        out[name] = _block_data(getattr(cfg, name))
    out["seed"] = cfg.seed
    out["output"] = cfg.output
    return out


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_data(cfg), sort_keys=False, default_flow_style=None, allow_unicode=True)
