"""Declarative scenario files: parsing, strict validation, object building.

A scenario is a single TOML document that names a coefficient field, a
solution, an exponent policy, a radius grid and an ordered list of
certification tasks.  Everything an experiment run needs is in the file, so
a (scenario, seed, levels) triple pins the outputs byte for byte.

Structure (see ``docs/scenario-format.md`` for the annotated reference)::

    name = "expo-threeball"
    dimension = 2
    seed = 0

    [coefficient]          # optional: defaults to the solution's equation
    family = "identity"    # identity | diagonal-linear | rotation-perturbation
    V = 4.0                # constant, or an expression string "sin(x1)"

    [solution]
    family = "exponential" # constant | harmonic | exponential | oscillatory
    M = 4.0                #   | drift | perturbed-exponential | solved

    [alpha]
    policy = "auto"        # auto | explicit

    [radii]
    r_min = 0.1
    r_max = 0.9
    count = 32
    R = 1.0                # ball radius

    [[tasks]]
    kind = "three-ball"    # bundle | monotonicity | three-ball | vanishing
    variant = "classical"  #   | landis

Expressions for potentials, drifts and solver boundary data come from a
small whitelisted grammar over x1..x3 (plus pi and e) with +, -, *, /, **
and the functions sin, cos, tan, exp, log, sqrt, sinh, cosh, tanh, abs.
Anything else is rejected at parse time, never executed.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

try:  # python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from .errors import PreconditionError, ScenarioError
from .fields import (
    CoefficientField,
    diagonal_linear_field,
    identity_field,
    rotation_perturbation_field,
)
from .quad import BallDomain, centered_ball
from .solutions import (
    SolutionField,
    drift_solution,
    exponential_solution,
    from_callables,
    harmonic_polynomial,
    oscillatory_solution,
    perturbed_exponential_solution,
    solve_dirichlet,
)

Array = np.ndarray

TASK_KINDS = ("bundle", "monotonicity", "three-ball", "vanishing", "landis")
COEFFICIENT_FAMILIES = ("identity", "diagonal-linear", "rotation-perturbation")
SOLUTION_FAMILIES = (
    "constant", "harmonic", "exponential", "oscillatory", "drift",
    "perturbed-exponential", "solved",
)

# ---------------------------------------------------------------------------
# Whitelisted expression grammar

_FUNCTIONS: dict[str, Callable[[Array], Array]] = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "abs": np.abs,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}
_UNARYOPS = {ast.USub: np.negative, ast.UAdd: lambda v: v}


def compile_expression(text: str, dim: int, where: str = "expression"):
    """Compile a whitelisted arithmetic expression to a vectorized callable.

    The result maps an (N, dim) point array to an (N,) value array.  Allowed
    names are the coordinates x1..x{dim} and the constants pi, e; allowed
    operations are +, -, *, /, ** and the functions in the module whitelist.
    Any other syntax raises ScenarioError naming the offending construct.
    """
    if not isinstance(text, str) or not text.strip():
        raise ScenarioError(f"{where}: expression must be a non-empty string")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ScenarioError(
            f"{where}: syntax error in expression {text!r}: {exc.msg}"
        ) from None
    coords = {f"x{i + 1}": i for i in range(dim)}

    def check(node: ast.AST) -> None:
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ScenarioError(
                    f"{where}: only numeric literals allowed, got "
                    f"{node.value!r}"
                )
        elif isinstance(node, ast.Name):
            if node.id not in coords and node.id not in _CONSTANTS:
                raise ScenarioError(
                    f"{where}: unknown name {node.id!r} (allowed: "
                    f"{', '.join(sorted(coords))}, pi, e)"
                )
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ScenarioError(
                    f"{where}: operator {type(node.op).__name__} not allowed"
                )
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARYOPS:
                raise ScenarioError(
                    f"{where}: operator {type(node.op).__name__} not allowed"
                )
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) \
                    or node.func.id not in _FUNCTIONS:
                raise ScenarioError(
                    f"{where}: only calls to "
                    f"{', '.join(sorted(_FUNCTIONS))} are allowed"
                )
            if node.keywords or len(node.args) != 1:
                raise ScenarioError(
                    f"{where}: {node.func.id} takes exactly one positional "
                    "argument"
                )
            check(node.args[0])
        else:
            raise ScenarioError(
                f"{where}: construct {type(node).__name__} not allowed in "
                "expressions"
            )

    check(tree)

    def evaluate(node: ast.AST, pts: Array) -> Array:
        if isinstance(node, ast.Expression):
            return evaluate(node.body, pts)
        if isinstance(node, ast.Constant):
            return np.full(pts.shape[0], float(node.value))
        if isinstance(node, ast.Name):
            if node.id in coords:
                return pts[:, coords[node.id]]
            return np.full(pts.shape[0], _CONSTANTS[node.id])
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](
                evaluate(node.left, pts), evaluate(node.right, pts))
        if isinstance(node, ast.UnaryOp):
            return _UNARYOPS[type(node.op)](evaluate(node.operand, pts))
        assert isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
        return _FUNCTIONS[node.func.id](evaluate(node.args[0], pts))

    def fn(pts: Array) -> Array:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.asarray(evaluate(tree, pts), dtype=float)

    return fn


# ---------------------------------------------------------------------------
# Scenario dataclasses


@dataclass(frozen=True)
class RadiusGridSpec:
    """Geometric radius grid plus the ambient ball radius R."""

    r_min: float = 0.1
    r_max: float = 0.9
    count: int = 32
    R: float = 1.0


@dataclass(frozen=True)
class AlphaPolicy:
    """Degeneracy exponent choice: fixed value or scale-matched automatic."""

    policy: str = "auto"
    value: float | None = None


@dataclass(frozen=True)
class TaskSpec:
    """One certification task: a kind plus its validated parameters."""

    kind: str
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario document."""

    name: str
    dimension: int
    seed: int
    coefficient: Mapping[str, Any] | None
    solution: Mapping[str, Any]
    alpha: AlphaPolicy
    radii: RadiusGridSpec
    tasks: tuple[TaskSpec, ...]
    out_dir: str | None
    mapping: Mapping[str, Any]


# ---------------------------------------------------------------------------
# Validation helpers


def _type_name(types) -> str:
    if isinstance(types, tuple):
        return " or ".join(t.__name__ for t in types)
    return types.__name__


def _get(d: Mapping, key: str, types, path: str, *, default=..., choices=None):
    """Fetch and type-check one field, raising ScenarioError naming it."""
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            raise ScenarioError(f"missing required field '{full}'")
        return default
    v = d[key]
    if types is float and isinstance(v, bool):
        raise ScenarioError(f"field '{full}' must be a number, got a boolean")
    if types is float and isinstance(v, int):
        v = float(v)
    if not isinstance(v, types):
        raise ScenarioError(
            f"field '{full}' must be {_type_name(types)}, got "
            f"{type(v).__name__}"
        )
    if choices is not None and v not in choices:
        raise ScenarioError(
            f"field '{full}' must be one of {', '.join(map(str, choices))}; "
            f"got {v!r}"
        )
    return v


def _reject_unknown(d: Mapping, allowed: set[str], path: str) -> None:
    for key in d:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ScenarioError(f"unknown field '{where}'")


def _number_or_expr(value, dim: int, path: str):
    """A constant or an expression string -> (callable, is_constant, const)."""
    if isinstance(value, bool):
        raise ScenarioError(f"field '{path}' must be a number or expression")
    if isinstance(value, (int, float)):
        c = float(value)
        return (lambda pts: np.full(np.atleast_2d(pts).shape[0], c)), True, c
    if isinstance(value, str):
        return compile_expression(value, dim, where=f"field '{path}'"), False, None
    raise ScenarioError(
        f"field '{path}' must be a number or an expression string"
    )


# ---------------------------------------------------------------------------
# Section validators


def _validate_radii(d: Mapping, path: str = "radii") -> RadiusGridSpec:
    _reject_unknown(d, {"r_min", "r_max", "count", "R"}, path)
    spec = RadiusGridSpec(
        r_min=_get(d, "r_min", float, path, default=0.1),
        r_max=_get(d, "r_max", float, path, default=0.9),
        count=_get(d, "count", int, path, default=32),
        R=_get(d, "R", float, path, default=1.0),
    )
    if not spec.r_min > 0:
        raise ScenarioError(f"field '{path}.r_min' must be positive")
    if not spec.r_min < spec.r_max:
        raise ScenarioError(
            f"field '{path}.r_min' must be < '{path}.r_max', got "
            f"{spec.r_min} >= {spec.r_max}"
        )
    if not spec.r_max <= spec.R:
        raise ScenarioError(
            f"field '{path}.r_max' must be <= '{path}.R', got "
            f"{spec.r_max} > {spec.R}"
        )
    if spec.count < 2:
        raise ScenarioError(f"field '{path}.count' must be >= 2")
    return spec


def _validate_alpha(d: Mapping) -> AlphaPolicy:
    _reject_unknown(d, {"policy", "value"}, "alpha")
    policy = _get(d, "policy", str, "alpha", default="auto",
                  choices=("auto", "explicit"))
    value = _get(d, "value", float, "alpha", default=None)
    if policy == "explicit":
        if value is None:
            raise ScenarioError(
                "field 'alpha.value' is required when alpha.policy is "
                "'explicit'"
            )
        if value < 2.0:
            raise ScenarioError("field 'alpha.value' must be >= 2")
    elif value is not None:
        raise ScenarioError(
            "field 'alpha.value' is only allowed when alpha.policy is "
            "'explicit'"
        )
    return AlphaPolicy(policy=policy, value=value)


def _validate_coefficient(d: Mapping, dim: int) -> None:
    path = "coefficient"
    _reject_unknown(
        d, {"family", "eta", "V", "W", "potential_bound", "drift_bound"},
        path)
    family = _get(d, "family", str, path, choices=COEFFICIENT_FAMILIES)
    eta = _get(d, "eta", float, path, default=0.0)
    if family == "identity":
        if eta:
            raise ScenarioError(
                "field 'coefficient.eta' must be absent or 0 for the "
                "identity family"
            )
    elif eta < 0:
        raise ScenarioError("field 'coefficient.eta' must be >= 0")
    if "V" in d:
        _, is_const, _ = _number_or_expr(d["V"], dim, f"{path}.V")
        if not is_const and "potential_bound" not in d:
            raise ScenarioError(
                "field 'coefficient.potential_bound' is required when "
                "coefficient.V is an expression"
            )
    if "W" in d:
        W = d["W"]
        if not isinstance(W, list) or len(W) != dim:
            raise ScenarioError(
                f"field '{path}.W' must be a list of {dim} entries"
            )
        any_expr = False
        for i, entry in enumerate(W):
            _, is_const, _ = _number_or_expr(entry, dim, f"{path}.W[{i}]")
            any_expr = any_expr or not is_const
        if any_expr and "drift_bound" not in d:
            raise ScenarioError(
                "field 'coefficient.drift_bound' is required when any "
                "coefficient.W entry is an expression"
            )
    for key in ("potential_bound", "drift_bound"):
        if _get(d, key, float, path, default=0.0) < 0:
            raise ScenarioError(f"field '{path}.{key}' must be >= 0")


def _validate_solution(d: Mapping, dim: int, radii: RadiusGridSpec,
                       has_coefficient: bool) -> None:
    path = "solution"
    _reject_unknown(
        d,
        {"family", "degree", "variant", "M", "K", "eta", "value", "datum",
         "h", "error_estimate"},
        path)
    family = _get(d, "family", str, path, choices=SOLUTION_FAMILIES)
    allowed = {
        "constant": {"value"},
        "harmonic": {"degree", "variant"},
        "exponential": {"M"},
        "oscillatory": {"M"},
        "drift": {"K"},
        "perturbed-exponential": {"eta"},
        "solved": {"datum", "h", "error_estimate"},
    }[family]
    for key in d:
        if key != "family" and key not in allowed:
            raise ScenarioError(
                f"field '{path}.{key}' does not apply to the "
                f"'{family}' family"
            )
    if family == "constant":
        if _get(d, "value", float, path, default=1.0) == 0.0:
            raise ScenarioError(f"field '{path}.value' must be nonzero")
    elif family == "harmonic":
        if dim != 2:
            raise ScenarioError(
                "field 'solution.family': harmonic polynomials require "
                "dimension = 2"
            )
        if _get(d, "degree", int, path) < 1:
            raise ScenarioError(f"field '{path}.degree' must be >= 1")
        _get(d, "variant", str, path, default="re", choices=("re", "im"))
    elif family in ("exponential", "oscillatory"):
        if _get(d, "M", float, path) <= 0:
            raise ScenarioError(f"field '{path}.M' must be positive")
    elif family == "drift":
        if _get(d, "K", float, path) <= 0:
            raise ScenarioError(f"field '{path}.K' must be positive")
    elif family == "perturbed-exponential":
        eta = _get(d, "eta", float, path)
        if not (0 <= eta and eta * radii.R < 1.0):
            raise ScenarioError(
                f"field '{path}.eta' must satisfy 0 <= eta and "
                f"eta * radii.R < 1, got {eta}"
            )
    else:  # solved
        if not has_coefficient:
            raise ScenarioError(
                "a [coefficient] section is required when solution.family "
                "is 'solved'"
            )
        compile_expression(_get(d, "datum", str, path), dim,
                           where=f"field '{path}.datum'")
        h = _get(d, "h", float, path)
        if not (0 < h < radii.R / 4):
            raise ScenarioError(
                f"field '{path}.h' must lie in (0, radii.R/4), got {h}"
            )
        if radii.r_max > radii.R - 2 * h:
            raise ScenarioError(
                f"field 'radii.r_max' must be <= radii.R - 2 * solution.h "
                f"= {radii.R - 2 * h} for solved fields, got {radii.r_max}"
            )
        _get(d, "error_estimate", bool, path, default=True)


_TASK_KEYS = {
    "bundle": {"variant", "c0"},
    "monotonicity": {"variant", "c0", "fit_c0"},
    "three-ball": {"variant", "radii", "R", "M", "sigma", "c0", "c1"},
    "vanishing": {"r_min", "r_max", "points", "window_fraction",
                  "expected_slope", "rel_tol"},
    "landis": {"R1", "steps", "delta", "epsilon", "c0", "c1_tilde", "c1",
               "ray", "enforce_gates"},
}


def _validate_c0(d: Mapping, path: str) -> None:
    if "c0" not in d:
        return
    v = d["c0"]
    if isinstance(v, str):
        if v != "fit":
            raise ScenarioError(
                f"field '{path}.c0' must be a number >= 0 or the string "
                f"'fit', got {v!r}"
            )
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
        raise ScenarioError(
            f"field '{path}.c0' must be a number >= 0 or the string 'fit'"
        )


def _validate_task(d: Mapping, index: int, dim: int,
                   scn_radii: RadiusGridSpec, has_field: bool) -> TaskSpec:
    path = f"tasks[{index}]"
    kind = _get(d, "kind", str, path, choices=TASK_KINDS)
    _reject_unknown(d, _TASK_KEYS[kind] | {"kind", "name"}, path)
    name = _get(d, "name", str, path, default=f"{kind}-{index}")
    params = {k: v for k, v in d.items() if k not in ("kind", "name")}

    if kind in ("bundle", "monotonicity"):
        variant = _get(d, "variant", str, path, default="classical",
                       choices=("classical", "variable"))
        _validate_c0(d, path)
        if variant == "classical" and "c0" in d:
            raise ScenarioError(
                f"field '{path}.c0' only applies to the variable variant"
            )
        if d.get("c0") == "fit" or d.get("fit_c0"):
            if variant != "variable":
                raise ScenarioError(
                    f"field '{path}': c0 fitting requires the variable "
                    "variant"
                )
        if variant == "variable" and not has_field:
            raise ScenarioError(
                f"field '{path}.variant': the variable variant needs a "
                "[coefficient] section or a solution that carries its "
                "equation"
            )
        if kind == "monotonicity" and scn_radii.count < 16:
            raise ScenarioError(
                "field 'radii.count' must be >= 16 for monotonicity verdicts"
            )
    elif kind == "three-ball":
        variant = _get(d, "variant", str, path, default="classical",
                       choices=("classical", "variable"))
        triple = _get(d, "radii", list, path, default=[0.1, 0.25, 0.75])
        if len(triple) != 3 or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in triple):
            raise ScenarioError(
                f"field '{path}.radii' must be a list of three numbers"
            )
        r1, r2, r3 = map(float, triple)
        R = _get(d, "R", float, path, default=scn_radii.R)
        if not (0 < r1 < r2 < r3 <= R):
            raise ScenarioError(
                f"field '{path}.radii' must be increasing with "
                f"r3 <= R = {R}, got {triple}"
            )
        if variant == "classical":
            if not 2 * r2 < r3:
                raise ScenarioError(
                    f"field '{path}.radii' needs 2 * r2 < r3 for the "
                    f"classical variant, got {triple}"
                )
            if _get(d, "M", float, path, default=0.0) < 0:
                raise ScenarioError(f"field '{path}.M' must be >= 0")
            for key in ("sigma", "c0", "c1"):
                if key in d:
                    raise ScenarioError(
                        f"field '{path}.{key}' only applies to the "
                        "variable variant"
                    )
        else:
            sigma = _get(d, "sigma", float, path, default=2.0)
            if sigma <= 1.0:
                raise ScenarioError(f"field '{path}.sigma' must be > 1")
            if not sigma * r2 < r3:
                raise ScenarioError(
                    f"field '{path}.radii' needs sigma * r2 < r3 for the "
                    f"variable variant, got sigma={sigma}, radii={triple}"
                )
            _validate_c0(d, path)
            if not has_field:
                raise ScenarioError(
                    f"field '{path}.variant': the variable variant needs "
                    "a [coefficient] section or a solution that carries "
                    "its equation"
                )
    elif kind == "vanishing":
        r_min = _get(d, "r_min", float, path, default=1e-3)
        r_max = _get(d, "r_max", float, path, default=0.5)
        if r_min < 1e-3:
            raise ScenarioError(
                f"field '{path}.r_min' must be >= 1e-3 (mass ratios "
                "underflow below that scale)"
            )
        if not r_min < r_max <= scn_radii.R:
            raise ScenarioError(
                f"field '{path}': need r_min < r_max <= radii.R, got "
                f"({r_min}, {r_max})"
            )
        if _get(d, "points", int, path, default=24) < 2:
            raise ScenarioError(f"field '{path}.points' must be >= 2")
        wf = _get(d, "window_fraction", float, path, default=0.25)
        if not 0 < wf <= 1:
            raise ScenarioError(
                f"field '{path}.window_fraction' must lie in (0, 1]"
            )
        _get(d, "expected_slope", float, path, default=None)
        if _get(d, "rel_tol", float, path, default=0.01) <= 0:
            raise ScenarioError(f"field '{path}.rel_tol' must be positive")
    else:  # landis
        if _get(d, "R1", float, path) <= 1:
            raise ScenarioError(f"field '{path}.R1' must be > 1")
        steps = _get(d, "steps", int, path, default=2)
        if not 0 <= steps <= 3:
            raise ScenarioError(
                f"field '{path}.steps' must lie in [0, 3] (desk scale)"
            )
        delta = _get(d, "delta", float, path, default=0.1)
        epsilon = _get(d, "epsilon", float, path, default=0.5)
        if not 0 < delta < epsilon:
            raise ScenarioError(
                f"field '{path}': need 0 < delta < epsilon, got "
                f"({delta}, {epsilon})"
            )
        _validate_c0(d, path)
        if "ray" in d:
            ray = d["ray"]
            ok = (isinstance(ray, list) and len(ray) == dim and all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in ray))
            if not ok or all(float(v) == 0.0 for v in ray):
                raise ScenarioError(
                    f"field '{path}.ray' must be a nonzero list of {dim} "
                    "numbers"
                )
        _get(d, "enforce_gates", bool, path, default=False)
        if not has_field:
            raise ScenarioError(
                f"field '{path}': the decay iteration needs a "
                "[coefficient] section or a solution that carries its "
                "equation"
            )
    return TaskSpec(kind=kind, name=name, params=params)


# ---------------------------------------------------------------------------
# Top-level parse / validate


def scenario_from_mapping(doc: Mapping[str, Any]) -> Scenario:
    """Validate a parsed scenario document and freeze it as a Scenario.

    Raises ScenarioError naming the offending field for any structural
    problem; task parameters are checked against the target operations'
    preconditions here, before any computation starts.
    """
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a table at top level")
    _reject_unknown(
        set(doc),
        {"name", "dimension", "seed", "out_dir", "coefficient", "solution",
         "alpha", "radii", "tasks"},
        "")
    name = _get(doc, "name", str, "")
    if not name or any(c in name for c in "/\\ \t\n"):
        raise ScenarioError(
            "field 'name' must be a non-empty token without spaces or "
            "path separators"
        )
    dim = _get(doc, "dimension", int, "")
    if dim not in (2, 3):
        raise ScenarioError(f"field 'dimension' must be 2 or 3, got {dim}")
    seed = _get(doc, "seed", int, "", default=0)
    out_dir = _get(doc, "out_dir", str, "", default=None)

    radii = _validate_radii(_get(doc, "radii", dict, "", default={}))
    alpha = _validate_alpha(_get(doc, "alpha", dict, "", default={}))

    coefficient = _get(doc, "coefficient", dict, "", default=None)
    if coefficient is not None:
        _validate_coefficient(coefficient, dim)

    solution = _get(doc, "solution", dict, "")
    _validate_solution(solution, dim, radii, coefficient is not None)

    # raw fields (constant family) carry no equation of their own
    has_field = coefficient is not None or solution["family"] not in (
        "constant",)

    raw_tasks = _get(doc, "tasks", list, "", default=[])
    tasks = []
    names = set()
    for i, t in enumerate(raw_tasks):
        if not isinstance(t, Mapping):
            raise ScenarioError(f"field 'tasks[{i}]' must be a table")
        spec = _validate_task(t, i, dim, radii, has_field)
        if spec.name in names:
            raise ScenarioError(
                f"field 'tasks[{i}].name': duplicate task name "
                f"{spec.name!r}"
            )
        names.add(spec.name)
        tasks.append(spec)

    return Scenario(
        name=name, dimension=dim, seed=seed, coefficient=coefficient,
        solution=solution, alpha=alpha, radii=radii, tasks=tuple(tasks),
        out_dir=out_dir, mapping=doc,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {p}: {exc}") from None
    try:
        doc = _toml.loads(raw.decode("utf-8"))
    except (_toml.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"parse error in {p}: {exc}") from None
    return scenario_from_mapping(doc)


# ---------------------------------------------------------------------------
# Builders


def _broadcast_vector(entries, dim: int, path: str):
    fns = []
    consts = []
    for i, entry in enumerate(entries):
        fn, is_const, c = _number_or_expr(entry, dim, f"{path}[{i}]")
        fns.append(fn)
        consts.append(c if is_const else None)

    def W(pts: Array) -> Array:
        pts = np.atleast_2d(pts)
        return np.stack([f(pts) for f in fns], axis=1)

    norm = (math.sqrt(sum(c * c for c in consts))
            if all(c is not None for c in consts) else None)
    return W, norm


def build_field(scn: Scenario) -> CoefficientField | None:
    """Construct the scenario's coefficient field, if one is declared."""
    d = scn.coefficient
    if d is None:
        return None
    dim, R = scn.dimension, scn.radii.R
    kwargs: dict[str, Any] = {}
    if "V" in d:
        V_fn, is_const, c = _number_or_expr(d["V"], dim, "coefficient.V")
        kwargs["V"] = V_fn
        kwargs["potential_bound"] = (
            float(d["potential_bound"]) if "potential_bound" in d
            else abs(c))
    elif "potential_bound" in d:
        kwargs["potential_bound"] = float(d["potential_bound"])
    if "W" in d:
        W_fn, norm = _broadcast_vector(d["W"], dim, "coefficient.W")
        kwargs["W"] = W_fn
        kwargs["drift_bound"] = (
            float(d["drift_bound"]) if "drift_bound" in d else norm)
    elif "drift_bound" in d:
        kwargs["drift_bound"] = float(d["drift_bound"])

    family = d["family"]
    if family == "identity":

        def A(pts: Array) -> Array:
            return np.broadcast_to(
                np.eye(dim), (np.atleast_2d(pts).shape[0], dim, dim)).copy()

        def grad_A(pts: Array) -> Array:
            return np.zeros((np.atleast_2d(pts).shape[0], dim, dim, dim))

        return CoefficientField(
            dim=dim, A=A, grad_A=grad_A, ellipticity=1.0, lipschitz=0.0,
            label="identity", **kwargs)
    if family == "diagonal-linear":
        return diagonal_linear_field(dim, float(d.get("eta", 0.0)), R,
                                     **kwargs)
    return rotation_perturbation_field(dim, float(d.get("eta", 0.0)), R,
                                       **kwargs)


def build_solution(scn: Scenario,
                   fld: CoefficientField | None) -> SolutionField:
    """Construct the scenario's solution (running the solver if requested)."""
    d = scn.solution
    dim = scn.dimension
    family = d["family"]
    if family == "constant":
        c = float(d.get("value", 1.0))
        return from_callables(
            dim,
            lambda X: np.full(np.atleast_2d(X).shape[0], c),
            lambda X: np.zeros_like(np.atleast_2d(X), dtype=float),
            lambda X: np.zeros(np.atleast_2d(X).shape[0]),
            label=f"constant({c})",
        )
    if family == "harmonic":
        return harmonic_polynomial(dim, int(d["degree"]),
                                   variant=d.get("variant", "re"))
    if family == "exponential":
        return exponential_solution(dim, float(d["M"]))
    if family == "oscillatory":
        return oscillatory_solution(dim, float(d["M"]))
    if family == "drift":
        return drift_solution(dim, float(d["K"]))
    if family == "perturbed-exponential":
        return perturbed_exponential_solution(dim, float(d["eta"]),
                                              scn.radii.R)
    assert family == "solved"
    assert fld is not None
    datum = compile_expression(d["datum"], dim, where="field 'solution.datum'")
    domain = build_domain(scn)
    return solve_dirichlet(fld, domain, datum, float(d["h"]),
                           error_estimate=bool(d.get("error_estimate", True)))


def build_domain(scn: Scenario, levels: int = 5) -> BallDomain:
    """The centered ball the scenario integrates over."""
    try:
        return centered_ball(scn.radii.R, scn.dimension, levels=levels)
    except PreconditionError as exc:  # pragma: no cover - guarded upstream
        raise ScenarioError(str(exc)) from None


def task_field(scn: Scenario, fld: CoefficientField | None,
               sol: SolutionField) -> CoefficientField | None:
    """The field tasks should certify against: declared, else the equation."""
    if fld is not None:
        return fld
    return sol.equation
