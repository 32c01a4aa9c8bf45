"""Config-driven experiment runner and the ``freqlab`` command line.

``freqlab run <scenario.toml>`` loads a scenario, builds its coefficient
field and solution, executes the declared certification tasks in order and
writes one CSV/JSON artifact per task plus a run manifest.  ``freqlab
sweep`` repeats a scenario over a cartesian grid of parameter overrides and
aggregates a summary CSV; ``freqlab validate`` checks a scenario without
computing anything.

Conventions, shared by every command:

* human-readable progress goes to standard error; machine-readable output
  goes to files only (no plots are rendered — the CSVs are plot-ready);
* identical (scenario, seed, levels) produce byte-identical task artifacts;
* exit codes: 0 all verdicts pass, 1 some verdict failed, 2 usage or
  configuration error, 3 internal error;
* JSON artifacts carry a ``schema`` tag and validate against
  ``freqlab/schemas/output.schema.json``; non-finite numbers are encoded
  as the strings "Infinity", "-Infinity", "NaN";
* CSV artifacts are comma-separated with '.' decimal and scientific
  notation at 17 significant digits.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

try:  # python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from . import __version__
from .certify import (
    CertifyConfig,
    IterationReport,
    ThreeBallReport,
    VanishingReport,
    fit_c0_bundle,
    landis_iteration,
    three_ball_classical,
    three_ball_variable,
    vanishing_order,
)
from .errors import FreqlabError, PreconditionError, ScenarioError
from .fields import CoefficientField
from .frequency import (
    FrequencyBundle,
    MonotonicityReport,
    bundle_csv,
    classical_bundle,
    default_alpha,
    geometric_radii,
    variable_bundle,
    verify_monotonicity,
    with_c0,
)
from .scenario import (
    Scenario,
    TaskSpec,
    build_domain,
    build_field,
    build_solution,
    load_scenario,
    scenario_from_mapping,
    task_field,
)
from .solutions import SolutionField

log = logging.getLogger("freqlab")

DEFAULT_LEVELS = 5
EXIT_PASS = 0
EXIT_VERDICT_FAIL = 1
EXIT_CONFIG_ERROR = 2
EXIT_INTERNAL_ERROR = 3


# ---------------------------------------------------------------------------
# Serialization


def output_schema() -> dict[str, Any]:
    """The shipped JSON schema every freqlab JSON artifact validates against."""
    from importlib import resources

    text = resources.files("freqlab").joinpath(
        "schemas/output.schema.json").read_text()
    return json.loads(text)


def jsonable(obj: Any) -> Any:
    """Convert reports/arrays to plain JSON types.

    Non-finite floats become the strings "Infinity", "-Infinity", "NaN" so
    artifacts stay strict JSON.
    """
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "NaN"
        if math.isinf(f):
            return "Infinity" if f > 0 else "-Infinity"
        return f
    return obj


def write_json(path: Path, obj: Mapping[str, Any]) -> None:
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2,
                      allow_nan=False)
    path.write_text(text + "\n")


def _fmt(x: float) -> str:
    return "%.16e" % float(x)


def three_ball_dict(rep: ThreeBallReport) -> dict[str, Any]:
    return {
        "schema": "freqlab/three-ball/v1",
        "kind": rep.kind,
        "radii": list(rep.radii),
        "R": rep.R,
        "sigma": rep.sigma,
        "kappa": rep.kappa,
        "norms": list(rep.norms),
        "lhs": rep.lhs,
        "rhs_factors": list(rep.rhs_factors),
        "log_slack": rep.log_slack,
        "fitted_C": rep.fitted_C,
        "predicted_scaling": rep.predicted_scaling,
        "prefactor_log": rep.prefactor_log,
        "M": rep.M,
        "K": rep.K,
        "eta": rep.eta,
        "lam": rep.lam,
        "c0": rep.c0,
        "c1": rep.c1,
        "holds_with_fitted": rep.holds_with_fitted,
    }


def monotonicity_dict(rep: MonotonicityReport, bundle: FrequencyBundle,
                      csv_name: str) -> dict[str, Any]:
    return {
        "schema": "freqlab/monotonicity/v1",
        "label": rep.label,
        "passed": rep.passed,
        "worst_violation": rep.worst_violation,
        "budget": rep.budget,
        "violation_count": rep.violation_count,
        "alpha": bundle.alpha,
        "c0": bundle.c0,
        "kind": bundle.kind,
        "radii": rep.radii,
        "Ntilde": rep.Ntilde,
        "bundle_csv": csv_name,
    }


def vanishing_dict(rep: VanishingReport, expected: float | None,
                   rel_tol: float, passed: bool) -> dict[str, Any]:
    return {
        "schema": "freqlab/vanishing/v1",
        "slope": rep.slope,
        "intercept": rep.intercept,
        "bound_exponent": rep.bound_exponent,
        "window": rep.window,
        "radii": rep.radii,
        "h_values": rep.h_values,
        "expected_slope": expected,
        "rel_tol": rel_tol,
        "passed": passed,
    }


def landis_dict(rep: IterationReport) -> dict[str, Any]:
    return {
        "schema": "freqlab/landis/v1",
        "R1": rep.R1,
        "delta": rep.delta,
        "epsilon": rep.epsilon,
        "c1_tilde": rep.c1_tilde,
        "gates": [
            {"name": g.name, "lhs": g.lhs, "rhs": g.rhs,
             "satisfied": g.satisfied}
            for g in rep.gates
        ],
        "gates_satisfied": rep.gates_satisfied,
        "completed": rep.completed,
        "halted_reason": rep.halted_reason,
        "all_dominated": rep.all_dominated,
        "steps": [
            {
                "k": s.k,
                "R_k": s.R_k,
                "x_k": list(s.x_k),
                "measured": s.measured,
                "chained_bound": s.chained_bound,
                "sigma_fallback": s.sigma_fallback,
                "dominated": s.dominated,
                "three_ball": (None if s.three_ball is None
                               else three_ball_dict(s.three_ball)),
            }
            for s in rep.steps
        ],
    }


# ---------------------------------------------------------------------------
# Task execution


@dataclass(frozen=True)
class TaskResult:
    """One manifest entry: verdict, artifacts and summary metrics."""

    name: str
    kind: str
    verdict: str  # "pass" | "fail" | "error"
    outputs: tuple[str, ...]
    metrics: dict[str, float]
    wall_clock_s: float
    error: str | None = None


class _RunContext:
    """Shared built objects for one scenario run."""

    def __init__(self, scn: Scenario, levels: int, seed: int):
        self.scn = scn
        self.levels = levels
        self.seed = seed
        self.fld = build_field(scn)
        self.sol = build_solution(scn, self.fld)
        self.eq = task_field(scn, self.fld, self.sol)
        self.domain = build_domain(scn, levels=levels)
        self.radii = geometric_radii(
            scn.radii.r_min, scn.radii.r_max, scn.radii.count)
        self.rng = np.random.default_rng(seed)

    def alpha(self, M: float) -> float:
        if self.scn.alpha.policy == "explicit":
            assert self.scn.alpha.value is not None
            return self.scn.alpha.value
        return default_alpha(M, self.scn.radii.R)

    def declared_M(self) -> float:
        return self.eq.potential_bound if self.eq is not None else 0.0

    def declared_K(self) -> float:
        return self.eq.drift_bound if self.eq is not None else 0.0

    def declared_eta(self) -> float:
        return self.eq.lipschitz if self.eq is not None else 0.0

    def build_bundle(self, variant: str, c0_spec) -> FrequencyBundle:
        alpha = self.alpha(self.declared_M())
        if variant == "classical":
            return classical_bundle(
                self.sol, self.domain, alpha, self.radii,
                M=self.declared_M(), levels=self.levels)
        assert self.eq is not None
        c0 = 0.0 if c0_spec in (None, "fit") else float(c0_spec)
        b = variable_bundle(
            self.sol, self.eq, self.domain, alpha, self.radii, c0=c0,
            levels=self.levels)
        if c0_spec == "fit":
            b = with_c0(b, fit_c0_bundle(b))
        return b


def _run_bundle(ctx: _RunContext, task: TaskSpec,
                out: Path) -> tuple[str, list[str], dict[str, float]]:
    p = task.params
    b = ctx.build_bundle(p.get("variant", "classical"), p.get("c0"))
    csv_name = f"{task.name}.csv"
    (out / csv_name).write_text(bundle_csv(b))
    metrics = {
        "alpha": b.alpha,
        "N_at_r_max": float(b.N[-1]),
        "Ntilde_at_r_max": float(b.Ntilde[-1]),
    }
    return "pass", [csv_name], metrics


def _run_monotonicity(ctx: _RunContext, task: TaskSpec,
                      out: Path) -> tuple[str, list[str], dict[str, float]]:
    p = task.params
    c0_spec = p.get("c0", "fit" if p.get("fit_c0") else None)
    b = ctx.build_bundle(p.get("variant", "classical"), c0_spec)
    rep = verify_monotonicity(b)
    csv_name = f"{task.name}.csv"
    (out / csv_name).write_text(bundle_csv(b))
    write_json(out / f"{task.name}.json", monotonicity_dict(rep, b, csv_name))
    metrics = {
        "worst_violation": rep.worst_violation,
        "budget": rep.budget,
        "c0": b.c0,
    }
    return ("pass" if rep.passed else "fail"), \
        [csv_name, f"{task.name}.json"], metrics


def _run_three_ball(ctx: _RunContext, task: TaskSpec,
                    out: Path) -> tuple[str, list[str], dict[str, float]]:
    p = task.params
    triple = tuple(float(v) for v in p.get("radii", (0.1, 0.25, 0.75)))
    R = float(p.get("R", ctx.scn.radii.R))
    if p.get("variant", "classical") == "classical":
        M = float(p.get("M", ctx.declared_M()))
        rep = three_ball_classical(ctx.sol, M, triple, R, levels=ctx.levels)
    else:
        assert ctx.eq is not None
        c0_spec = p.get("c0", 0.0)
        if c0_spec == "fit":
            b = ctx.build_bundle("variable", 0.0)
            c0 = fit_c0_bundle(b)
        else:
            c0 = float(c0_spec)
        sigma = float(p.get("sigma", 2.0))
        cfg = CertifyConfig(c0=c0, sigma=sigma, r1=triple[0], r2=triple[1],
                            r3=triple[2])
        rep = three_ball_variable(
            ctx.sol, ctx.eq, cfg, triple, R, sigma=sigma,
            c1=float(p.get("c1", 1.0)), levels=ctx.levels)
    d = three_ball_dict(rep)
    write_json(out / f"{task.name}.json", d)
    metrics = {
        "kappa": rep.kappa,
        "log_slack": rep.log_slack,
        "fitted_C": rep.fitted_C,
    }
    return ("pass" if rep.holds_with_fitted else "fail"), \
        [f"{task.name}.json"], metrics


def _run_vanishing(ctx: _RunContext, task: TaskSpec,
                   out: Path) -> tuple[str, list[str], dict[str, float]]:
    p = task.params
    rep = vanishing_order(
        ctx.sol,
        float(p.get("r_min", 1e-3)),
        float(p.get("r_max", 0.5)),
        points=int(p.get("points", 24)),
        window_fraction=float(p.get("window_fraction", 0.25)),
        M=ctx.declared_M(), K=ctx.declared_K(), eta=ctx.declared_eta(),
        levels=ctx.levels,
    )
    expected = p.get("expected_slope")
    rel_tol = float(p.get("rel_tol", 0.01))
    passed = True
    if expected is not None:
        passed = abs(rep.slope - float(expected)) <= rel_tol * abs(
            float(expected))
    csv_name = f"{task.name}.csv"
    lines = ["r,h"]
    lines += [f"{_fmt(r)},{_fmt(h)}"
              for r, h in zip(rep.radii, rep.h_values)]
    (out / csv_name).write_text("\n".join(lines) + "\n")
    write_json(out / f"{task.name}.json",
               vanishing_dict(rep, expected, rel_tol, passed))
    metrics = {"slope": rep.slope, "intercept": rep.intercept}
    return ("pass" if passed else "fail"), \
        [csv_name, f"{task.name}.json"], metrics


def _run_landis(ctx: _RunContext, task: TaskSpec,
                out: Path) -> tuple[str, list[str], dict[str, float]]:
    p = task.params
    assert ctx.eq is not None
    c0_spec = p.get("c0", 1.0)
    if c0_spec == "fit":
        b = ctx.build_bundle("variable", 0.0)
        c0 = fit_c0_bundle(b)
    else:
        c0 = float(c0_spec)
    cfg = CertifyConfig(
        c0=c0, delta=float(p.get("delta", 0.1)),
        epsilon=float(p.get("epsilon", 0.5)))
    ray = p.get("ray")
    rep = landis_iteration(
        ctx.sol, ctx.eq, cfg, float(p["R1"]), int(p.get("steps", 2)),
        ray=None if ray is None else tuple(float(v) for v in ray),
        c1_tilde=float(p.get("c1_tilde", 0.1)),
        c1=float(p.get("c1", 1.0)),
        enforce_gates=bool(p.get("enforce_gates", False)),
        levels=ctx.levels,
    )
    write_json(out / f"{task.name}.json", landis_dict(rep))
    metrics = {
        "steps_run": float(len(rep.steps)),
        "measured_first": (rep.steps[0].measured if rep.steps else 0.0),
        "gates_satisfied": float(rep.gates_satisfied),
    }
    verdict = "pass" if (rep.completed and rep.all_dominated) else "fail"
    return verdict, [f"{task.name}.json"], metrics


_RUNNERS = {
    "bundle": _run_bundle,
    "monotonicity": _run_monotonicity,
    "three-ball": _run_three_ball,
    "vanishing": _run_vanishing,
    "landis": _run_landis,
}


def execute_task(ctx: _RunContext, task: TaskSpec, out: Path) -> TaskResult:
    t0 = time.perf_counter()
    try:
        verdict, outputs, metrics = _RUNNERS[task.kind](ctx, task, out)
        err = None
    except Exception as exc:
        verdict, outputs, metrics = "error", [], {}
        err = f"{type(exc).__name__}: {exc}"
    dt = time.perf_counter() - t0
    log.info("task %-24s %-12s %-5s (%.2fs)", task.name, task.kind, verdict,
             dt)
    if err:
        log.error("task %s failed: %s", task.name, err)
    return TaskResult(
        name=task.name, kind=task.kind, verdict=verdict,
        outputs=tuple(outputs), metrics=metrics, wall_clock_s=dt, error=err)


# ---------------------------------------------------------------------------
# Scenario runs


def _hash_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def hash_mapping(doc: Mapping[str, Any]) -> str:
    return _hash_bytes(
        json.dumps(jsonable(doc), sort_keys=True).encode("utf-8"))


def run_scenario(
    scn: Scenario,
    out_dir: Path,
    *,
    levels: int = DEFAULT_LEVELS,
    seed: int | None = None,
    scenario_hash: str | None = None,
) -> dict[str, Any]:
    """Execute every task of a validated scenario; write artifacts + manifest.

    Returns the manifest dictionary (also written to ``manifest.json``).
    Deterministic: identical (scenario, seed, levels) produce byte-identical
    task artifacts; only the manifest's wall-clock entries vary between runs.
    """
    t0 = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    use_seed = scn.seed if seed is None else seed
    log.info("scenario %s: %d task(s), levels=%d, seed=%d -> %s",
             scn.name, len(scn.tasks), levels, use_seed, out_dir)
    ctx = _RunContext(scn, levels, use_seed)
    results = [execute_task(ctx, task, out_dir) for task in scn.tasks]
    manifest = {
        "schema": "freqlab/manifest/v1",
        "scenario": scn.name,
        "scenario_hash": scenario_hash or hash_mapping(scn.mapping),
        "tool_version": __version__,
        "seed": use_seed,
        "levels": levels,
        "solution": ctx.sol.label,
        "field": ctx.eq.label if ctx.eq is not None else None,
        "tasks": [
            {
                "name": r.name,
                "kind": r.kind,
                "verdict": r.verdict,
                "outputs": list(r.outputs),
                "metrics": r.metrics,
                "wall_clock_s": r.wall_clock_s,
                "error": r.error,
            }
            for r in results
        ],
        "wall_clock_s": time.perf_counter() - t0,
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def manifest_exit_code(manifest: Mapping[str, Any]) -> int:
    verdicts = [t["verdict"] for t in manifest["tasks"]]
    if any(v == "error" for v in verdicts):
        return EXIT_INTERNAL_ERROR
    if any(v == "fail" for v in verdicts):
        return EXIT_VERDICT_FAIL
    return EXIT_PASS


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class Axis:
    """One swept parameter: a dotted path into the scenario document."""

    path: tuple[str, ...]
    values: tuple[Any, ...]

    @property
    def dotted(self) -> str:
        return ".".join(self.path)


def parse_axis(text: str) -> Axis:
    """Parse ``section.key=v1,v2,...`` with TOML scalar semantics."""
    if "=" not in text:
        raise ScenarioError(
            f"axis {text!r} must look like section.key=v1,v2,..."
        )
    path_text, _, values_text = text.partition("=")
    path = tuple(p for p in path_text.strip().split(".") if p)
    if not path:
        raise ScenarioError(f"axis {text!r} has an empty parameter path")
    tokens = [t.strip() for t in values_text.split(",")]
    if not tokens or any(not t for t in tokens):
        raise ScenarioError(f"axis {text!r} has an empty value")
    values = []
    for tok in tokens:
        try:
            values.append(_toml.loads(f"v = {tok}")["v"])
        except Exception:
            values.append(tok)
    return Axis(path=path, values=tuple(values))


def set_path(doc: dict, path: Sequence[str], value: Any) -> None:
    """Set a dotted path; integer tokens index lists; parent must exist."""
    node: Any = doc
    for i, token in enumerate(path):
        last = i == len(path) - 1
        where = ".".join(path[: i + 1])
        if isinstance(node, list):
            try:
                idx = int(token)
            except ValueError:
                raise ScenarioError(
                    f"axis path '{where}': expected a list index"
                ) from None
            if not 0 <= idx < len(node):
                raise ScenarioError(
                    f"axis path '{where}': index {idx} out of range"
                )
            if last:
                node[idx] = value
                return
            node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[token] = value
                return
            if token not in node:
                raise ScenarioError(
                    f"axis path '{where}' does not exist in the scenario"
                )
            node = node[token]
        else:
            raise ScenarioError(
                f"axis path '{where}' descends into a scalar"
            )


def _value_token(v: Any) -> str:
    s = str(v)
    return "".join(c if (c.isalnum() or c in ".+-") else "_" for c in s)


def sweep_points(base: Mapping[str, Any],
                 axes: Sequence[Axis]) -> list[tuple[str, dict, dict]]:
    """Cartesian product of axis values -> (name, mapping, assignment)."""
    points: list[tuple[str, dict, dict]] = []
    combos: list[list[tuple[Axis, Any]]] = [[]]
    for ax in axes:
        combos = [c + [(ax, v)] for c in combos for v in ax.values]
    width = max(3, len(str(max(len(combos) - 1, 0))))
    for i, combo in enumerate(combos):
        doc = copy.deepcopy(dict(base))
        assignment = {}
        parts = []
        for ax, v in combo:
            set_path(doc, ax.path, v)
            assignment[ax.dotted] = v
            parts.append(f"{ax.path[-1]}={_value_token(v)}")
        name = f"point-{i:0{width}d}-" + "-".join(parts)
        points.append((name, doc, assignment))
    return points


def _sweep_worker(payload) -> tuple[int, dict[str, Any]]:
    """Run one sweep point in a worker process (shares nothing)."""
    index, name, doc, out_dir, levels, seed = payload
    scn = scenario_from_mapping(doc)
    manifest = run_scenario(
        scn, Path(out_dir), levels=levels, seed=seed,
        scenario_hash=hash_mapping(doc))
    return index, manifest


def _summary_rows(points, assignments, manifests) -> tuple[list[str],
                                                           list[list[str]]]:
    axis_cols = list(assignments[0]) if assignments else []
    metric_cols: list[str] = []
    seen = set()
    for manifest in manifests:
        for t in manifest["tasks"]:
            for key in t["metrics"]:
                col = f"{t['name']}.{key}"
                if col not in seen:
                    seen.add(col)
                    metric_cols.append(col)
            col = f"{t['name']}.verdict"
            if col not in seen:
                seen.add(col)
                metric_cols.append(col)
    header = ["point"] + axis_cols + metric_cols
    rows = []
    for (name, _, _), assignment, manifest in zip(points, assignments,
                                                  manifests):
        cells = {f"{t['name']}.verdict": t["verdict"]
                 for t in manifest["tasks"]}
        for t in manifest["tasks"]:
            for key, val in t["metrics"].items():
                cells[f"{t['name']}.{key}"] = _fmt(val)
        row = [name]
        for col in axis_cols:
            v = assignment[col]
            row.append(_fmt(v) if isinstance(v, (int, float))
                       and not isinstance(v, bool) else str(v))
        row += [cells.get(col, "") for col in metric_cols]
        rows.append(row)
    return header, rows


def run_sweep(
    base: Mapping[str, Any],
    axes: Sequence[Axis],
    out_dir: Path,
    *,
    levels: int = DEFAULT_LEVELS,
    seed: int | None = None,
    parallel: int = 1,
) -> dict[str, Any]:
    """Run the cartesian sweep; write per-point artifacts and summary.csv."""
    t0 = time.perf_counter()
    points = sweep_points(base, axes)
    # validate every point before running anything
    for name, doc, _ in points:
        try:
            scenario_from_mapping(doc)
        except ScenarioError as exc:
            raise ScenarioError(f"sweep point {name}: {exc}") from None
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("sweep: %d point(s) over %s with %d worker(s)",
             len(points), ", ".join(ax.dotted for ax in axes) or "(no axes)",
             max(parallel, 1))
    payloads = [
        (i, name, doc, str(out_dir / name), levels, seed)
        for i, (name, doc, _) in enumerate(points)
    ]
    manifests: list[dict[str, Any] | None] = [None] * len(points)
    if parallel > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for index, manifest in pool.map(_sweep_worker, payloads):
                manifests[index] = manifest
    else:
        for payload in payloads:
            index, manifest = _sweep_worker(payload)
            manifests[index] = manifest
    assert all(m is not None for m in manifests)
    assignments = [assignment for _, _, assignment in points]
    header, rows = _summary_rows(points, assignments, manifests)
    csv_text = "\n".join([",".join(header)] +
                         [",".join(row) for row in rows]) + "\n"
    (out_dir / "summary.csv").write_text(csv_text)
    sweep_manifest = {
        "schema": "freqlab/sweep/v1",
        "scenario": str(base.get("name", "")),
        "scenario_hash": hash_mapping(base),
        "tool_version": __version__,
        "axes": [{"path": ax.dotted, "values": list(ax.values)}
                 for ax in axes],
        "points": [
            {
                "name": name,
                "out_dir": name,
                "assignment": assignment,
                "exit": manifest_exit_code(m),
            }
            for (name, _, assignment), m in zip(points, manifests)
        ],
        "summary_csv": "summary.csv",
        "wall_clock_s": time.perf_counter() - t0,
    }
    write_json(out_dir / "sweep-manifest.json", sweep_manifest)
    return sweep_manifest


# ---------------------------------------------------------------------------
# Command line


def _resolve_out_dir(arg: str | None, scn: Scenario | None) -> Path:
    if arg:
        return Path(arg)
    env = os.environ.get("FREQLAB_OUT_DIR")
    if env:
        return Path(env)
    if scn is not None and scn.out_dir:
        return Path(scn.out_dir)
    name = scn.name if scn is not None else "sweep"
    return Path("freqlab-out") / name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqlab",
        description=(
            "Frequency-function laboratory: run declarative scenarios, "
            "sweep parameters, validate scenario files."
        ),
    )
    parser.add_argument("--version", action="version",
                        version=f"freqlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="path to a scenario TOML file")
        p.add_argument("--levels", type=int, default=DEFAULT_LEVELS,
                       help="quadrature refinement level (default %(default)s)")
        p.add_argument("--out-dir", default=None,
                       help="output directory (default: $FREQLAB_OUT_DIR, "
                            "then the scenario's out_dir, then ./freqlab-out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's seed")
        p.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="worker processes for sweep points "
                            "(tasks within a run stay sequential)")

    run_p = sub.add_parser("run", help="execute a scenario's tasks")
    common(run_p)

    sweep_p = sub.add_parser(
        "sweep", help="run a scenario over a cartesian parameter grid")
    common(sweep_p)
    sweep_p.add_argument(
        "--axis", action="append", default=[], metavar="PATH=V1,V2,...",
        help="swept parameter, e.g. solution.M=1,4,16 (repeatable)")

    val_p = sub.add_parser(
        "validate", help="parse and validate a scenario without running it")
    val_p.add_argument("scenario", help="path to a scenario TOML file")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    scn = load_scenario(args.scenario)
    out_dir = _resolve_out_dir(args.out_dir, scn)
    manifest = run_scenario(
        scn, out_dir, levels=args.levels, seed=args.seed,
        scenario_hash=_hash_bytes(Path(args.scenario).read_bytes()))
    code = manifest_exit_code(manifest)
    log.info("run %s: %s (exit %d)", scn.name,
             "all verdicts pass" if code == 0 else "verdict failures",
             code)
    return code


def _cmd_sweep(args: argparse.Namespace) -> int:
    scn = load_scenario(args.scenario)  # validates the base document
    axes = [parse_axis(a) for a in args.axis]
    if not axes:
        raise ScenarioError("sweep needs at least one --axis PATH=V1,V2,...")
    out_dir = _resolve_out_dir(args.out_dir, scn)
    sweep_manifest = run_sweep(
        scn.mapping, axes, out_dir, levels=args.levels, seed=args.seed,
        parallel=max(1, args.parallel))
    codes = [p["exit"] for p in sweep_manifest["points"]]
    if any(c == EXIT_INTERNAL_ERROR for c in codes):
        return EXIT_INTERNAL_ERROR
    if any(c != EXIT_PASS for c in codes):
        return EXIT_VERDICT_FAIL
    return EXIT_PASS


def _cmd_validate(args: argparse.Namespace) -> int:
    scn = load_scenario(args.scenario)
    # dry-build the cheap objects so family/parameter mismatches surface
    fld = build_field(scn)
    if scn.solution["family"] != "solved":  # solving is a real computation
        build_solution(scn, fld)
    log.info("scenario OK: name=%s dimension=%d tasks=%d",
             scn.name, scn.dimension, len(scn.tasks))
    return EXIT_PASS


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except (ScenarioError, PreconditionError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG_ERROR
    except FreqlabError as exc:
        log.error("internal error: %s", exc)
        return EXIT_INTERNAL_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        log.error("internal error: %s: %s", type(exc).__name__, exc)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
