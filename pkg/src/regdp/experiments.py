"""Seeded convergence studies and their CSV reports.

Noise is drawn from numpy's PCG64 generator. Each noise level gets its own
stream, keyed by ``(seed, index of the level)`` through ``SeedSequence``, so
a study computed in parallel produces the same rows as a serial run.
"""

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields

import numpy as np

from . import linop, nonlinear
from ._workers import worker_count
from .discrepancy import DPConfig, regularize_dp
from .errors import BudgetExhausted, InvalidPlan, IoError, NoiseRejection

log = logging.getLogger(__name__)

GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class NoiseSpec:
    seed: int = 0
    ratio: float = 1.0
    max_resamples: int = 100

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"noise ratio must lie in (0, 1], got {self.ratio}")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be at least 1")


def make_noisy(f, delta, spec=None, stream=0, weights=None):
    """``f + ratio * delta * e`` for a seeded random unit vector ``e``.

    ``weights`` selects a weighted Euclidean norm (for example trapezoid
    weights of a grid); the noise has exactly norm ``ratio * delta`` in it.
    Directions are redrawn until ``||f_delta|| > delta``.

    Raises
    ------
    NoiseRejection
        When ``max_resamples`` draws all give ``||f_delta|| <= delta``.
    """
    spec = spec or NoiseSpec()
    f = np.asarray(f, dtype=np.float64)
    delta = float(delta)
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if delta == 0:
        return f.copy()
    w = np.ones_like(f) if weights is None else np.asarray(weights, dtype=np.float64)

    def norm(x):
        return math.sqrt(float(np.dot(w, x * x)))

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, stream])))
    for _ in range(spec.max_resamples):
        e = rng.standard_normal(f.shape[0])
        e /= norm(e)
        f_delta = f + (spec.ratio * delta) * e
        if norm(f_delta) > delta:
            return f_delta
    raise NoiseRejection(
        f"||f_delta|| > delta not met in {spec.max_resamples} draws (||f|| = {norm(f):.3g}, delta = {delta:.3g})"
    )


@dataclass(frozen=True)
class LinearProblem:
    """Dense operator with exact solution ``y``, projected onto N(A)^perp on construction."""

    A: np.ndarray
    y: np.ndarray
    name: str = "dense"
    projected: bool = field(default=False, init=False)

    def __post_init__(self):
        A = linop.as_operator(self.A)
        y = linop.as_vector(self.y, "y")
        S = linop.decompose(A)
        null = linop.nullspace_basis(S)
        if null:
            N = np.column_stack(null)
            y_perp = y - N @ (N.T @ y)
            if np.linalg.norm(y - y_perp) > 0:
                log.info("projected y onto the orthogonal complement of N(A)")
                object.__setattr__(self, "projected", True)
            y = y_perp
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_data(cls, A, f, name="dense"):
        """Problem whose solution is the minimum-norm solution of ``Au = f``."""
        S = linop.decompose(A)
        return cls(A, linop.min_norm_solution(S, f), name)


@dataclass(frozen=True)
class NonlinearProblem:
    y: nonlinear.SobolevVector
    fmap: nonlinear.ForwardMapSpec = nonlinear.VOLTERRA_CUBIC
    budget: int = 100_000
    name: str = "volterra_cubic"


def reference_problem(n=500):
    """``A = diag(j**-0.5)``, ``y_j`` proportional to ``j**-1.5`` with ``||y|| = 1``."""
    j = np.arange(1, n + 1, dtype=np.float64)
    y = j**-1.5
    return LinearProblem(np.diag(j**-0.5), y / np.linalg.norm(y), "reference")


def rank_deficient_problem(n=100, rank=None, seed=0):
    """Random orthogonal factors around the reference spectrum, truncated to ``rank``.

    ``y`` is built as a minimum-norm solution so it is orthogonal to N(A).
    """
    rank = n // 2 if rank is None else rank
    rng = np.random.Generator(np.random.PCG64(seed))
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    j = np.arange(1, rank + 1, dtype=np.float64)
    A = (U[:, :rank] * j**-0.5) @ V[:, :rank].T
    coef = j**-1.5
    f = U[:, :rank] @ (j**-0.5 * coef / np.linalg.norm(coef))
    return LinearProblem.from_data(A, f, "rank_deficient")


def reference_nonlinear_problem(n=64, budget=100_000):
    grid = nonlinear.Grid1D(n)
    y = nonlinear.SobolevVector.from_function(lambda x: np.sin(np.pi * x), grid)
    return NonlinearProblem(y, budget=budget, name="sine")


@dataclass(frozen=True)
class StudyPlan:
    problem: object
    deltas: tuple
    dp: DPConfig = DPConfig()
    noise: NoiseSpec = NoiseSpec()
    output_path: str | None = None

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        if not deltas:
            raise InvalidPlan("a study needs at least one noise level")
        if any(not d > 0 for d in deltas):
            raise InvalidPlan("noise levels must be positive")
        if any(d1 <= d2 for d1, d2 in zip(deltas, deltas[1:])):
            raise InvalidPlan("noise levels must be strictly decreasing")
        object.__setattr__(self, "deltas", deltas)

    def digest(self):
        """SHA-256 of a canonical description of the plan."""
        p = self.problem
        if isinstance(p, LinearProblem):
            problem = {"kind": "linear", "name": p.name, "A": p.A.tolist(), "y": p.y.tolist()}
        elif isinstance(p, NonlinearProblem):
            problem = {"kind": "nonlinear", "name": p.name, "map": p.fmap.kind,
                       "y": p.y.values.tolist(), "budget": p.budget}
        else:
            problem = {"kind": type(p).__name__}
        doc = {
            "problem": problem,
            "deltas": list(self.deltas),
            "dp": [self.dp.C, self.dp.rel_tol, self.dp.max_iter, self.dp.bracket_seed],
            "noise": [self.noise.seed, self.noise.ratio, self.noise.max_resamples],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    def header(self):
        lines = {
            "generator": GENERATOR,
            "seed": str(self.noise.seed),
            "plan_digest": self.digest(),
        }
        if getattr(self.problem, "projected", False):
            lines["note"] = "y projected onto the orthogonal complement of N(A)"
        return lines


@dataclass(frozen=True)
class StudyRow:
    delta: float
    a: float
    h_at_a: float
    u_norm: float
    y_norm: float
    error: float
    residual: float
    ineq_17_slack: float
    seed: int


ROW_FIELDS = tuple(f.name for f in fields(StudyRow))


def _parallel_map(fn, items):
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_linear_study(plan):
    """Discrepancy-principle regularization of ``f = Ay`` at every noise level."""
    p = plan.problem
    if not isinstance(p, LinearProblem):
        raise InvalidPlan("run_linear_study needs a LinearProblem")
    S = linop.decompose(p.A)
    f = S.forward(p.y)
    y_norm = float(np.linalg.norm(p.y))

    def row(item):
        k, delta = item
        f_delta = make_noisy(f, delta, plan.noise, stream=k)
        sol = regularize_dp(S, f_delta, delta, plan.dp)
        u = sol.u
        diff = u - p.y
        err2 = float(np.dot(diff, diff))
        return StudyRow(
            delta=delta,
            a=sol.a,
            h_at_a=sol.residual_norm,
            u_norm=sol.solution_norm,
            y_norm=y_norm,
            error=math.sqrt(err2),
            residual=float(np.linalg.norm(S.forward(u) - linop.project_range_closure(S, f_delta))),
            ineq_17_slack=2.0 * float(np.dot(p.y, p.y - u)) - err2,
            seed=plan.noise.seed,
        )

    return _parallel_map(row, list(enumerate(plan.deltas)))


def run_nonlinear_study(plan, flagged=None):
    """A-priori (``a = delta``) quasi-minimization at every noise level.

    When the budget runs out before the target is met, the row reports the
    best iterate, a warning is logged and its ``delta`` is appended to
    ``flagged`` if a list is given; the study carries on.
    """
    p = plan.problem
    if not isinstance(p, NonlinearProblem):
        raise InvalidPlan("run_nonlinear_study needs a NonlinearProblem")
    grid = p.y.grid
    y = p.y.values
    f = p.fmap.values(y, grid)
    y_h1 = nonlinear.h1_norm(p.y)
    y_norm = nonlinear.l2_norm(p.y)

    def norm(x):
        return math.sqrt(float(np.dot(grid.weights, x * x)))

    def row(item):
        k, delta = item
        f_delta = nonlinear.SobolevVector(
            make_noisy(f, delta, plan.noise, stream=k, weights=grid.weights), grid
        )
        target = (2.0 + y_h1) * delta
        exhausted = False
        try:
            res = nonlinear.quasi_minimize(p.fmap, f_delta, delta, target, p.budget)
        except BudgetExhausted as exc:
            log.warning("delta=%g: %s", delta, exc)
            res, exhausted = exc.result, True
        u = res.u.values
        err = norm(u - y)
        resid = norm(p.fmap.values(u, grid) - f_delta.values)
        return exhausted, StudyRow(
            delta=delta,
            a=delta,
            h_at_a=resid,
            u_norm=norm(u),
            y_norm=y_norm,
            error=err,
            residual=resid,
            ineq_17_slack=2.0 * float(np.dot(grid.weights, y * (y - u))) - err * err,
            seed=plan.noise.seed,
        )

    out = _parallel_map(row, list(enumerate(plan.deltas)))
    if flagged is not None:
        flagged.extend(r.delta for exhausted, r in out if exhausted)
    return [r for _, r in out]


def run_study(plan):
    if isinstance(plan.problem, NonlinearProblem):
        return run_nonlinear_study(plan)
    return run_linear_study(plan)


def _fmt(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.16e}"


def write_table(records, columns, path, header=None):
    """CSV with ``# key: value`` comment lines, one header row and one line per record.

    Floats use scientific notation with 17 significant digits.
    """
    if not records:
        raise ValueError("nothing to write")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for key, value in (header or {}).items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec in records:
                writer.writerow([_fmt(v) for v in rec])
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def write_report(rows, path, header=None):
    write_table([astuple(r) for r in rows], ROW_FIELDS, path, header)


def read_report(path):
    """Parse a report written by :func:`write_report`; returns ``(header, rows)``."""
    header = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [
        StudyRow(**{k: (int(v) if k == "seed" else float(v)) for k, v in rec.items()})
        for rec in reader
    ]
    return header, rows
