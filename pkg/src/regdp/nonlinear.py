"""A-priori regularization of a nonlinear equation on a discrete Sobolev space.

The penalized functional is ``F(u) = ||A(u) - f|| + delta ||u||_1`` with the
noise level itself as the regularization weight and neither norm squared.
``||.||`` is the trapezoid L2 norm on a uniform grid of ``[0, 1]`` and
``||.||_1`` adds the L2 norm of the forward-difference derivative.

Any ``u`` with ``F(u) <= m(delta) + delta`` is acceptable. The infimum
``m(delta)`` is never computed; callers pass an explicit ``target`` that
dominates it (``(2 + ||y||_1) delta`` when ``y`` is the exact solution and
``||A(y) - f|| <= delta``).
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BudgetExhausted, NonpositiveParameter

FORWARD_KINDS = ("volterra_cubic", "custom")


@dataclass(frozen=True)
class Grid1D:
    n: int = 64

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 nodes, got {self.n}")

    @property
    def spacing(self):
        return 1.0 / (self.n - 1)

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.n)

    @property
    def weights(self):
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


@dataclass(frozen=True)
class SobolevVector:
    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, fn, grid):
        return cls(fn(grid.nodes), grid)

    def with_values(self, values):
        return SobolevVector(values, self.grid)

    def to_json(self):
        return {"n": self.grid.n, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["values"], Grid1D(int(doc["n"])))


def _l2sq(values, grid):
    return float(np.dot(grid.weights, values * values))


def _h1sq(values, grid):
    d = np.diff(values)
    return _l2sq(values, grid) + float(np.dot(d, d)) / grid.spacing


def l2_norm(u):
    """Trapezoid approximation of the L2(0, 1) norm."""
    return math.sqrt(_l2sq(u.values, u.grid))


def l2_inner(u, w):
    return float(np.dot(u.grid.weights, u.values * w.values))


def h1_norm(u):
    """``sqrt(||u||^2 + ||Du||^2)`` with forward differences for ``Du``."""
    return math.sqrt(_h1sq(u.values, u.grid))


@dataclass(frozen=True)
class ForwardMapSpec:
    """Forward map ``A``.

    ``volterra_cubic`` is ``A(u)(x) = int_0^x u + u**3 dt`` by the cumulative
    trapezoid rule. ``custom`` takes ``forward(values, grid)`` and
    ``vjp(values, cotangent, grid)`` (the transposed Jacobian applied to a
    cotangent vector).
    """

    kind: str = "volterra_cubic"
    forward: Callable | None = None
    vjp: Callable | None = None

    def __post_init__(self):
        if self.kind not in FORWARD_KINDS:
            raise ValueError(f"unknown forward map {self.kind!r}")
        if self.kind == "custom" and (self.forward is None or self.vjp is None):
            raise ValueError("custom forward maps need both forward and vjp")

    def values(self, u, grid):
        if self.kind == "custom":
            return np.asarray(self.forward(u, grid), dtype=np.float64)
        g = u + u**3
        out = np.empty_like(g)
        out[0] = 0.0
        np.cumsum(0.5 * grid.spacing * (g[:-1] + g[1:]), out=out[1:])
        return out

    def transpose_jacobian(self, u, c, grid):
        if self.kind == "custom":
            return np.asarray(self.vjp(u, c, grid), dtype=np.float64)
        # node m feeds intervals m-1 and m of the cumulative trapezoid
        tail = np.cumsum(c[::-1])[::-1]
        kt = np.empty_like(c)
        kt[:-1] = tail[1:]
        kt[-1] = 0.0
        kt[1:] += tail[1:]
        kt *= 0.5 * grid.spacing
        return (1.0 + 3.0 * u * u) * kt


VOLTERRA_CUBIC = ForwardMapSpec()


def apply_forward(fmap, u):
    return u.with_values(fmap.values(u.values, u.grid))


def penalized_value(fmap, u, f_delta, delta):
    """``||A(u) - f_delta|| + delta * ||u||_1``."""
    delta = float(delta)
    if not delta > 0:
        raise NonpositiveParameter(f"delta must be positive, got {delta}")
    grid = u.grid
    r = fmap.values(u.values, grid) - f_delta.values
    return math.sqrt(_l2sq(r, grid)) + delta * math.sqrt(_h1sq(u.values, grid))


def surrogate(fmap, u, f_delta, delta, grid):
    """Smooth surrogate ``||A(u) - f||^2 + (delta ||u||_1)^2`` and its gradient.

    Works on raw value arrays.
    """
    w = grid.weights
    r = fmap.values(u, grid) - f_delta
    d = np.diff(u)
    h = grid.spacing
    value = float(np.dot(w, r * r)) + delta * delta * (float(np.dot(w, u * u)) + float(np.dot(d, d)) / h)
    dtd = np.zeros_like(u)
    dtd[:-1] -= d
    dtd[1:] += d
    grad = 2.0 * fmap.transpose_jacobian(u, w * r, grid) + 2.0 * delta * delta * (w * u + dtd / h)
    return value, grad


@dataclass(frozen=True)
class QuasiMinResult:
    u: SobolevVector
    F_value: float
    target: float
    evaluations: int


def quasi_minimize(fmap, f_delta, delta, target, budget=100_000, start=None, gtol=1e-10):
    """Find ``u`` with ``penalized_value(u) <= target``.

    Gradient descent on :func:`surrogate` with Barzilai-Borwein trial steps
    and Armijo backtracking, started from ``start`` (zero by default). Every
    accepted iterate is scored with the true functional; the best one is
    returned once the descent stalls or the evaluation budget runs out.

    Raises
    ------
    BudgetExhausted
        When no iterate reaches ``target``; ``exc.result`` holds the best one.
    """
    delta = float(delta)
    if not delta > 0:
        raise NonpositiveParameter(f"delta must be positive, got {delta}")
    if not target > 0:
        raise NonpositiveParameter(f"target must be positive, got {target}")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    grid = f_delta.grid
    f = f_delta.values
    u = np.zeros(grid.n) if start is None else np.array(start.values, dtype=np.float64)

    def true_F(x):
        r = fmap.values(x, grid) - f
        return math.sqrt(_l2sq(r, grid)) + delta * math.sqrt(_h1sq(x, grid))

    evaluations = 1
    g_val, grad = surrogate(fmap, u, f, delta, grid)
    best_u, best_F = u, true_F(u)
    g0 = float(np.linalg.norm(grad))
    step = 1.0 / max(g0, 1.0)
    while evaluations < budget:
        gnorm2 = float(np.dot(grad, grad))
        if gnorm2 <= (gtol * max(g0, 1e-300)) ** 2:
            break
        # Armijo backtracking from the current trial step
        while True:
            trial = u - step * grad
            t_val, t_grad = surrogate(fmap, trial, f, delta, grid)
            evaluations += 1
            if t_val <= g_val - 1e-4 * step * gnorm2 or evaluations >= budget:
                break
            step *= 0.5
        if not t_val < g_val:
            break
        s = trial - u
        y = t_grad - grad
        u, g_val, grad = trial, t_val, t_grad
        F_u = true_F(u)
        if F_u < best_F:
            best_u, best_F = u, F_u
        sy = float(np.dot(s, y))
        step = float(np.dot(s, s)) / sy if sy > 0 else 2.0 * step

    result = QuasiMinResult(SobolevVector(best_u, grid), best_F, float(target), evaluations)
    if best_F > target:
        raise BudgetExhausted(
            f"best F = {best_F:.6g} exceeds target {target:.6g} after {evaluations} evaluations",
            result,
        )
    return result
