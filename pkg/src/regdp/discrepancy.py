"""Discrepancy-principle choice of the Tikhonov parameter.

The residual of the Tikhonov minimizer, as a function of ``a``,

    h(a) = ||A u_a - f|| = a ||(AA^T + a)^{-1} f||,

is strictly increasing on ``(0, inf)`` from 0 up to the norm of the data's
range component, so ``h(a) = C delta`` has exactly one root whenever that
norm exceeds ``C delta``. The root is bracketed geometrically and refined by
bisection in ``log a``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import tikhonov
from .errors import MaxIterExceeded, NoRoot, NonpositiveParameter
from .linop import project_range_closure

#: Factor by which the initial bracket is widened per step.
EXPANSION = 10.0


@dataclass(frozen=True)
class DPConfig:
    C: float = 1.0
    rel_tol: float = 1e-9
    max_iter: int = 200
    bracket_seed: float | None = None

    def __post_init__(self):
        if not self.C >= 1:
            raise ValueError(f"C must be >= 1, got {self.C}")
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if self.max_iter < 10:
            raise ValueError(f"max_iter must be >= 10, got {self.max_iter}")
        if self.bracket_seed is not None and not self.bracket_seed > 0:
            raise ValueError(f"bracket_seed must be positive, got {self.bracket_seed}")


@dataclass(frozen=True)
class DPResult:
    a: float
    h_at_a: float
    iterations: int
    bracket: tuple

    def to_json(self):
        return {
            "a": self.a,
            "h_at_a": self.h_at_a,
            "iterations": self.iterations,
            "bracket": [self.bracket[0], self.bracket[1]],
        }


def _range_coefficients(S, f_delta, tol):
    f = S.check_rows(f_delta)
    mask = S.active(tol)
    return S.sigma[mask] ** 2, S.left_vectors[:, mask].T @ f


def _h(mu, beta, a):
    w = (a / (mu + a)) * beta
    return math.sqrt(float(np.dot(w, w)))


def discrepancy_value(S, f_delta, a, tol=None):
    """Residual ``h(a)`` of the Tikhonov minimizer against the projected data.

    Components of ``f_delta`` in N(A^T) are dropped, so ``h(0+) = 0``.
    """
    a = float(a)
    if not a > 0:
        raise NonpositiveParameter(f"regularization parameter must be positive, got {a}")
    mu, beta = _range_coefficients(S, f_delta, tol)
    return _h(mu, beta, a)


def solve_dp(S, f_delta, delta, cfg=None, tol=None):
    """Root ``a(delta)`` of ``h(a) = C delta``.

    Raises
    ------
    NoRoot
        If ``delta <= 0`` or the projected data norm does not exceed ``C delta``.
    MaxIterExceeded
        If ``|h(a) - C delta| <= rel_tol * C delta`` is not reached in
        ``max_iter`` evaluations.
    """
    cfg = cfg or DPConfig()
    delta = float(delta)
    if not delta > 0:
        raise NoRoot(f"noise level must be positive, got {delta}")
    mu, beta = _range_coefficients(S, f_delta, tol)
    target = cfg.C * delta
    fnorm = math.sqrt(float(np.dot(beta, beta)))
    if not fnorm > target:
        raise NoRoot(f"projected data norm {fnorm:.6g} does not exceed C*delta = {target:.6g}")

    seed = cfg.bracket_seed if cfg.bracket_seed is not None else delta
    a, h, iterations, bracket = increasing_root(
        lambda a: _h(mu, beta, a), target, seed, cfg.rel_tol, cfg.max_iter
    )
    return DPResult(a, h, iterations, bracket)


def increasing_root(fn, target, seed, rel_tol, max_iter, expansion=EXPANSION):
    """Solve ``fn(a) = target`` for a strictly increasing positive ``fn``.

    The bracket starts at ``seed`` and is widened by ``expansion`` until it
    straddles the target, then bisected at geometric midpoints until
    ``|fn(a) - target| <= rel_tol * target``.

    Returns
    -------
    a, fn(a), number of evaluations, (lo, hi)
    """
    tol_h = rel_tol * target
    a = seed
    h = fn(a)
    iterations = 1
    if abs(h - target) <= tol_h:
        return a, h, iterations, (a, a)

    lo = hi = a
    h_lo = h_hi = h
    if h < target:
        while h_hi < target:
            if iterations >= max_iter:
                raise MaxIterExceeded("bracket expansion did not cross the target")
            lo, h_lo = hi, h_hi
            hi *= expansion
            h_hi = fn(hi)
            iterations += 1
    else:
        while h_lo > target:
            if iterations >= max_iter:
                raise MaxIterExceeded("bracket expansion did not cross the target")
            hi, h_hi = lo, h_lo
            lo /= expansion
            h_lo = fn(lo)
            iterations += 1
    for a, h in ((lo, h_lo), (hi, h_hi)):
        if abs(h - target) <= tol_h:
            return a, h, iterations, (lo, hi)

    while True:
        if iterations >= max_iter:
            raise MaxIterExceeded(f"no root to rel_tol={rel_tol} in {max_iter} evaluations")
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise MaxIterExceeded("bracket collapsed before reaching the tolerance")
        h = fn(mid)
        iterations += 1
        if abs(h - target) <= tol_h:
            break
        if h < target:
            lo, h_lo = mid, h
        else:
            hi, h_hi = mid, h
    # a strictly increasing fn has a single crossing inside the bracket
    if not h_lo < h_hi:
        raise MaxIterExceeded("function not strictly increasing on the final bracket")
    return mid, h, iterations, (lo, hi)


def regularize_dp(S, f_delta, delta, cfg=None, tol=None):
    """Tikhonov solution at the discrepancy-principle parameter.

    The returned residual is measured against the range component of
    ``f_delta``, so it equals ``C delta`` to within ``rel_tol``.
    """
    res = solve_dp(S, f_delta, delta, cfg, tol)
    return tikhonov.solve(S, project_range_closure(S, f_delta, tol), res.a, tol)
