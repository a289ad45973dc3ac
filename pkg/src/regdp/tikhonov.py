"""Tikhonov regularization through spectral filter factors."""

from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveParameter, ParameterOutOfRange


def _check_a(a):
    a = float(a)
    if not a > 0:
        raise NonpositiveParameter(f"regularization parameter must be positive, got {a}")
    return a


@dataclass(frozen=True)
class RegularizedSolution:
    """Minimizer of ``||Au - f||^2 + a ||u||^2`` and its diagnostics."""

    a: float
    u: np.ndarray
    residual_norm: float
    solution_norm: float
    functional_value: float

    def to_json(self):
        return {
            "a": self.a,
            "u": self.u.tolist(),
            "residual_norm": self.residual_norm,
            "solution_norm": self.solution_norm,
            "functional_value": self.functional_value,
        }


def filter_factor(sigma, a):
    """Spectral multiplier ``sigma / (sigma**2 + a)`` of ``(A^T A + a)^{-1} A^T``."""
    a = _check_a(a)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("singular values must be nonnegative")
    out = sigma / (sigma * sigma + a)
    return float(out) if out.ndim == 0 else out


def filter_operator_norm(a):
    """Operator norm ``1 / (2 sqrt(a))`` of ``(A^T A + a)^{-1} A^T``, attained at ``sigma = sqrt(a)``."""
    return 0.5 / np.sqrt(_check_a(a))


def saturation_norm(a, b, s_max):
    """``sup_{0 <= s <= s_max} a s**b / (s + a)`` for ``0 < b < 1``.

    The interior maximizer is ``s* = a b / (1 - b)``; when it lies in range
    the value is ``c a**b`` with ``c = b**b (1 - b)**(1 - b)``, otherwise the
    supremum sits on the boundary ``s = s_max``.
    """
    a = _check_a(a)
    if not 0 < b < 1:
        raise ParameterOutOfRange(f"exponent b must lie in (0, 1), got {b}")
    if not s_max > 0:
        raise NonpositiveParameter(f"s_max must be positive, got {s_max}")
    s_star = a * b / (1.0 - b)
    if s_star <= s_max:
        return b**b * (1.0 - b) ** (1.0 - b) * a**b
    return a * s_max**b / (s_max + a)


def solve(S, f_delta, a, tol=None):
    """Tikhonov minimizer ``u_a = (A^T A + a)^{-1} A^T f_delta``.

    Parameters
    ----------
    S : SingularSystem
        Decomposition of the operator.
    f_delta : (rows,) array_like
        Data. Components in N(A^T) are annihilated by the filter and need
        not be projected out beforehand.
    a : float
        Regularization parameter, ``a > 0``.
    tol : float, optional
        Singular values at or below ``tol`` are treated as exact zeros
        (default ``1e-10 * sigma_1``), which keeps ``u_a`` orthogonal to the
        numerical null-space.

    Returns
    -------
    RegularizedSolution
    """
    a = _check_a(a)
    f = S.check_rows(f_delta)
    mask = S.active(tol)
    sigma = S.sigma
    beta = S.left_vectors.T @ f
    coef = np.where(mask, sigma / (sigma * sigma + a), 0.0) * beta
    u = S.right_vectors @ coef

    # residual split into the filtered range part, dropped modes and the left complement
    damp = np.where(mask, a / (sigma * sigma + a), 1.0) * beta
    outside = f - S.left_vectors @ beta
    residual = float(np.sqrt(np.dot(damp, damp) + np.dot(outside, outside)))
    unorm = float(np.linalg.norm(coef))
    return RegularizedSolution(
        a=a,
        u=u,
        residual_norm=residual,
        solution_norm=unorm,
        functional_value=residual * residual + a * unorm * unorm,
    )


def functional_value(S, f_delta, a, u):
    """``||Au - f_delta||^2 + a ||u||^2``."""
    a = _check_a(a)
    f = S.check_rows(f_delta)
    u = S.check_cols(u)
    r = S.forward(u) - f
    return float(np.dot(r, r) + a * np.dot(u, u))


def euler_residual(S, f_delta, sol):
    """``||(A^T A + a) u - A^T f_delta||`` evaluated with the factored operator."""
    f = S.check_rows(f_delta)
    lhs = S.adjoint(S.forward(sol.u)) + sol.a * sol.u
    return float(np.linalg.norm(lhs - S.adjoint(f)))
