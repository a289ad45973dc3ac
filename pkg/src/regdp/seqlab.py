"""Diagonal sequence-space model of an ill-posed problem.

The operator is self-adjoint, ``A = diag(lambda_j)`` with ``lambda_j**2 =
mu_j = j**-q``, and the data have energies ``|f_j|**2 = j**-r``. With the
defaults ``q = 1, r = 2`` the data are square-summable but lie outside the
range of ``A`` since ``sum f_j**2 / mu_j`` is the harmonic series.

Infinite vectors are never stored. Sums run over ``1 <= j <= N`` in chunks
with compensated accumulation; what lies beyond ``N`` is either bracketed by
the integrals of the (decreasing) continuous summand over ``[N, inf)`` and
``[N + 1, inf)`` or dropped, depending on ``tail_mode``.

The bad-pair construction builds, for a noise level ``delta``, an element
``v = B**b z`` with ``||f - Av|| <= delta`` whose distance to the
discrepancy-principle solution ``u_delta`` does not shrink with ``delta``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import zeta

from ._workers import worker_count
from .discrepancy import increasing_root
from .errors import NonpositiveParameter, NoRoot, ParameterOutOfRange, TruncationInsufficient
from .summation import stream_sum, stream_sums, tail_enclosure

TAIL_MODES = ("integral_sandwich", "drop")


class Enclosure(NamedTuple):
    """Closed interval known to contain a quantity."""

    lo: float
    hi: float

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self):
        return 0.5 * (self.hi - self.lo)

    def __contains__(self, x):
        return self.lo <= x <= self.hi


def _power(j, e):
    if e == 0:
        return np.ones_like(j)
    if e == 1:
        return j
    if e == -1:
        return 1.0 / j
    if e == -0.5:
        return 1.0 / np.sqrt(j)
    return j**e


@dataclass(frozen=True)
class PowerLawModel:
    """Spectral model ``mu_j = j**-q``, ``|f_j|**2 = j**-r``.

    Attributes
    ----------
    q : float
        Eigenvalue exponent of ``B = A**2``.
    r : float
        Data exponent, ``r > 1``.
    N : int
        Number of explicitly summed terms.
    tail_mode : {"integral_sandwich", "drop"}
        The sandwich has closed forms only for ``q = 1, r = 2``; other
        exponents must use ``"drop"``.
    """

    q: float = 1.0
    r: float = 2.0
    N: int = 10**7
    tail_mode: str = "integral_sandwich"

    def __post_init__(self):
        if not self.q > 0:
            raise ParameterOutOfRange(f"q must be positive, got {self.q}")
        if not self.r > 1:
            raise ParameterOutOfRange(f"r must exceed 1, got {self.r}")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterOutOfRange(f"N must be a positive integer, got {self.N}")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}, got {self.tail_mode!r}")
        if self.tail_mode == "integral_sandwich" and not self.canonical:
            raise ParameterOutOfRange("integral_sandwich tails need q = 1 and r = 2; use tail_mode='drop'")

    @property
    def canonical(self):
        return self.q == 1 and self.r == 2

    @property
    def sandwich(self):
        return self.tail_mode == "integral_sandwich"

    def mu(self, j):
        return _power(j, -self.q)

    def lam(self, j):
        return _power(j, -0.5 * self.q)

    def data(self, j):
        return _power(j, -0.5 * self.r)

    def data_norm(self):
        """``||f|| = sqrt(zeta(r))``."""
        return math.sqrt(zeta(self.r))

    def range_divergence(self, n=None):
        """Partial sum ``sum_{j <= n} f_j**2 / mu_j``; unbounded in ``n`` iff ``r <= q + 1``."""
        n = self.N if n is None else int(n)
        e = self.q - self.r
        return stream_sum(lambda j: _power(j, e), 1, n)


def _check_a(a):
    a = float(a)
    if not a > 0:
        raise NonpositiveParameter(f"regularization parameter must be positive, got {a}")
    return a


def phi_enclosure(model, a):
    """Enclosure of ``sum_j g_j / (mu_j + a)**2``.

    In drop mode the enclosure is degenerate (the explicit partial sum) and
    ``N >= 10 / a`` is required.
    """
    a = _check_a(a)
    if not model.sandwich and model.N < 10.0 / a:
        raise TruncationInsufficient(f"N = {model.N} < 10/a = {10.0 / a:.3g}")
    # g / (mu + a)**2 rewritten as j**(2q - r) / (1 + a j**q)**2
    e = 2 * model.q - model.r
    q = model.q

    def term(j):
        d = 1.0 + a * _power(j, q)
        return _power(j, e) / (d * d)

    s = stream_sum(term, 1, model.N)
    if not model.sandwich:
        return Enclosure(s, s)
    lo, hi = tail_enclosure(lambda x: 1.0 / (a * (1.0 + a * x)), model.N)
    return Enclosure(s + lo, s + hi)


def phi(model, a):
    return phi_enclosure(model, a).mid


def psi(a):
    """Closed form of ``int_0^1 (t + a)**-2 dt = 1/a - 1/(1 + a)``."""
    a = _check_a(a)
    return 1.0 / (a * (1.0 + a))


def dp_value_enclosure(model, a):
    a = _check_a(a)
    enc = phi_enclosure(model, a)
    return Enclosure(a * math.sqrt(enc.lo), a * math.sqrt(enc.hi))


def dp_value_model(model, a):
    """Discrepancy ``h(a) = a * sqrt(sum_j g_j / (mu_j + a)**2)``."""
    return dp_value_enclosure(model, a).mid


def dp_root_model(model, delta, C=1.0, rel_tol=1e-9, max_iter=200):
    """Root of ``h(a) = C delta`` for the power-law model.

    For the default exponents the root behaves like ``C**2 delta**2``.
    """
    delta = float(delta)
    if not delta > 0:
        raise NoRoot(f"noise level must be positive, got {delta}")
    if not C >= 1:
        raise ValueError(f"C must be >= 1, got {C}")
    target = C * delta
    fnorm = model.data_norm()
    if not target < fnorm:
        raise NoRoot(f"C*delta = {target:.6g} is not below ||f|| = {fnorm:.6g}")
    a, _, _, _ = increasing_root(
        lambda a: dp_value_model(model, a), target, target * target, rel_tol, max_iter, expansion=2.0
    )
    return a


def phi_table(model, a_values):
    """Rows ``(a, phi, psi, a*phi, phi_lo, phi_hi)`` for a grid of ``a``."""
    rows = []
    for a in a_values:
        enc = phi_enclosure(model, a)
        rows.append(
            {
                "a": float(a),
                "phi": enc.mid,
                "psi": psi(a),
                "a_phi": a * enc.mid,
                "phi_lo": enc.lo,
                "phi_hi": enc.hi,
            }
        )
    return rows


@dataclass(frozen=True)
class SparsePrefixVector:
    """Vector given by ``rule(j)`` for ``j <= J``, zero beyond, with point overrides."""

    rule: Callable
    J: int
    overrides: dict = field(default_factory=dict)

    def values(self, j):
        out = np.where(j <= self.J, self.rule(j), 0.0)
        for k, val in self.overrides.items():
            out[j == k] = val
        return out

    def norm(self):
        return math.sqrt(stream_sum(lambda j: self.values(j) ** 2, 1, self.J))


def nearest_index(model, a):
    """``argmin_j |mu_j - a|``; ties go to the smaller index."""
    j0 = max(1, int(math.floor(a ** (-1.0 / model.q))))
    best, best_gap = None, math.inf
    for j in range(max(1, j0 - 1), j0 + 3):
        gap = abs(j ** -model.q - a)
        if gap < best_gap:
            best, best_gap = j, gap
    return best


def construction_cutoff(model, delta):
    """Smallest-form ``J`` with ``sum_{j > J} j**-r <= (delta/8)**2``.

    For ``r = 2`` this is ``ceil(64 / delta**2) + 1``.
    """
    r = model.r
    return int(math.ceil((64.0 / ((r - 1.0) * delta * delta)) ** (1.0 / (r - 1.0)))) + 1


@dataclass(frozen=True)
class BadPairCertificate:
    """Measured quantities of one bad-pair construction.

    ``tail_gap`` is ``||T(f - Av - p)||``, the term the lower bound on
    ``gap_38`` subtracts from ``norm_Tp``.
    """

    delta: float
    C: float
    b: float
    a: float
    j_star: int
    J: int
    norm_p: float
    norm_Tp: float
    tp_lower_bound: float
    resid_32: float
    resid_37: float
    gap_38: float
    gap_lower_bound: float
    dist: float
    norm_v: float
    norm_z: float
    tail_gap: float

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))

    def to_json(self):
        return dict(zip(self.field_names(), astuple(self)))

    def violations(self, rtol=1e-12):
        """Names of certificate inequalities that fail (empty when all hold)."""
        d = self.delta
        checks = {
            "norm_p": abs(self.norm_p - 0.5 * d) <= rtol * d,
            "resid_32": self.resid_32 <= d / 8,
            "resid_37": self.resid_37 <= d,
            "norm_Tp": self.norm_Tp >= self.tp_lower_bound,
            "tail_gap": self.tail_gap <= self.gap_lower_bound,
            "gap_38": self.gap_38 >= self.gap_lower_bound,
        }
        return [name for name, ok in checks.items() if not ok]


def build_bad_pair(model, delta, C=1.0, b=0.5):
    """Construct ``p``, ``z`` and ``v = B**b z`` for one noise level and measure them.

    ``p = (delta/2) e_{j*}`` sits where ``mu_j`` is closest to ``a(delta)``,
    so ``T = (B + a)**-1 A`` nearly attains its norm on it. ``z`` reproduces
    ``f - p`` exactly on ``j <= J`` and vanishes beyond, which leaves
    ``||f - A B**b z - p|| = ||f restricted to j > J|| <= delta/8``.
    """
    if not 0 < b < 1:
        raise ParameterOutOfRange(f"exponent b must lie in (0, 1), got {b}")
    delta = float(delta)
    a = dp_root_model(model, delta, C)
    j_star = nearest_index(model, a)
    J = construction_cutoff(model, delta)
    if J > model.N or j_star > J:
        raise TruncationInsufficient(
            f"construction needs j* = {j_star} <= J = {J} <= N = {model.N}"
        )

    half = 0.5 * delta
    mu, lam, data = model.mu, model.lam, model.data
    js = np.array([float(j_star)])
    f_s, l_s, m_s = float(data(js)[0]), float(lam(js)[0]), float(mu(js)[0])

    p = SparsePrefixVector(np.zeros_like, J, {j_star: half})
    z = SparsePrefixVector(
        lambda j: data(j) / (lam(j) * mu(j) ** b), J, {j_star: (f_s - half) / (l_s * m_s**b)}
    )
    v = SparsePrefixVector(
        lambda j: mu(j) ** b * z.rule(j), J, {j_star: m_s**b * z.overrides[j_star]}
    )

    def terms(j):
        fj, lj, mj = data(j), lam(j), mu(j)
        tj = lj / (mj + a)
        pj, vj, zj = p.values(j), v.values(j), z.values(j)
        r37 = fj - lj * vj
        r32 = r37 - pj
        return (
            pj * pj,
            (tj * pj) ** 2,
            r32 * r32,
            r37 * r37,
            (tj * r37) ** 2,
            (tj * r32) ** 2,
            (tj * fj - vj) ** 2,
            vj * vj,
            zj * zj,
        )

    sp, stp, s32, s37, s38, stail, sdist, sv, sz = stream_sums(terms, 1, model.N)

    # beyond N the residuals equal f and the T-images equal u_delta = T f
    if model.sandwich:
        f_tail = tail_enclosure(lambda x: 1.0 / x, model.N)
        u_tail = tail_enclosure(
            lambda x: math.log1p(1.0 / (a * x)) - 1.0 / (1.0 + a * x), model.N
        )
        f_tail = 0.5 * (f_tail[0] + f_tail[1])
        u_tail = 0.5 * (u_tail[0] + u_tail[1])
    else:
        f_tail = u_tail = 0.0

    root_a = math.sqrt(a)
    return BadPairCertificate(
        delta=delta,
        C=float(C),
        b=float(b),
        a=a,
        j_star=j_star,
        J=J,
        norm_p=math.sqrt(sp),
        norm_Tp=math.sqrt(stp),
        tp_lower_bound=delta / (8.0 * root_a),
        resid_32=math.sqrt(s32 + f_tail),
        resid_37=math.sqrt(s37 + f_tail),
        gap_38=math.sqrt(s38 + u_tail),
        gap_lower_bound=delta / (16.0 * root_a),
        dist=math.sqrt(sdist + u_tail),
        norm_v=math.sqrt(sv),
        norm_z=math.sqrt(sz),
        tail_gap=math.sqrt(stail + u_tail),
    )


def nonuniformity_sweep(model, deltas, C=1.0, b=0.5, workers=None):
    """One :class:`BadPairCertificate` per noise level, in input order.

    Levels are processed concurrently (``REGDP_THREADS`` caps the pool).
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("deltas must be nonempty")
    if any(d1 <= d2 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    workers = workers or worker_count()
    if workers == 1 or len(deltas) == 1:
        return [build_bad_pair(model, d, C, b) for d in deltas]
    with ThreadPoolExecutor(max_workers=min(workers, len(deltas))) as pool:
        return list(pool.map(lambda d: build_bad_pair(model, d, C, b), deltas))
