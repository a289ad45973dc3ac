"""Finite-dimensional real operators and their singular systems.

Operators are plain 2-D float64 numpy arrays and vectors are 1-D arrays.
Everything spectral goes through :class:`SingularSystem`, which carries the
thin factors together with orthonormal bases of both null-spaces.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NotInRange

#: Relative cutoff: singular values at or below ``RCOND * sigma_1`` count as zero.
RCOND = 1e-10


def as_vector(x, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def as_operator(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or min(A.shape) < 1:
        raise DimensionMismatch(f"operator must be a nonempty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator has non-finite entries")
    return A


def apply(A, x, mode="forward"):
    """Apply ``A`` (``mode="forward"``) or its transpose (``mode="adjoint"``)."""
    A = as_operator(A)
    x = as_vector(x)
    if mode == "forward":
        if x.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"expected {A.shape[1]} entries, got {x.shape[0]}")
        return A @ x
    if mode == "adjoint":
        if x.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"expected {A.shape[0]} entries, got {x.shape[0]}")
        return A.T @ x
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SingularSystem:
    """Thin SVD ``A = left @ diag(sigma) @ right.T`` plus null-space complements.

    Attributes
    ----------
    sigma : (r,) ndarray
        Singular values, descending, ``r = min(rows, cols)``.
    left_vectors : (rows, r) ndarray
    right_vectors : (cols, r) ndarray
    left_complement : (rows, rows - r) ndarray
        Orthonormal completion of ``left_vectors``; lies in N(A^T).
    right_complement : (cols, cols - r) ndarray
        Orthonormal completion of ``right_vectors``; lies in N(A).
    """

    sigma: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    left_complement: np.ndarray
    right_complement: np.ndarray

    @property
    def shape(self):
        return self.left_vectors.shape[0], self.right_vectors.shape[0]

    @property
    def default_tol(self):
        return RCOND * (float(self.sigma[0]) if self.sigma.size else 0.0)

    def resolve_tol(self, tol=None):
        if tol is None:
            return self.default_tol
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        return float(tol)

    def active(self, tol=None):
        """Boolean mask of singular values strictly above the cutoff."""
        return self.sigma > self.resolve_tol(tol)

    def matrix(self):
        return (self.left_vectors * self.sigma) @ self.right_vectors.T

    def forward(self, x):
        return self.left_vectors @ (self.sigma * (self.right_vectors.T @ x))

    def adjoint(self, y):
        return self.right_vectors @ (self.sigma * (self.left_vectors.T @ y))

    def check_rows(self, f):
        f = as_vector(f, "data")
        if f.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"expected {self.shape[0]} data entries, got {f.shape[0]}")
        return f

    def check_cols(self, u):
        u = as_vector(u, "solution")
        if u.shape[0] != self.shape[1]:
            raise DimensionMismatch(f"expected {self.shape[1]} solution entries, got {u.shape[0]}")
        return u


def decompose(A):
    """Singular system of ``A`` via LAPACK's divide-and-conquer SVD.

    Ties in sigma keep LAPACK's (deterministic) ordering; the output is a
    pure function of the input on a given platform.
    """
    A = as_operator(A)
    rows, cols = A.shape
    r = min(rows, cols)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(-s, kind="stable")
    U_r = U[:, :r][:, order]
    V_r = Vt[:r].T[:, order]
    return SingularSystem(
        sigma=s[order],
        left_vectors=np.ascontiguousarray(U_r),
        right_vectors=np.ascontiguousarray(V_r),
        left_complement=np.ascontiguousarray(U[:, r:]),
        right_complement=np.ascontiguousarray(Vt[r:].T),
    )


def nullspace_basis(S, tol=None):
    """Orthonormal basis of N(A) as a list of vectors.

    Right singular vectors with ``sigma <= tol`` plus the completion of the
    right-vector span when ``cols > rows``. ``tol`` defaults to
    ``1e-10 * sigma_1``.
    """
    keep = ~S.active(tol)
    basis = np.hstack([S.right_vectors[:, keep], S.right_complement])
    return [basis[:, k].copy() for k in range(basis.shape[1])]


def left_nullspace_basis(S, tol=None):
    """Orthonormal basis of N(A^T) = N(AA^T)."""
    keep = ~S.active(tol)
    basis = np.hstack([S.left_vectors[:, keep], S.left_complement])
    return [basis[:, k].copy() for k in range(basis.shape[1])]


def project_range_closure(S, f, tol=None):
    """Orthogonal projection of ``f`` onto the span of the active left vectors."""
    f = S.check_rows(f)
    U = S.left_vectors[:, S.active(tol)]
    return U @ (U.T @ f)


def min_norm_solution(S, f, tol=None):
    """Solution of ``Au = f`` orthogonal to N(A) (pseudo-inverse applied to ``f``).

    Raises
    ------
    NotInRange
        If the part of ``f`` outside the range exceeds ``max(tol, 1e-10) * ||f||``.
    """
    f = S.check_rows(f)
    tol = S.resolve_tol(tol)
    mask = S.active(tol)
    U = S.left_vectors[:, mask]
    beta = U.T @ f
    fnorm = np.linalg.norm(f)
    if np.linalg.norm(f - U @ beta) > max(tol, RCOND) * fnorm:
        raise NotInRange("data has a component outside the range of the operator")
    return S.right_vectors[:, mask] @ (beta / S.sigma[mask])


def operator_to_json(A):
    A = as_operator(A)
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "entries": A.ravel().tolist(),
    }


def operator_from_json(doc):
    try:
        rows, cols = int(doc["rows"]), int(doc["cols"])
        entries = doc["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed operator document: {exc}") from exc
    if len(entries) != rows * cols:
        raise DimensionMismatch(f"{rows}x{cols} operator needs {rows * cols} entries, got {len(entries)}")
    return as_operator(np.asarray(entries, dtype=np.float64).reshape(rows, cols))


def vector_to_json(x):
    return {"entries": as_vector(x).tolist()}


def vector_from_json(doc):
    if isinstance(doc, dict):
        doc = doc.get("entries")
    if doc is None:
        raise ValueError("malformed vector document")
    return as_vector(doc)
