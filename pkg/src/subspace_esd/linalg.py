"""Dense linear algebra primitives.

Covariance estimation, power iteration with deflation, and a cyclic Jacobi
eigensolver used as the exact reference for small matrices.  Everything here
is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientSamplesError,
    InvalidDataError,
    OracleScaleError,
    ParameterError,
    ShapeError,
)

SIGN_TOL = 1e-12
ORACLE_MAX_DIM = 512


@dataclass(frozen=True)
class IterationBudget:
    """Stopping parameters for iterative eigen-solvers.

    ``epsilon`` bounds the step ``||v(k+1) - v(k)||`` between successive unit
    iterates; ``max_iters`` caps the number of matrix-vector products.
    """

    epsilon: float = 1e-9
    max_iters: int = 1000

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_iters) < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class PrincipalComponent:
    vector: np.ndarray
    eigenvalue: float
    rank: int = 1
    iterations: int = 0
    converged: bool = True
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def as_feature_matrix(X) -> np.ndarray:
    """Validate an N x M observation matrix (rows are features)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1:
        raise ShapeError("feature matrix needs at least one feature")
    if X.shape[1] < 2:
        raise InsufficientSamplesError(
            f"need at least 2 samples (columns), got {X.shape[1]}"
        )
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("feature matrix contains non-finite values")
    return X


def as_covariance(C, check_psd: bool = False) -> np.ndarray:
    """Validate a square symmetric matrix; optionally check PSD."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ShapeError(f"covariance must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InvalidDataError("covariance contains non-finite values")
    scale = max(np.abs(C).max(initial=0.0), 1e-300)
    if np.abs(C - C.T).max(initial=0.0) > 1e-10 * scale:
        raise InvalidDataError("covariance is not symmetric")
    if check_psd and C.shape[0] <= ORACLE_MAX_DIM:
        lam = np.linalg.eigvalsh(C)
        if lam.min() < -1e-8 * max(np.trace(C), 1e-300):
            raise InvalidDataError("covariance is not positive semidefinite")
    return C


def covariance(X, center: bool = True, standardize: bool = False) -> np.ndarray:
    """Sample second-moment matrix ``Xc Xc' / (M - 1)`` of an N x M matrix.

    With ``center`` each row has its mean removed first.  ``standardize``
    additionally scales rows to unit variance (rows with zero variance are
    left unscaled).
    """
    X = as_feature_matrix(X)
    M = X.shape[1]
    Xc = X - X.mean(axis=1, keepdims=True) if center else X
    if standardize:
        sd = Xc.std(axis=1, ddof=1, keepdims=True)
        sd[sd == 0] = 1.0
        Xc = Xc / sd
    C = Xc @ Xc.T / (M - 1)
    # exact symmetry regardless of BLAS summation order
    return 0.5 * (C + C.T)


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its first entry with magnitude above 1e-12 is positive."""
    idx = np.flatnonzero(np.abs(v) > SIGN_TOL)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def _unit_start(n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def power_iteration(
    C,
    budget: IterationBudget | None = None,
    seed=0,
    check_degenerate: bool = True,
    v0: np.ndarray | None = None,
) -> PrincipalComponent:
    """Leading eigenpair of ``C`` by power iteration.

    Iterates are kept at unit norm; the loop exits once two successive
    iterates differ by less than ``budget.epsilon`` or after
    ``budget.max_iters`` products, in which case the last iterate is returned
    with ``converged=False``.  ``C`` need not be symmetric (deflated matrices
    are not), but the eigenvalue reported is the Rayleigh quotient.
    """
    budget = budget or IterationBudget()
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ShapeError(f"matrix must be square, got shape {C.shape}")
    n = C.shape[0]
    scale = np.abs(C).max(initial=0.0)
    v = _unit_start(n, seed) if v0 is None else np.asarray(v0, float) / np.linalg.norm(v0)
    if scale == 0.0:
        e = np.zeros(n)
        e[0] = 1.0
        return PrincipalComponent(e, 0.0, iterations=0, converged=True, degenerate=True)

    converged = False
    it = 0
    for it in range(1, int(budget.max_iters) + 1):
        w = C @ v
        nw = np.linalg.norm(w)
        if nw <= 1e-300:
            # start vector annihilated: C is nilpotent on it, treat as zero spectrum
            return PrincipalComponent(
                sign_normalize(v), 0.0, iterations=it, converged=True, degenerate=True
            )
        w /= nw
        step = np.linalg.norm(w - v)
        v = w
        if step < budget.epsilon:
            converged = True
            break

    v = sign_normalize(v)
    lam = float(v @ C @ v)
    degenerate = False
    if check_degenerate and n > 1:
        degenerate = _top_eigenspace_repeated(C, v, lam, seed)
    return PrincipalComponent(v, lam, iterations=it, converged=converged, degenerate=degenerate)


def _top_eigenspace_repeated(C, v, lam, seed, probes: int = 30, rtol: float = 1e-6) -> bool:
    """Cheap probe for a repeated leading eigenvalue.

    Runs a short power iteration restricted to the complement of ``v``; if the
    Rayleigh quotient there reaches ``lam`` the top eigenspace is not simple.
    """
    if lam <= 0:
        return True
    u = _unit_start(len(v), np.random.default_rng(seed).integers(1 << 32) + 1)
    for _ in range(probes):
        u = u - v * (v @ u)
        nu = np.linalg.norm(u)
        if nu == 0:
            return False
        u /= nu
        mu = float(u @ C @ u)
        if mu >= lam * (1 - rtol):
            return True
        u = C @ u
    return False


def deflate(C, v) -> np.ndarray:
    """Remove the component along unit vector ``v``: ``C - v (v' C)``."""
    C = np.asarray(C, dtype=float)
    vec = v.vector if isinstance(v, PrincipalComponent) else np.asarray(v, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or vec.shape != (C.shape[0],):
        raise ShapeError(
            f"cannot deflate matrix of shape {C.shape} by vector of shape {vec.shape}"
        )
    return C - np.outer(vec, vec @ C)


def _round_robin(n: int):
    """Yield n-1 rounds of disjoint index pairs covering all pairs (n even)."""
    idx = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        yield [(idx[i], idx[n - 1 - i]) for i in range(half)]
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]


def jacobi_eigh(C, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in parallel (round-robin ordering) so that each
    round is a handful of vectorised column/row updates.  Returns
    ``(eigenvalues, eigenvectors)`` in the order produced; callers sort.
    """
    A = np.array(C, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    m = n + (n % 2)
    pad = m != n
    if pad:
        A = np.pad(A, ((0, 1), (0, 1)))
        V = np.eye(m)

    rounds = []
    for pairs in _round_robin(m):
        p = np.array([a for a, b in pairs])
        q = np.array([b for a, b in pairs])
        rounds.append((p, q))

    norm = np.linalg.norm(A)
    if norm == 0:
        return np.zeros(n), np.eye(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= tol * norm:
            break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            nz = apq != 0.0
            if not nz.any():
                continue
            theta = np.zeros_like(apq)
            theta[nz] = (aqq[nz] - app[nz]) / (2.0 * apq[nz])
            t = np.where(
                nz, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0
            )
            t[nz & (theta == 0)] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap = A[:, p].copy()
            Aq = A[:, q]
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap = A[p, :].copy()
            Aq = A[q, :]
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp = V[:, p].copy()
            Vq = V[:, q]
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    lam = A.diagonal().copy()
    if pad:
        # the padding row/column never mixes with the rest (its entries stay 0)
        keep = np.abs(V[n, :]) < 0.5
        lam = lam[keep]
        V = V[:n, keep]
    return lam, V


def exact_eigendecomposition(C) -> list[PrincipalComponent]:
    """Full spectrum of a symmetric matrix, eigenvalues descending.

    Reference solver for desk-scale problems (N <= 512); vectors follow the
    package sign convention.
    """
    C = as_covariance(C)
    n = C.shape[0]
    if n > ORACLE_MAX_DIM:
        raise OracleScaleError(f"exact solver limited to N <= {ORACLE_MAX_DIM}, got {n}")
    lam, V = jacobi_eigh(C)
    order = np.argsort(-lam, kind="stable")
    return [
        PrincipalComponent(sign_normalize(V[:, j].copy()), float(lam[j]), rank=r + 1)
        for r, j in enumerate(order)
    ]


def eig_arrays(pcs: list[PrincipalComponent]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a list of components into ``(eigenvalues, N x k basis)``."""
    return (
        np.array([pc.eigenvalue for pc in pcs]),
        np.column_stack([pc.vector for pc in pcs]),
    )


def small_svd(P) -> np.ndarray:
    """Singular values of a small square matrix, descending.

    Computed as square roots of the eigenvalues of ``P'P``.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise ShapeError(f"expected a non-empty square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise InvalidDataError("matrix contains non-finite values")
    G = P.T @ P
    lam, _ = jacobi_eigh(0.5 * (G + G.T))
    return np.sqrt(np.clip(np.sort(lam)[::-1], 0.0, None))
