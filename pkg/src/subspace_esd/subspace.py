"""Subspace distance between principal-component bases and the getESD search.

The distance between the top-``k_a`` components of one covariance matrix and
the top-``k_b`` components of another is the angle whose sine is the spectral
norm of the part of the second basis orthogonal to the first.  ``get_esd``
walks ``k = 1, 2, ...`` computing one new eigenvector pair per step and
stops once the angle has dropped while the largest singular value of the
inner-product matrix is close to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBasisError, OracleScaleError, ParameterError, ShapeError
from .linalg import (
    IterationBudget,
    PrincipalComponent,
    as_covariance,
    deflate,
    eig_arrays,
    exact_eigendecomposition,
    power_iteration,
    small_svd,
)

ORACLE_MAX_DIM = 64
DEFAULT_STOP_EPSILON = 0.01
ORACLE_TIE_DEG = 1e-9


def _basis_matrix(basis) -> np.ndarray:
    if isinstance(basis, np.ndarray):
        B = np.asarray(basis, dtype=float)
        return B[:, None] if B.ndim == 1 else B
    return np.column_stack([pc.vector if isinstance(pc, PrincipalComponent) else pc for pc in basis])


def check_orthonormal(B: np.ndarray, tol: float = 1e-6) -> None:
    dev = np.abs(B.T @ B - np.eye(B.shape[1])).max(initial=0.0)
    if dev > tol:
        raise InvalidBasisError(f"basis is not orthonormal (Gram deviation {dev:.3g})")


def sine_of_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Spectral norm of ``(I - A A') B`` for orthonormal column blocks."""
    T = B - A @ (A.T @ B)
    return float(min(np.linalg.norm(T, 2), 1.0))


def subspace_distance(
    basis_a, basis_b, k_a: int, k_b: int, validate: bool = True, one_sided: bool = False
) -> float:
    """Angle in degrees between span(a_1..a_k_a) and span(b_1..b_k_b).

    The sine is the spectral norm of the part of the lower-dimensional basis
    that lies outside the higher-dimensional span; for ``k_a >= k_b`` this is
    ``||(I - A A') B||``.  With ``one_sided`` the B block is always the one
    projected, which makes every pair with ``k_b > k_a`` sit at 90 degrees.
    """
    A = _basis_matrix(basis_a)
    B = _basis_matrix(basis_b)
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"bases live in different dimensions: {A.shape[0]} vs {B.shape[0]}")
    if not (1 <= k_a <= A.shape[1] and 1 <= k_b <= B.shape[1]):
        raise ParameterError(
            f"k_a={k_a}, k_b={k_b} out of range for bases of size {A.shape[1]}, {B.shape[1]}"
        )
    A = A[:, :k_a]
    B = B[:, :k_b]
    if validate:
        check_orthonormal(A)
        check_orthonormal(B)
    if k_a < k_b and not one_sided:
        A, B = B, A
    return float(np.degrees(np.arcsin(sine_of_distance(A, B))))


def projection_matrix(basis_a, basis_b, k: int | None = None) -> np.ndarray:
    """Inner products ``P[i, j] = <a_i, b_j>`` for the first ``k`` vectors."""
    A = _basis_matrix(basis_a)
    B = _basis_matrix(basis_b)
    if k is not None:
        A, B = A[:, :k], B[:, :k]
    return A.T @ B


def angle_from_projection(P: np.ndarray) -> tuple[float, float, float]:
    """Return ``(theta_rad, sigma_max, sigma_min)`` for a square block of P."""
    s = small_svd(P)
    smax, smin = float(s[0]), float(s[-1])
    return float(np.arccos(min(smin, 1.0))), smax, smin


@dataclass(frozen=True)
class OracleResult:
    k_a: int
    k_b: int
    theta_max_deg: float
    table: np.ndarray  # degrees, table[ka-1, kb-1]

    def diagonal_max(self) -> float:
        return float(np.diagonal(self.table).max())


def max_distance_oracle(sigma_a, sigma_b, one_sided: bool = False) -> OracleResult:
    """Exhaustive maximum subspace distance over all (k_a, k_b) pairs.

    Both bases come from the exact Jacobi solver; every pair is evaluated
    with an explicit spectral norm (same convention as
    :func:`subspace_distance`).  Ties go to the smallest ``k_a``, then the
    smallest ``k_b``.
    """
    sigma_a = as_covariance(sigma_a)
    sigma_b = as_covariance(sigma_b)
    if sigma_a.shape != sigma_b.shape:
        raise ShapeError(f"dimension mismatch: {sigma_a.shape} vs {sigma_b.shape}")
    n = sigma_a.shape[0]
    if n > ORACLE_MAX_DIM:
        raise OracleScaleError(f"oracle limited to N <= {ORACLE_MAX_DIM}, got {n}")
    _, A = eig_arrays(exact_eigendecomposition(sigma_a))
    _, B = eig_arrays(exact_eigendecomposition(sigma_b))
    table = np.zeros((n, n))
    for ka in range(1, n + 1):
        Aka = A[:, :ka]
        T = B - Aka @ (Aka.T @ B)
        for kb in range(1, ka + 1 if not one_sided else n + 1):
            s = min(np.linalg.norm(T[:, :kb], 2), 1.0)
            table[ka - 1, kb - 1] = np.degrees(np.arcsin(s))
    if not one_sided:
        # upper triangle: project the smaller A block onto the larger B span
        for kb in range(2, n + 1):
            Bkb = B[:, :kb]
            T = A - Bkb @ (Bkb.T @ A)
            for ka in range(1, kb):
                s = min(np.linalg.norm(T[:, :ka], 2), 1.0)
                table[ka - 1, kb - 1] = np.degrees(np.arcsin(s))
    # first maximiser in row-major order; angles within rounding of the max tie
    flat = int(np.argmax(table >= table.max() - ORACLE_TIE_DEG))
    ka, kb = divmod(flat, n)
    return OracleResult(ka + 1, kb + 1, float(table[ka, kb]), table)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    theta_deg: float
    sigma_max: float
    sigma_min: float
    iterations_a: int = 0
    iterations_b: int = 0
    warning: str | None = None


@dataclass
class SubspaceDistanceResult:
    """Outcome of a getESD run.

    ``esd`` is the dimension at which the running maximum angle was reached and
    ``theta_max_deg`` that angle.  ``basis_a``/``basis_b`` hold the components
    computed along the way (``len == trace[-1].k``).
    """

    esd: int
    theta_max_deg: float
    trace: list[TraceRecord] = field(default_factory=list)
    stopped_early: bool = False
    degenerate: bool = False
    basis_a: list[PrincipalComponent] = field(default_factory=list)
    basis_b: list[PrincipalComponent] = field(default_factory=list)
    projection: np.ndarray | None = None

    @property
    def warnings(self) -> list[str]:
        return [r.warning for r in self.trace if r.warning]

    def to_dict(self) -> dict:
        return {
            "esd": self.esd,
            "theta_max_deg": self.theta_max_deg,
            "stopped_early": self.stopped_early,
            "degenerate": self.degenerate,
            "trace": [
                {
                    "k": r.k,
                    "theta_deg": r.theta_deg,
                    "sigma_max": r.sigma_max,
                    "sigma_min": r.sigma_min,
                    "iterations_a": r.iterations_a,
                    "iterations_b": r.iterations_b,
                    "warning": r.warning,
                }
                for r in self.trace
            ],
        }


class ESDSearch:
    """Incremental state of the getESD loop, shared with the distributed version.

    Feed one pair of new components per step through :meth:`step`; it grows
    the inner-product matrix, evaluates the angle and applies the stop rule.
    """

    def __init__(self, n: int, epsilon: float = DEFAULT_STOP_EPSILON):
        if not (0 < epsilon < 1):
            raise ParameterError(f"stop epsilon must lie in (0, 1), got {epsilon}")
        self.n = n
        self.epsilon = epsilon
        self.k = 0
        self.theta = 0.0
        self.theta_max = 0.0
        self.esd = 0
        self.P = np.zeros((0, 0))
        self.trace: list[TraceRecord] = []
        self.stopped = False

    def grow(self, new_row: np.ndarray, new_col: np.ndarray) -> np.ndarray:
        """Append row ``[a_k.b_1 .. a_k.b_{k-1}]`` and column ``[a_1.b_k .. a_k.b_k]``."""
        k = self.k + 1
        P = np.zeros((k, k))
        P[: k - 1, : k - 1] = self.P
        P[k - 1, : k - 1] = new_row
        P[:, k - 1] = new_col
        return P

    def evaluate(self, P: np.ndarray) -> tuple[float, float, float, bool]:
        """Angle data for ``P`` and whether the local stop rule fires (no state change)."""
        theta_new, smax, smin = angle_from_projection(P)
        # self.theta is the previous angle (0 before the first step, so k=1 never stops)
        stop = theta_new < self.theta and smax > 1.0 - self.epsilon
        return theta_new, smax, smin, bool(stop)

    def step(
        self,
        P: np.ndarray,
        iterations=(0, 0),
        warning: str | None = None,
        evaluated: tuple | None = None,
        stop: bool | None = None,
    ) -> bool:
        """Register ``P_{1:k,1:k}``; return True when the search should stop.

        ``evaluated`` may carry a precomputed :meth:`evaluate` result and
        ``stop`` overrides the local decision (used when a network agrees
        on it collectively).
        """
        theta_new, smax, smin, local_stop = evaluated if evaluated is not None else self.evaluate(P)
        if stop is None:
            stop = local_stop
        self.k += 1
        self.P = P
        self.trace.append(
            TraceRecord(self.k, float(np.degrees(theta_new)), smax, smin, *iterations, warning)
        )
        if stop:
            self.stopped = True
            return True
        if theta_new > self.theta_max or self.esd == 0:
            self.theta_max = theta_new
            self.esd = self.k
        self.theta = theta_new
        return False

    def result(self, **extra) -> SubspaceDistanceResult:
        return SubspaceDistanceResult(
            esd=self.esd,
            theta_max_deg=float(np.degrees(self.theta_max)),
            trace=list(self.trace),
            stopped_early=self.stopped,
            projection=self.P,
            **extra,
        )


def _seed(seed, which: int, k: int):
    return [int(seed), which, k]


def get_esd(
    sigma_a,
    sigma_b,
    budget: IterationBudget | None = None,
    epsilon: float = DEFAULT_STOP_EPSILON,
    seed: int = 0,
    literal_b_deflation: bool = False,
) -> SubspaceDistanceResult:
    """Effective subspace dimension and estimated maximum subspace distance.

    Parameters
    ----------
    sigma_a, sigma_b : (N, N) covariance matrices.
    budget : power-iteration stopping parameters for each eigenvector.
    epsilon : the search stops once the angle drops while the largest singular
        value of the inner-product matrix exceeds ``1 - epsilon``.
    seed : seeds the random start vectors.
    literal_b_deflation : deflate the second matrix from the original
        ``sigma_b`` each step (``Sb_hat = Sb - b b' Sb_hat``) instead of
        from the running deflated copy.  Kept for comparison only.
    """
    budget = budget or IterationBudget()
    sigma_a = as_covariance(sigma_a)
    sigma_b = as_covariance(sigma_b)
    if sigma_a.shape != sigma_b.shape:
        raise ShapeError(f"dimension mismatch: {sigma_a.shape} vs {sigma_b.shape}")
    n = sigma_a.shape[0]
    search = ESDSearch(n, epsilon)
    if not np.any(sigma_a) or not np.any(sigma_b):
        return SubspaceDistanceResult(esd=0, theta_max_deg=0.0, degenerate=True)

    hat_a, hat_b = sigma_a.copy(), sigma_b.copy()
    basis_a: list[PrincipalComponent] = []
    basis_b: list[PrincipalComponent] = []
    while search.k < n:
        k = search.k + 1
        a = power_iteration(hat_a, budget, _seed(seed, 0, k), check_degenerate=False)
        b = power_iteration(hat_b, budget, _seed(seed, 1, k), check_degenerate=False)
        a = PrincipalComponent(a.vector, a.eigenvalue, k, a.iterations, a.converged)
        b = PrincipalComponent(b.vector, b.eigenvalue, k, b.iterations, b.converged)
        basis_a.append(a)
        basis_b.append(b)
        A = np.column_stack([pc.vector for pc in basis_a])
        B = np.column_stack([pc.vector for pc in basis_b])
        P = search.grow(a.vector @ B[:, :-1], A.T @ b.vector)
        warning = None
        if not (a.converged and b.converged):
            warning = f"power iteration did not converge at k={k}"
        if search.step(P, (a.iterations, b.iterations), warning):
            break
        hat_a = deflate(hat_a, a.vector)
        if literal_b_deflation:
            hat_b = sigma_b - np.outer(b.vector, b.vector @ hat_b)
        else:
            hat_b = deflate(hat_b, b.vector)
    return search.result(basis_a=basis_a, basis_b=basis_b)

