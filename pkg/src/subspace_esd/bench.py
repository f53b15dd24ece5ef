"""Timing harness: distance-based vs variance-based residual pipelines."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .detect import DEFAULT_VARIANCE_PCT, choose_k_variance, projection_residual
from .errors import ParameterError
from .linalg import IterationBudget
from .subspace import get_esd

DEFAULT_SIZES = (100, 500, 1000, 2000, 5000)
_HEAD = np.array([100.0, 60.0, 40.0, 1.5, 1.325, 1.15, 0.975, 0.8])


@dataclass
class BenchCase:
    sigma_train: np.ndarray
    sigma_test: np.ndarray
    windows: np.ndarray  # N x W test windows
    mean: np.ndarray


def bench_case(n: int, seed: int, n_windows: int = 200, pct: float = DEFAULT_VARIANCE_PCT) -> BenchCase:
    """Eight-component signal plus isotropic floor; the test swaps PCs 3 and 4.

    The floor is sized so that 99.5% of the training variance needs exactly
    eight components, and the swap gives an effective dimension of 3.
    """
    r = _HEAD.size
    if n <= r:
        raise ParameterError(f"bench sizes must exceed {r}")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, r)))
    Q *= np.sign(np.diag(R))
    share = 0.7 * (1.0 - pct)
    floor = share * _HEAD.sum() / (1.0 - share) / (n - r)

    def cov(basis):
        S = (basis * (_HEAD - floor)) @ basis.T
        S[np.diag_indices(n)] += floor
        return S

    Qt = Q.copy()
    Qt[:, [2, 3]] = Q[:, [3, 2]]
    mean = rng.uniform(1.0, 3.0, n)
    g = rng.standard_normal((r, n_windows))
    windows = mean[:, None] + Qt @ (np.sqrt(_HEAD - floor)[:, None] * g)
    windows += np.sqrt(floor) * rng.standard_normal((n, n_windows))
    return BenchCase(cov(Q), cov(Qt), windows, mean)


def distance_pipeline(case: BenchCase, budget: IterationBudget | None = None, seed: int = 0):
    """k from the effective dimension; the basis is the training PCs getESD already found."""
    res = get_esd(case.sigma_train, case.sigma_test, budget, seed=seed)
    k = max(res.esd, 1)
    U = np.column_stack([pc.vector for pc in res.basis_a[:k]])
    return k, projection_residual(case.windows - case.mean[:, None], U)


def variance_pipeline(case: BenchCase, pct: float = DEFAULT_VARIANCE_PCT):
    """Full eigendecomposition, then the smallest k holding ``pct`` of the variance."""
    lam, V = np.linalg.eigh(case.sigma_train)
    lam, V = lam[::-1], V[:, ::-1]
    k = choose_k_variance(np.clip(lam, 0.0, None), pct)
    return k, projection_residual(case.windows - case.mean[:, None], V[:, :k])


@dataclass
class BenchRow:
    n: int
    t_distance: float
    t_variance: float
    t_get_esd: float
    t_full_eigh: float
    k_distance: int
    k_variance: int
    residual_sum_distance: float
    residual_sum_variance: float

    @property
    def ratio(self) -> float:
        return self.t_distance / self.t_variance

    def to_dict(self) -> dict:
        return {**asdict(self), "ratio": self.ratio}


def _median_time(fn, reps: int):
    times, out = [], None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def run_bench(sizes=DEFAULT_SIZES, reps: int = 5, seed: int = 0, budget: IterationBudget | None = None):
    """Median wall-clock times per size.  Numerical outputs do not depend on timing."""
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    rows = []
    for n in sizes:
        case = bench_case(int(n), seed)
        t_d, (k_d, r_d) = _median_time(lambda: distance_pipeline(case, budget, seed), reps)
        t_v, (k_v, r_v) = _median_time(lambda: variance_pipeline(case), reps)
        t_e, _ = _median_time(lambda: get_esd(case.sigma_train, case.sigma_test, budget, seed=seed), reps)
        t_f, _ = _median_time(lambda: np.linalg.eigh(case.sigma_train), reps)
        rows.append(BenchRow(int(n), t_d, t_v, t_e, t_f, k_d, k_v, float(r_d.sum()), float(r_v.sum())))
    return rows


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of log(time) against log(size)."""
    x, y = np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float))
    return float(np.polyfit(x, y, 1)[0])
