"""Projection-residual detection, ROC evaluation and the spoofing scenario."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateError, ParameterError, ShapeError, UndefinedMetricError
from .linalg import (
    IterationBudget,
    as_covariance,
    as_feature_matrix,
    covariance,
    eig_arrays,
    exact_eigendecomposition,
)
from .subspace import get_esd

DEFAULT_VARIANCE_PCT = 0.995
# below this the two covariances are treated as identical and ESD carries no signal
DISTANCE_FLOOR_DEG = 1e-4


@dataclass(frozen=True)
class NormalSubspace:
    basis: np.ndarray  # N x k, orthonormal columns, descending eigenvalue order
    k: int
    selection: str = "fixed"
    eigenvalues: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def truncate(self, k: int) -> "NormalSubspace":
        if not 1 <= k <= self.basis.shape[1]:
            raise ParameterError(f"k={k} outside 1..{self.basis.shape[1]}")
        ev = None if self.eigenvalues is None else self.eigenvalues[:k]
        return NormalSubspace(self.basis[:, :k], k, self.selection, ev)


def training_spectrum(train, center: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues and eigenvectors of the training covariance."""
    return eig_arrays(exact_eigendecomposition(covariance(train, center=center)))


def build_normal_subspace(train, k: int, center: bool = True, selection: str = "fixed") -> NormalSubspace:
    """Top-``k`` principal components of the training data (N x M, rows are features)."""
    X = as_feature_matrix(train)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in 1..{n}, got {k}")
    lam, V = training_spectrum(X, center)
    rank = int(np.sum(lam > 1e-12 * max(lam[0], 1e-300)))
    if rank < k:
        warnings.warn(
            f"training covariance has rank {rank} < k={k}; padding with null-space eigenvectors",
            stacklevel=2,
        )
    return NormalSubspace(V[:, :k].copy(), k, selection, lam[:k].copy())


def choose_k_variance(eigenvalues, pct: float = DEFAULT_VARIANCE_PCT) -> int:
    """Smallest k whose leading eigenvalues hold at least ``pct`` of the total."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < pct <= 1:
        raise ParameterError(f"pct must lie in (0, 1], got {pct}")
    if lam.ndim != 1 or lam.size == 0 or np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ParameterError("eigenvalues must be a nonempty, nonnegative, descending list")
    total = lam.sum()
    if total <= 0:
        raise DegenerateError("all-zero spectrum: no variance to capture")
    frac = np.cumsum(lam) / total
    # tolerate rounding in the cumulative sum when pct is exactly reachable
    return int(np.argmax(frac >= pct - 1e-12) + 1)


def choose_k_distance(train_cov, window_cov, budget: IterationBudget | None = None, **kwargs) -> int:
    """ESD between the training and observed covariances, falling back to 1.

    When the two covariances are indistinguishable the largest angle is
    below ``DISTANCE_FLOOR_DEG`` and the ESD is meaningless; k=1 is returned
    with a warning.
    """
    res = get_esd(as_covariance(train_cov), as_covariance(window_cov), budget, **kwargs)
    if res.esd == 0 or res.theta_max_deg < DISTANCE_FLOOR_DEG:
        warnings.warn("covariances are indistinguishable; distance-based k falls back to 1", stacklevel=2)
        return 1
    return res.esd


def projection_residual(x, U) -> np.ndarray | float:
    """``||(I - U U') x||`` for one vector or each column of an N x W matrix."""
    B = U.basis if isinstance(U, NormalSubspace) else np.asarray(U, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    x = np.asarray(x, dtype=float)
    if x.shape[0] != B.shape[0]:
        raise ShapeError(f"vector length {x.shape[0]} does not match basis dimension {B.shape[0]}")
    r = x - B @ (B.T @ x)
    out = np.linalg.norm(r, axis=0)
    return float(out) if x.ndim == 1 else out


def residual_scores(test, subspace: NormalSubspace, center=None) -> np.ndarray:
    """Residual of every test window (columns of ``test``) after optional centring.

    ``center`` is a length-N vector subtracted from each column, normally the
    training mean.
    """
    X = np.asarray(test, dtype=float)
    if center is not None:
        X = X - np.asarray(center, dtype=float)[:, None]
    return projection_residual(X, subspace)


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    hit_rate: float
    false_alarm_rate: float


def _split(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores but {y.size} labels")
    pos, neg = s[y], s[~y]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("ROC needs at least one positive and one negative example")
    return pos, neg


def roc(scores, labels, thresholds=None) -> list[RocPoint]:
    """Hit and false-alarm rates (strict exceedance) at each threshold.

    Without ``thresholds`` every distinct score plus one value below the
    minimum is used.
    """
    pos, neg = _split(scores, labels)
    if thresholds is None:
        allv = np.unique(np.concatenate([pos, neg]))
        thresholds = np.concatenate([[allv[0] - 1.0], allv])
    t = np.sort(np.asarray(thresholds, dtype=float))
    ps, ns = np.sort(pos), np.sort(neg)
    hit = 1.0 - np.searchsorted(ps, t, side="right") / ps.size
    fa = 1.0 - np.searchsorted(ns, t, side="right") / ns.size
    return [RocPoint(float(a), float(h), float(f)) for a, h, f in zip(t, hit, fa)]


def hit_rate_at_fa(scores, labels, fa_target: float = 0.01) -> tuple[float, float]:
    """Best hit rate whose false-alarm rate does not exceed ``fa_target``.

    Candidate thresholds are the observed scores (an item is flagged when its
    score is strictly above the threshold).  Among the candidates meeting the
    target, the lowest one gives the highest hit rate; ties in hit rate are
    broken toward the higher threshold, so the reported threshold is the
    largest one achieving that hit rate.  Returns ``(threshold, hit_rate)``.
    """
    if not 0 <= fa_target <= 1:
        raise ParameterError(f"fa_target must lie in [0, 1], got {fa_target}")
    pos, neg = _split(scores, labels)
    cands = np.unique(np.concatenate([pos, neg]))
    pts = roc(pos.tolist() + neg.tolist(), [1] * pos.size + [0] * neg.size, cands)
    ok = [p for p in pts if p.false_alarm_rate <= fa_target + 1e-12]
    # the maximum score always qualifies (nothing is flagged above it)
    best = max(p.hit_rate for p in ok)
    thr = max(p.threshold for p in ok if p.hit_rate == best)
    return thr, best


def separation_interval(scores, labels) -> tuple[float, float] | None:
    """Open interval of thresholds giving 100% hits with zero false alarms."""
    pos, neg = _split(scores, labels)
    lo, hi = float(neg.max()), float(pos.min())
    return (lo, hi) if hi > lo else None


def anomalous_rate(window_labels) -> float:
    y = np.asarray(window_labels, dtype=float).ravel()
    if y.size == 0:
        raise UndefinedMetricError("anomalous rate of an empty window is undefined")
    return float(y.mean())


# ---------------------------------------------------------------- spoofing

def spoof_spectrum(n: int, k_var: int = 8, pct: float = DEFAULT_VARIANCE_PCT) -> np.ndarray:
    """Descending spectrum whose variance rule picks ``k_var`` and with λ3 >> λ4.

    Three dominant components are followed by ``k_var - 3`` moderate ones;
    the remaining tail carries 0.7 of the ``1 - pct`` budget, so ``k_var``
    is the first dimension reaching ``pct`` and ``k_var - 1`` is not.
    """
    if n <= k_var or k_var < 4:
        raise ParameterError(f"need 4 <= k_var < n, got n={n}, k_var={k_var}")
    head = np.concatenate([[100.0, 60.0, 40.0], np.linspace(1.5, 0.8, k_var - 3)])
    share = 0.7 * (1.0 - pct)
    tail_total = share * head.sum() / (1.0 - share)
    w = np.linspace(1.5, 0.5, n - k_var)
    return np.concatenate([head, tail_total * w / w.sum()])


def random_orthonormal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


@dataclass
class SpoofScenario:
    sigma_before: np.ndarray
    sigma_after: np.ndarray
    data_before: np.ndarray
    data_after: np.ndarray
    U: np.ndarray
    eigenvalues: np.ndarray

    def __iter__(self):
        return iter((self.sigma_before, self.sigma_after, self.data_before, self.data_after))


def spoof_scenario(n: int = 20, seed: int = 0, n_samples: int = 2000, swap=(3, 4)) -> SpoofScenario:
    """Normal-traffic spoofing: the attack swaps the importance of two PCs.

    ``sigma_before = U L U'`` and ``sigma_after = V L V'`` where ``V`` equals
    ``U`` with columns ``swap`` (1-based) exchanged, so both matrices share
    the spectrum and the same set of eigenvectors.  Gaussian samples (N x M)
    with exactly these covariances accompany the matrices.
    """
    if n < 9:
        raise ParameterError(f"spoof scenario needs n >= 9 (eight-dimensional normal subspace), got {n}")
    i, j = swap[0] - 1, swap[1] - 1
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise ParameterError(f"invalid swap {swap} for n={n}")
    rng = np.random.default_rng(seed)
    U = random_orthonormal(n, rng)
    lam = spoof_spectrum(n)
    V = U.copy()
    V[:, [i, j]] = U[:, [j, i]]
    sigma_b = (U * lam) @ U.T
    sigma_a = (V * lam) @ V.T
    sigma_b = 0.5 * (sigma_b + sigma_b.T)
    sigma_a = 0.5 * (sigma_a + sigma_a.T)
    data_b = _gaussian_with_cov(U, lam, n_samples, rng)
    data_a = _gaussian_with_cov(V, lam, n_samples, rng)
    return SpoofScenario(sigma_b, sigma_a, data_b, data_a, U, lam)


def _gaussian_with_cov(V, lam, m, rng) -> np.ndarray:
    """Samples whose sample covariance equals ``V diag(lam) V'`` exactly."""
    n = V.shape[0]
    G = rng.standard_normal((n, m))
    G -= G.mean(axis=1, keepdims=True)
    # whiten so the sample covariance of G is the identity
    C = G @ G.T / (m - 1)
    L = np.linalg.cholesky(C)
    G = np.linalg.solve(L, G)
    return (V * np.sqrt(lam)) @ G


# ---------------------------------------------------------------- reports


@dataclass
class DetectionReport:
    window_id: np.ndarray
    residual: np.ndarray
    anomalous_rate: np.ndarray
    k_used: int
    method: str
    threshold: float | None = None
    extra: dict = field(default_factory=dict)

    def rows(self):
        for w, r, a in zip(self.window_id, self.residual, self.anomalous_rate):
            yield {
                "window_id": int(w),
                "residual": float(r),
                "anomalous_rate": float(a),
                "k_used": self.k_used,
                "method": self.method,
            }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["window_id", "residual", "anomalous_rate", "k_used", "method"])
            w.writeheader()
            w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {
            "k_used": self.k_used,
            "method": self.method,
            "threshold": self.threshold,
            "windows": list(self.rows()),
            **self.extra,
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))
