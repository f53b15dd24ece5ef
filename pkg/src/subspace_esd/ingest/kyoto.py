"""Kyoto-shaped synthetic corpora: entropy feature matrices and raw connection records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .connections import ConnectionRecord, Schema, kyoto_schema

N_FEATURES = 20

# Calibration constants for the default corpus.  The training covariance is
# Q diag(KYOTO_SPECTRUM) Q' with Q drawn once from KYOTO_BASIS_SEED, chosen so
# 99.5% of the variance needs 11 components.  Anomalies push windows along
# Q @ KYOTO_DRIFT: a faint lift on PCs 1-7 (so the change in the covariance
# is largest at k = 8) and most of its weight on PCs 9-15 (so residuals
# separate while the normal subspace excludes those directions).
KYOTO_SPECTRUM = np.array(
    [12.0, 9.0, 7.0, 5.5, 4.2, 3.2, 2.4, 1.3, 0.25, 0.2,
     0.18, 0.05, 0.025, 0.012, 0.005, 0.001, 8e-4, 6e-4, 4e-4, 2e-4]
)
_DRIFT = np.zeros(N_FEATURES)
_DRIFT[:7] = [0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04]
_DRIFT[8:15] = [0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2]
KYOTO_DRIFT = _DRIFT / np.linalg.norm(_DRIFT)
KYOTO_BASIS_SEED = 2006
KYOTO_AMPLITUDE = 3.8
KYOTO_SPREAD = 0.25
KYOTO_MEAN = np.linspace(6.0, 2.0, N_FEATURES)
DEFAULT_ANOMALY_FRACTION = 0.3


@dataclass
class KyotoCorpus:
    train: np.ndarray  # N x M
    test: np.ndarray  # N x M
    labels: np.ndarray  # bool, one per test window
    anomalous_rate: np.ndarray
    basis: np.ndarray

    def __iter__(self):
        return iter((self.train, self.test, self.labels))


def _orthonormal(n: int, seed: int) -> np.ndarray:
    Q, R = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _whiten(G: np.ndarray, avoid: np.ndarray | None = None) -> np.ndarray:
    """Rows centred, optionally orthogonal to ``avoid``, with identity sample covariance."""
    G = G - G.mean(axis=1, keepdims=True)
    if avoid is not None:
        a = avoid - avoid.mean()
        a = a / np.linalg.norm(a)
        G = G - np.outer(G @ a, a)
    L = np.linalg.cholesky(G @ G.T / (G.shape[1] - 1))
    return np.linalg.solve(L, G)


def _fraction(anomaly_profile) -> float:
    if anomaly_profile in (None, "default"):
        return DEFAULT_ANOMALY_FRACTION
    try:
        frac = float(anomaly_profile)
    except (TypeError, ValueError):
        raise ParameterError(f"unknown anomaly profile {anomaly_profile!r}") from None
    if not 0.0 < frac < 1.0:
        raise ParameterError("anomaly fraction must lie in (0, 1)")
    return frac


def synth_kyoto(seed: int = 0, n_windows: int = 400, anomaly_profile="default") -> KyotoCorpus:
    """Training and test entropy matrices (20 x n_windows) plus window labels.

    Gaussian parts are whitened, so the sample covariance of the training
    matrix equals the calibrated covariance exactly and the test matrix's
    normal component carries the same covariance.  A fixed fraction of test
    windows (``round(fraction * n_windows)``) carries an anomaly of amplitude
    ``KYOTO_AMPLITUDE * (1 +- KYOTO_SPREAD)``.
    """
    frac = _fraction(anomaly_profile)
    m = int(n_windows)
    # exact whitening needs a full-rank sample covariance after removing the
    # mean and the anomaly direction
    if m < N_FEATURES + 2:
        raise ParameterError(f"n_windows must be >= {N_FEATURES + 2}")
    Q = _orthonormal(N_FEATURES, KYOTO_BASIS_SEED)
    S = Q * np.sqrt(KYOTO_SPECTRUM)
    rng = np.random.default_rng(seed)
    train = KYOTO_MEAN[:, None] + S @ _whiten(rng.standard_normal((N_FEATURES, m)))

    n_anom = int(round(frac * m))
    labels = np.zeros(m, dtype=bool)
    labels[rng.permutation(m)[:n_anom]] = True
    amp = np.zeros(m)
    amp[labels] = KYOTO_AMPLITUDE * (1.0 + KYOTO_SPREAD * rng.uniform(-1.0, 1.0, n_anom))
    noise = _whiten(rng.standard_normal((N_FEATURES, m)), amp if n_anom else None)
    test = KYOTO_MEAN[:, None] + S @ noise + np.outer(Q @ KYOTO_DRIFT, amp)
    # per-window fraction of attack records, loosely tied to the amplitude
    rate = np.where(labels, np.clip(amp / (2 * KYOTO_AMPLITUDE), 0.0, 1.0), 0.0)
    return KyotoCorpus(train, test, labels, rate, Q)


# ---------------------------------------------------------------- raw records

_SERVICES = ("http", "smtp", "dns", "ssh", "ftp", "other", "smb", "ssl")
_FLAGS = ("SF", "S0", "REJ", "RSTO", "RSTOS0", "SH", "OTH")
_PROTOS = ("tcp", "udp", "icmp")


def _rate(rng) -> str:
    return f"{rng.choice([0.0, 0.0, 0.0, 1.0, rng.uniform()]):.2f}"


def synth_connections(
    seed: int = 0,
    n_records: int = 1000,
    start: float = 1.1e9,
    mean_gap_s: float = 0.6,
    attack_fraction: float = 0.2,
    schema: Schema | None = None,
) -> list[ConnectionRecord]:
    """Kyoto-layout connection records with nondecreasing timestamps.

    Attack records use the honeypot label convention (-1 or -2) and may set the
    IDS detector field.  Values are rendered as strings exactly as they would be
    written to disk, so write-then-parse round-trips.
    """
    schema = schema or kyoto_schema()
    if [c.name for c in schema.columns] != [c.name for c in kyoto_schema().columns]:
        raise ParameterError("synth_connections only renders the Kyoto layout")
    rng = np.random.default_rng(seed)
    t = start
    records = []
    for _ in range(n_records):
        t += float(rng.exponential(mean_gap_s))
        attack = bool(rng.uniform() < attack_fraction)
        ts = f"{t:.3f}"
        vals = {
            "duration": f"{rng.exponential(3.0):.6f}",
            "service": str(rng.choice(_SERVICES)),
            "src_bytes": str(int(rng.lognormal(6, 2))),
            "dst_bytes": str(int(rng.lognormal(5, 2.5))),
            "count": str(int(rng.integers(0, 100))),
            "same_srv_rate": _rate(rng),
            "serror_rate": _rate(rng),
            "srv_serror_rate": _rate(rng),
            "dst_host_count": str(int(rng.integers(0, 100))),
            "dst_host_srv_count": str(int(rng.integers(0, 100))),
            "dst_host_same_src_port_rate": _rate(rng),
            "dst_host_serror_rate": _rate(rng),
            "dst_host_srv_serror_rate": _rate(rng),
            "flag": str(rng.choice(_FLAGS)),
            "ids_detection": str(int(rng.integers(1, 9999))) if attack and rng.uniform() < 0.5 else "0",
            "malware_detection": "0",
            "ashula_detection": "0",
            "label": str(rng.choice(["-1", "-2"])) if attack else "1",
            "src_ip": f"fd95:ec1e:6a61:{int(rng.integers(0, 4096)):x}::{int(rng.integers(1, 255)):x}",
            "src_port": str(int(rng.integers(1024, 65536))),
            "dst_ip": f"fd95:ec1e:6a61:{int(rng.integers(0, 64)):x}::1",
            "dst_port": str(int(rng.choice([22, 25, 53, 80, 443, 445, int(rng.integers(1, 65536))]))),
            "start_time": ts,
            "protocol": str(rng.choice(_PROTOS)),
            "timeslot": str(int(float(ts)) % 60),
        }
        raw = tuple(vals[c.name] for c in schema.columns)
        feats = tuple(vals[c.name] for c in schema.feature_columns)
        records.append(ConnectionRecord(float(ts), feats, int(attack), raw))
    return records
