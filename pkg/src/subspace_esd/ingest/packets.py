"""Packet-size / protocol histograms and a CAIDA-shaped synthetic generator."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import ParameterError

N_SIZE_BINS = 75
MAX_SIZE = 1500
PROTOCOLS = ("tcp", "udp", "icmp", "other")
_PROTO_CODES = {"tcp": 0, "6": 0, "udp": 1, "17": 1, "icmp": 2, "1": 2}


@dataclass(frozen=True)
class PacketHistogram:
    start_ms: float
    interval_ms: float
    counts: np.ndarray  # size bins followed by the four protocol bins

    def frequencies(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)


def protocol_bin(proto) -> int:
    return _PROTO_CODES.get(str(proto).strip().lower(), 3)


def size_bin(size: float, n_size_bins: int = N_SIZE_BINS, max_size: float = MAX_SIZE) -> int:
    """Equal-width bins over ``[0, max_size]``; larger sizes land in the last bin."""
    width = max_size / n_size_bins
    return int(min(max(size, 0) // width, n_size_bins - 1))


def packet_histograms(
    packets: Iterable[tuple[float, object, float]],
    interval_ms: float = 25.0,
    n_size_bins: int = N_SIZE_BINS,
    max_size: float = MAX_SIZE,
    start_s: float | None = None,
) -> list[PacketHistogram]:
    """Histogram of ``(size, protocol, timestamp_s)`` packets per interval.

    Every packet adds one count to its size bin and one to its protocol bin,
    so the counts of an interval sum to twice its packet total.  Intervals
    with no packets between the first and last packet yield zero vectors.
    """
    if interval_ms <= 0:
        raise ParameterError("interval_ms must be > 0")
    pk = list(packets)
    if not pk:
        return []
    sizes = np.array([p[0] for p in pk], dtype=float)
    bad = (sizes < 0) | (sizes > 65535)
    if bad.any():
        warnings.warn(f"{int(bad.sum())} packet sizes outside [0, 65535] clamped", stacklevel=2)
        sizes = np.clip(sizes, 0, 65535)
    protos = np.array([protocol_bin(p[1]) for p in pk])
    ts = np.array([p[2] for p in pk], dtype=float)
    t0 = ts.min() if start_s is None else start_s
    idx = np.floor((ts - t0) * 1000.0 / interval_ms).astype(int)
    if idx.min() < 0:
        raise ParameterError("packets before start_s")
    width = max_size / n_size_bins
    sbin = np.minimum(sizes // width, n_size_bins - 1).astype(int)
    n_int = int(idx.max()) + 1
    counts = np.zeros((n_int, n_size_bins + len(PROTOCOLS)), dtype=np.int64)
    np.add.at(counts, (idx, sbin), 1)
    np.add.at(counts, (idx, n_size_bins + protos), 1)
    return [
        PacketHistogram(t0 * 1000.0 + i * interval_ms, interval_ms, counts[i]) for i in range(n_int)
    ]


def histograms_to_matrix(hists: list[PacketHistogram]) -> np.ndarray:
    """N x M matrix (bins x intervals)."""
    return np.column_stack([h.counts for h in hists]).astype(float)


def write_histograms_csv(hists: list[PacketHistogram], path) -> None:
    if not hists:
        raise ParameterError("nothing to write")
    n_size = hists[0].counts.size - len(PROTOCOLS)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_ms", *[f"size_{i}" for i in range(n_size)], *[f"proto_{p}" for p in PROTOCOLS]])
        for h in hists:
            w.writerow([h.start_ms, *h.counts.tolist()])


def _size_profile(n_size_bins: int) -> np.ndarray:
    # small (ACK-sized) and full-MTU packets dominate backbone traffic
    centers = (np.arange(n_size_bins) + 0.5) / n_size_bins
    p = 0.02 + 2.5 * np.exp(-((centers - 0.03) / 0.03) ** 2) + 1.5 * np.exp(-((centers - 0.97) / 0.02) ** 2)
    p += 0.3 * np.exp(-((centers - 0.38) / 0.06) ** 2)
    return p / p.sum()


def synth_caida(
    seed: int = 0,
    n_intervals: int = 2400,
    n_size_bins: int = N_SIZE_BINS,
    mean_packets: float = 400.0,
    burstiness: float = 0.6,
) -> np.ndarray:
    """Histogram features shaped like one minute of 25 ms backbone samples.

    Per-interval packet volume is lognormal (bursty), so the count vectors
    are dominated by a common volume direction; the size/protocol mix wobbles
    slightly around a fixed profile.  Returns an ``(n_size_bins + 4) x
    n_intervals`` count matrix.
    """
    if n_size_bins < 1 or n_intervals < 2:
        raise ParameterError("need n_size_bins >= 1 and n_intervals >= 2")
    rng = np.random.default_rng(seed)
    volume = rng.lognormal(np.log(mean_packets), burstiness, n_intervals)
    n_pk = rng.poisson(volume)
    size_p = _size_profile(n_size_bins)
    proto_p = np.array([0.82, 0.14, 0.02, 0.02])
    X = np.zeros((n_size_bins + 4, n_intervals))
    for m in range(n_intervals):
        jitter = rng.dirichlet(size_p * 2000.0)
        X[:n_size_bins, m] = rng.multinomial(n_pk[m], jitter)
        X[n_size_bins:, m] = rng.multinomial(n_pk[m], rng.dirichlet(proto_p * 2000.0))
    return X


def synth_packets(seed: int = 0, n_packets: int = 1000, duration_s: float = 1.0, sizes=None):
    """A list of ``(size, protocol, timestamp_s)`` tuples sorted by time."""
    rng = np.random.default_rng(seed)
    ts = np.sort(rng.uniform(0, duration_s, n_packets))
    if sizes is None:
        sizes = rng.integers(0, MAX_SIZE, n_packets)
    protos = rng.choice(PROTOCOLS, n_packets, p=[0.8, 0.15, 0.03, 0.02])
    return [(int(s), str(p), float(t)) for s, p, t in zip(sizes, protos, ts)]
