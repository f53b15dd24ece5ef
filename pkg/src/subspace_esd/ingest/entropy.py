"""Per-window entropy features from connection records."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import ParameterError
from .connections import ConnectionRecord, Schema, kyoto_schema

MIN_SUPPORT = 10


@dataclass(frozen=True)
class FeatureWindow:
    start: float
    duration: float
    entropy: np.ndarray
    n_records: int
    anomalous_rate: float
    low_support: bool

    @property
    def empty(self) -> bool:
        return self.n_records == 0


def bucket_value(raw: str, mode: str) -> str:
    """Map a numeric field to its bucket label (log2 buckets: 0, 1, 2-3, 4-7, ...)."""
    if mode == "none":
        return raw
    x = float(raw)
    ax = abs(x)
    b = 0 if ax < 1 else int(math.floor(math.log2(ax))) + 1
    return f"{'-' if x < 0 else ''}b{b}"


def shannon_entropy(values, base: float = 2.0, normalized: bool = False) -> float:
    """Entropy of the empirical distribution of ``values``."""
    _, counts = np.unique(np.asarray(values, dtype=object).astype(str), return_counts=True)
    if counts.size <= 1:
        return 0.0
    p = counts / counts.sum()
    h = float(-(p * np.log(p)).sum() / math.log(base))
    if normalized:
        h /= math.log(counts.size, base)
    return max(h, 0.0)


def _window_features(recs: list[ConnectionRecord], schema: Schema, base, normalized) -> np.ndarray:
    cols = schema.feature_columns
    out = np.zeros(len(cols))
    if not recs:
        return out
    for j, col in enumerate(cols):
        vals = [bucket_value(r.features[j], col.bucketing) for r in recs]
        out[j] = shannon_entropy(vals, base, normalized)
    return out


def entropy_windows(
    records: Iterable[ConnectionRecord],
    window_s: float = 300.0,
    sliding: bool = False,
    step_s: float | None = None,
    schema: Schema | None = None,
    base: float = 2.0,
    normalized: bool = False,
    start: float | None = None,
    min_records: int = MIN_SUPPORT,
) -> list[FeatureWindow]:
    """Entropy vector of every time window.

    Non-sliding windows tile ``[start, last timestamp]`` with width
    ``window_s``; sliding windows advance by ``step_s``.  Empty windows are
    kept (``n_records == 0``) and, like any window with fewer than
    ``min_records`` records, marked ``low_support``.
    """
    schema = schema or kyoto_schema()
    if window_s <= 0:
        raise ParameterError("window_s must be > 0")
    step = window_s
    if sliding:
        if step_s is None or not 0 < step_s <= window_s:
            raise ParameterError("sliding windows need 0 < step_s <= window_s")
        step = step_s
    recs = list(records)
    if not recs:
        return []
    ts = np.array([r.timestamp for r in recs])
    labels = np.array([r.attack_label for r in recs], dtype=float)
    t0 = ts[0] if start is None else start
    windows = []
    i = 0
    while (w0 := t0 + i * step) <= ts[-1]:
        lo = int(np.searchsorted(ts, w0, side="left"))
        hi = int(np.searchsorted(ts, w0 + window_s, side="left"))
        chunk = recs[lo:hi]
        n = hi - lo
        windows.append(
            FeatureWindow(
                start=float(w0),
                duration=float(window_s),
                entropy=_window_features(chunk, schema, base, normalized),
                n_records=n,
                anomalous_rate=float(labels[lo:hi].mean()) if n else 0.0,
                low_support=n < min_records,
            )
        )
        i += 1
    return windows


def windows_to_matrix(windows: list[FeatureWindow], include_low_support: bool = False):
    """Stack window entropy vectors into an N x W feature matrix plus their rates."""
    keep = [w for w in windows if include_low_support or not w.low_support]
    if not keep:
        return np.zeros((0, 0)), np.zeros(0)
    X = np.column_stack([w.entropy for w in keep])
    return X, np.array([w.anomalous_rate for w in keep])


def write_windows_csv(windows: list[FeatureWindow], path, feature_names: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start", "n_records", *[f"H_{n}" for n in feature_names], "anomalous_rate"])
        for win in windows:
            w.writerow([win.start, win.n_records, *[f"{h:.10g}" for h in win.entropy], win.anomalous_rate])
