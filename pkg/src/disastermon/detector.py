"""Edit-activity spike detection over per-cluster histories.

Each monitored article cluster keeps the timestamps of its edits inside a
trailing 24-hour window. A spike is reported when the cluster has at least
five in-window edit intervals and the latest interval is shorter than half
the (population) standard deviation of those intervals. Exponential
smoothing of the intervals is computed alongside and reported as evidence;
the spike test itself is the bare half-sigma comparison.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

from .articles import ClusterKey

DAY_MS = 24 * 60 * 60 * 1000


@dataclass(frozen=True, slots=True)
class DetectorConfig:
    alpha: float = 0.5
    min_intervals: int = 5
    window_ms: int = DAY_MS
    threshold_factor: float = 0.5
    max_retained: int = 256

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.min_intervals < 2:
            raise ValueError("min_intervals must be >= 2")
        if self.window_ms <= 0 or self.threshold_factor <= 0 or self.max_retained < 2:
            raise ValueError("window, threshold factor and retention must be positive")


@dataclass(frozen=True)
class EditHistory:
    """Strictly ascending in-window edit timestamps for one cluster."""

    cluster: ClusterKey
    timestamps: tuple[int, ...] = ()


@dataclass(frozen=True)
class SpikeVerdict:
    """Spike decision plus all the evidence it was made from."""

    cluster: ClusterKey
    spiking: bool
    n: int
    latest_interval_ms: float | None
    sigma_ms: float | None
    smoothed_ms: float | None
    threshold_ms: float | None
    evaluated_at: int
    insufficient_data: bool


def prune_window(history: EditHistory, now: int, cfg: DetectorConfig) -> EditHistory:
    """Drop timestamps strictly older than ``now - window``; equality is kept."""
    cutoff = now - cfg.window_ms
    kept = tuple(ts for ts in history.timestamps if ts >= cutoff)
    if len(kept) == len(history.timestamps):
        return history
    return replace(history, timestamps=kept)


def record_edit(history: EditHistory, ts: int, now: int, cfg: DetectorConfig) -> EditHistory:
    """Append an edit timestamp, clamping out-of-order arrivals, and prune.

    Timestamps already outside the window are discarded outright. Late
    in-window events are clamped to last-seen + 1 ms so the history stays
    strictly ascending; the stream is assumed ordered and this only papers
    over jitter.
    """
    if ts < now - cfg.window_ms:
        return prune_window(history, now, cfg)
    if history.timestamps and ts <= history.timestamps[-1]:
        ts = history.timestamps[-1] + 1
    timestamps = history.timestamps + (ts,)
    if len(timestamps) > cfg.max_retained:
        timestamps = timestamps[-cfg.max_retained:]
    return prune_window(replace(history, timestamps=timestamps), now, cfg)


def intervals(history: EditHistory) -> list[int]:
    """Consecutive differences of the in-window timestamps (empty below 2)."""
    ts = history.timestamps
    return [ts[i] - ts[i - 1] for i in range(1, len(ts))]


def exp_smooth(values: list[int] | list[float], alpha: float) -> float:
    """Exponentially smoothed value of a series: s = alpha*x + (1-alpha)*s."""
    if not values:
        raise ValueError("exp_smooth needs a non-empty series")
    smoothed = float(values[0])
    for value in values[1:]:
        smoothed = alpha * value + (1.0 - alpha) * smoothed
    return smoothed


def evaluate_spike(history: EditHistory, now: int, cfg: DetectorConfig) -> SpikeVerdict:
    """Decide whether the cluster is spiking at ``now``.

    Too few in-window intervals is a non-spiking verdict with the
    insufficient-data flag set, never an error.
    """
    pruned = prune_window(history, now, cfg)
    gaps = intervals(pruned)
    n = len(gaps)
    if n < cfg.min_intervals:
        return SpikeVerdict(
            cluster=history.cluster,
            spiking=False,
            n=n,
            latest_interval_ms=float(gaps[-1]) if gaps else None,
            sigma_ms=None,
            smoothed_ms=None,
            threshold_ms=None,
            evaluated_at=now,
            insufficient_data=True,
        )
    sigma = statistics.pstdev(gaps)
    smoothed = exp_smooth(gaps, cfg.alpha)
    threshold = cfg.threshold_factor * sigma
    latest = float(gaps[-1])
    return SpikeVerdict(
        cluster=history.cluster,
        spiking=latest < threshold,
        n=n,
        latest_interval_ms=latest,
        sigma_ms=sigma,
        smoothed_ms=smoothed,
        threshold_ms=threshold,
        evaluated_at=now,
        insufficient_data=False,
    )


class DetectorState:
    """Per-cluster histories; mutations for one cluster happen on one thread."""

    def __init__(self, cfg: DetectorConfig | None = None) -> None:
        self.cfg = cfg or DetectorConfig()
        self._histories: dict[ClusterKey, EditHistory] = {}

    def record(self, cluster: ClusterKey, ts: int, now: int | None = None) -> EditHistory:
        history = self._histories.get(cluster) or EditHistory(cluster=cluster)
        updated = record_edit(history, ts, now if now is not None else ts, self.cfg)
        self._histories[cluster] = updated
        return updated

    def evaluate(self, cluster: ClusterKey, now: int) -> SpikeVerdict:
        history = self._histories.get(cluster) or EditHistory(cluster=cluster)
        return evaluate_spike(history, now, self.cfg)

    def history(self, cluster: ClusterKey) -> EditHistory | None:
        return self._histories.get(cluster)

    def __len__(self) -> int:
        return len(self._histories)


def verdict_is_sound(verdict: SpikeVerdict, cfg: DetectorConfig) -> bool:
    """Re-check the spike rule from the verdict's own fields."""
    if not verdict.spiking:
        return True
    return (
        not verdict.insufficient_data
        and verdict.n >= cfg.min_intervals
        and verdict.latest_interval_ms is not None
        and verdict.sigma_ms is not None
        and verdict.threshold_ms is not None
        and math.isclose(verdict.threshold_ms, cfg.threshold_factor * verdict.sigma_ms)
        and verdict.latest_interval_ms < verdict.threshold_ms
    )
