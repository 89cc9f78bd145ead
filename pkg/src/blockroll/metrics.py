"""Scalar drift metrics over rollout traces.

These are declared proxies for the long-horizon failure modes of
autoregressive rollouts: per-block mean drift (saturation proxy), block
boundary discontinuity (flicker proxy), and windowed cosine similarity
(repetition proxy). All are pure functions of the trace; step 0, having
no history to compare against, is defined as 0 for every metric so that
series stay aligned step-for-step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RolloutTrace


@dataclass(frozen=True)
class MetricSeries:
    name: str
    values: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        steps = [s for s, _ in self.values]
        if any(a >= b for a, b in zip(steps, steps[1:])):
            raise ValueError("step indices must be strictly increasing")

    def terminal(self) -> float:
        return self.values[-1][1]


def _require_frames(trace: RolloutTrace, metric: str) -> list[np.ndarray]:
    frames = [r.frames for r in trace.records]
    if any(f is None for f in frames):
        raise ValueError(
            f"{metric} needs per-frame values; rerun the rollout with frame "
            "recording enabled"
        )
    return frames  # type: ignore[return-value]


def mean_drift(trace: RolloutTrace) -> MetricSeries:
    """|mean(block i) - mean(block 0)| per step; 0 at step 0 by definition."""
    if not trace.records:
        raise ValueError("trace is empty")
    base = trace.records[0].mean
    values = tuple((r.step, abs(r.mean - base)) for r in trace.records)
    return MetricSeries("mean_drift", values)


def flicker_proxy(trace: RolloutTrace) -> MetricSeries:
    """Mean absolute jump between the last frame of block i-1 and the first
    frame of block i."""
    if not trace.records:
        raise ValueError("trace is empty")
    frames = _require_frames(trace, "flicker_proxy")
    values = [(trace.records[0].step, 0.0)]
    for i in range(1, len(frames)):
        jump = float(np.abs(frames[i][0] - frames[i - 1][-1]).mean())
        values.append((trace.records[i].step, jump))
    return MetricSeries("flicker_proxy", values)


def repetition_score(trace: RolloutTrace, window: int = 8) -> MetricSeries:
    """Max cosine similarity between block i and the previous `window`
    blocks (1.0 = exact repetition)."""
    if window < 1:
        raise ValueError(f"window must be >= 1 (got {window})")
    if not trace.records:
        raise ValueError("trace is empty")
    frames = _require_frames(trace, "repetition_score")
    flat = np.stack([f.ravel() for f in frames])
    norms = np.linalg.norm(flat, axis=1)
    values = [(trace.records[0].step, 0.0)]
    for i in range(1, len(flat)):
        lo = max(0, i - window)
        dots = flat[lo:i] @ flat[i]
        denom = norms[lo:i] * norms[i]
        sims = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
        values.append((trace.records[i].step, float(sims.max())))
    return MetricSeries("repetition_score", values)


METRICS = {
    "mean_drift": mean_drift,
    "flicker_proxy": flicker_proxy,
    "repetition_score": repetition_score,
}
