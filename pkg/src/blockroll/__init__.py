"""Blockwise autoregressive rollout with bounded-cache scheduling policies."""

from .denoisers import (
    AnalyticGaussianDenoiser,
    ContextFrame,
    ContextMeanDenoiser,
    DenoiserInterface,
    TinyAttentionDenoiser,
)
from .engine import (
    HistoryStore,
    InternalInvariantError,
    Rollout,
    RolloutConfig,
    RolloutTrace,
    TraceRecord,
    run,
)
from .metrics import MetricSeries, flicker_proxy, mean_drift, repetition_score
from .rope import RotaryConfig, position_of, rotate
from .sampler import NoiseSource, TimestepSchedule, forward_noise, sample_block, sigma
from .schedule import (
    CacheSlot,
    Orientation,
    Policy,
    PolicyConfig,
    RollConvention,
    Schedule,
    frame_expand,
    oracle_boustrophedon,
    roll_slot,
    rolling_sink_schedule,
    schedule_for,
    sink_schedule,
    sliding_index_schedule,
    window_schedule,
)

__all__ = [
    "AnalyticGaussianDenoiser",
    "CacheSlot",
    "ContextFrame",
    "ContextMeanDenoiser",
    "DenoiserInterface",
    "HistoryStore",
    "InternalInvariantError",
    "MetricSeries",
    "NoiseSource",
    "Orientation",
    "Policy",
    "PolicyConfig",
    "RollConvention",
    "Rollout",
    "RolloutConfig",
    "RolloutTrace",
    "RotaryConfig",
    "Schedule",
    "TimestepSchedule",
    "TinyAttentionDenoiser",
    "TraceRecord",
    "flicker_proxy",
    "forward_noise",
    "frame_expand",
    "mean_drift",
    "oracle_boustrophedon",
    "position_of",
    "repetition_score",
    "roll_slot",
    "rolling_sink_schedule",
    "rotate",
    "run",
    "sample_block",
    "schedule_for",
    "sigma",
    "sink_schedule",
    "sliding_index_schedule",
    "window_schedule",
]
