"""Pluggable block denoisers at toy scale.

A denoiser maps (noisy block, timestep, expanded conditioning context) to
an estimate of the clean block. Three implementations:

* AnalyticGaussianDenoiser — closed-form oracle for a synthetic AR(1)
  data model; lets the sampler be checked against an exact stationary law.
* ContextMeanDenoiser — convex mix of the context mean and the noisy
  input with an optional additive bias, the controllable error source used
  to demonstrate long-horizon drift.
* TinyAttentionDenoiser — fixed random-weight attention stack that
  consumes the cache exactly the way a real backbone would: queries from
  the current block only, keys/values from context plus current block,
  rotary embedding applied to queries and keys at their assigned frame
  positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .rope import RotaryConfig, rotate
from .sampler import NoiseSource, sigma


@dataclass(frozen=True, eq=False)
class ContextFrame:
    """One conditioning token: a latent frame, its content identity, and
    the frame position it is embedded at."""

    content_frame: int
    position: int
    value: np.ndarray


class DenoiserInterface(Protocol):
    """Contract consumed by sampler.sample_block.

    estimate() returns the intermediate clean prediction for `noisy` at
    timestep `t` given the expanded context. Output shape equals input
    shape. Implementations needing randomness draw from `rng`, so results
    are deterministic under a fixed seed.
    """

    def estimate(self, noisy: np.ndarray, t: float,
                 context: Sequence[ContextFrame],
                 rng: NoiseSource | None = None) -> np.ndarray: ...


def _most_recent(context: Sequence[ContextFrame]) -> ContextFrame:
    return max(context, key=lambda f: f.position)


class AnalyticGaussianDenoiser:
    """Exact Gaussian conditioning for the AR(1) data model
    z_{n+1} = rho*z_n + sqrt(1-rho^2)*w (stationary variance 1, applied
    per coordinate).

    The frame at in-block offset k is modeled as lying k+1 steps after the
    most recent context frame; with no context the prior is the stationary
    N(0, 1). `posterior` returns the exact posterior mean and variance of
    the clean frame given the noisy observation at level sigma(t).
    """

    def __init__(self, rho: float, conditioning: np.ndarray | None = None):
        if not -1.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1) (got {rho})")
        self.rho = rho
        self.conditioning = conditioning  # reserved slot, no semantics yet

    def posterior(self, noisy: np.ndarray, t: float,
                  context: Sequence[ContextFrame]) -> tuple[np.ndarray, np.ndarray]:
        noisy = np.asarray(noisy, dtype=np.float64)
        block_size = noisy.shape[0]
        if context:
            z_prev = np.asarray(_most_recent(context).value, dtype=np.float64)
            gaps = np.arange(1, block_size + 1, dtype=np.float64)[:, None]
            mu = self.rho ** gaps * z_prev[None, :]
            tau2 = 1.0 - self.rho ** (2.0 * gaps)
        else:
            mu = np.zeros_like(noisy)
            tau2 = np.ones((block_size, 1))
        s = sigma(t)
        if s == 0.0:
            return noisy.copy(), np.zeros_like(noisy)
        denom = (1.0 - s) ** 2 * tau2 + s**2
        gain = (1.0 - s) * tau2 / denom
        mean = mu + gain * (noisy - (1.0 - s) * mu)
        var = np.broadcast_to(tau2 * s**2 / denom, noisy.shape).copy()
        return mean, var

    def posterior_mean(self, noisy: np.ndarray, t: float,
                       context: Sequence[ContextFrame]) -> np.ndarray:
        """Deterministic MMSE estimate (exact posterior mean)."""
        return self.posterior(noisy, t, context)[0]

    def estimate(self, noisy: np.ndarray, t: float,
                 context: Sequence[ContextFrame],
                 rng: NoiseSource | None = None) -> np.ndarray:
        """Posterior draw when rng is supplied, posterior mean otherwise.

        Drawing from the exact posterior keeps the denoise/re-noise loop
        calibrated: composed over any timestep schedule, the sampled block
        is distributed exactly as the data model's conditional law, so
        long rollouts reproduce the stationary statistics. The bare
        posterior mean would systematically under-disperse.
        """
        mean, var = self.posterior(noisy, t, context)
        if rng is None:
            return mean
        return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


class ContextMeanDenoiser:
    """Convex combination of the context mean and the noisy block, plus an
    additive bias injected at every estimate (the controllable drift
    source) and an optional fresh-noise innovation.

    With an empty context the anchor weight is renormalized onto the noisy
    term, so the estimate degrades to noisy + bias.
    """

    def __init__(self, anchor_weight: float = 1.0, innovation_scale: float = 0.0,
                 bias: float = 0.0, conditioning: np.ndarray | None = None):
        if not 0.0 <= anchor_weight <= 1.0:
            raise ValueError(f"anchor_weight must lie in [0, 1] (got {anchor_weight})")
        if innovation_scale < 0.0:
            raise ValueError(f"innovation_scale must be >= 0 (got {innovation_scale})")
        self.anchor_weight = anchor_weight
        self.innovation_scale = innovation_scale
        self.bias = bias
        self.conditioning = conditioning  # reserved slot, no semantics yet

    def estimate(self, noisy: np.ndarray, t: float,
                 context: Sequence[ContextFrame],
                 rng: NoiseSource | None = None) -> np.ndarray:
        sigma(t)  # range check only
        noisy = np.asarray(noisy, dtype=np.float64)
        if context:
            ctx_mean = np.mean([f.value for f in context], axis=0)
            est = self.anchor_weight * ctx_mean + (1.0 - self.anchor_weight) * noisy
        else:
            est = noisy.copy()
        est = est + self.bias
        if self.innovation_scale > 0.0:
            if rng is None:
                raise ValueError("innovation_scale > 0 requires a NoiseSource")
            est = est + self.innovation_scale * rng.standard_normal(noisy.shape)
        return est


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class TinyAttentionDenoiser:
    """Fixed random-weight attention stack over latent-frame tokens.

    Exercises the cache-conditioning plumbing, not generation quality:
    queries come solely from the current block's tokens; keys and values
    are the current tokens concatenated after the context tokens. Rotary
    embedding is applied to queries and keys per head at their frame
    positions, which makes the output invariant under a uniform
    translation of all positions. The current block's positions are the
    block_size positions immediately after the highest context position
    (starting at 0 when the context is empty). Context token
    representations are fixed input embeddings across layers, mirroring a
    cache of precomputed keys/values.
    """

    def __init__(self, frame_dim: int, model_dim: int = 32, head_count: int = 4,
                 layer_count: int = 2, weight_seed: int = 0,
                 rope_base: float = 10000.0,
                 conditioning: np.ndarray | None = None):
        if frame_dim < 1 or model_dim < 1 or head_count < 1 or layer_count < 1:
            raise ValueError("frame_dim, model_dim, head_count, layer_count must be >= 1")
        if model_dim % head_count != 0:
            raise ValueError(
                f"model_dim {model_dim} not divisible by head_count {head_count}"
            )
        head_dim = model_dim // head_count
        if head_dim % 2 != 0:
            raise ValueError(f"head dim {head_dim} must be even for rotation")
        self.frame_dim = frame_dim
        self.model_dim = model_dim
        self.head_count = head_count
        self.head_dim = head_dim
        self.layer_count = layer_count
        self.weight_seed = weight_seed
        self.rotary = RotaryConfig(dim=head_dim, base=rope_base)
        self.conditioning = conditioning  # reserved slot, no semantics yet

        gen = np.random.default_rng(weight_seed & 0xFFFF_FFFF_FFFF_FFFF)
        self.w_in = gen.standard_normal((frame_dim, model_dim)) / np.sqrt(frame_dim)
        self.t_embed = gen.standard_normal(model_dim) / np.sqrt(model_dim)
        self.layers = [
            {
                name: gen.standard_normal((model_dim, model_dim)) / np.sqrt(model_dim)
                for name in ("w_q", "w_k", "w_v", "w_o")
            }
            for _ in range(layer_count)
        ]
        self.w_out = gen.standard_normal((model_dim, frame_dim)) / np.sqrt(model_dim)

    def _split_heads(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape[0], self.head_count, self.head_dim)

    def estimate(self, noisy: np.ndarray, t: float,
                 context: Sequence[ContextFrame],
                 rng: NoiseSource | None = None) -> np.ndarray:
        noisy = np.asarray(noisy, dtype=np.float64)
        if noisy.ndim != 2 or noisy.shape[1] != self.frame_dim:
            raise ValueError(
                f"noisy block must have shape (block_size, {self.frame_dim}), "
                f"got {noisy.shape}"
            )
        block_size = noisy.shape[0]
        if context:
            ctx_vals = np.stack([np.asarray(f.value, dtype=np.float64) for f in context])
            if ctx_vals.shape[1] != self.frame_dim:
                raise ValueError(
                    f"context frame width {ctx_vals.shape[1]} does not match "
                    f"frame_dim {self.frame_dim}"
                )
            ctx_pos = np.array([f.position for f in context], dtype=np.float64)
            cur_start = ctx_pos.max() + 1.0
        else:
            ctx_vals = np.zeros((0, self.frame_dim))
            ctx_pos = np.zeros(0)
            cur_start = 0.0
        cur_pos = cur_start + np.arange(block_size, dtype=np.float64)
        all_pos = np.concatenate([ctx_pos, cur_pos])

        h_cur = noisy @ self.w_in + sigma(t) * self.t_embed
        h_ctx = ctx_vals @ self.w_in
        for layer in self.layers:
            kv_src = np.concatenate([h_ctx, h_cur], axis=0)
            q = rotate(self.rotary, self._split_heads(h_cur @ layer["w_q"]),
                       cur_pos[:, None])
            k = rotate(self.rotary, self._split_heads(kv_src @ layer["w_k"]),
                       all_pos[:, None])
            v = self._split_heads(kv_src @ layer["w_v"])
            scores = np.einsum("qhd,khd->hqk", q, k) / np.sqrt(self.head_dim)
            attn = _softmax(scores)
            mixed = np.einsum("hqk,khd->qhd", attn, v)
            h_cur = h_cur + mixed.reshape(block_size, self.model_dim) @ layer["w_o"]
        return h_cur @ self.w_out
