"""Weak/strong embedding perturbations standing in for image augmentations.

A weak view adds small isotropic Gaussian noise; a strong view adds larger
noise and zeroes a fixed fraction of coordinates. Both are pure functions of
(seed, sample_id, step), so any batch can be re-materialized exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import _seed_entropy


@dataclass(frozen=True)
class ViewSpec:
    weak_noise_sigma: float = 0.02
    strong_noise_sigma: float = 0.15
    strong_mask_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.weak_noise_sigma < 0 or self.strong_noise_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if self.strong_noise_sigma < self.weak_noise_sigma:
            raise ValueError("strong_noise_sigma must be >= weak_noise_sigma")
        if not (0.0 <= self.strong_mask_fraction < 1.0):
            raise ValueError("strong_mask_fraction must be in [0, 1)")


def mask_count(dim: int, fraction: float) -> int:
    """Number of coordinates zeroed in a strong view: floor(fraction * dim)."""
    return math.floor(fraction * dim)


def make_views(
    x: np.ndarray, spec: ViewSpec, sample_id: int, step: int
) -> tuple[np.ndarray, np.ndarray]:
    """Return the (weak, strong) view pair of a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"x must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    rng = np.random.default_rng(
        np.random.SeedSequence([_seed_entropy(spec.seed), sample_id, step])
    )
    d = x.shape[0]
    weak = x + spec.weak_noise_sigma * rng.standard_normal(d)
    strong = x + spec.strong_noise_sigma * rng.standard_normal(d)
    m = mask_count(d, spec.strong_mask_fraction)
    if m > 0:
        strong[rng.choice(d, size=m, replace=False)] = 0.0
    return weak, strong


def make_view_batch(
    features: np.ndarray, sample_ids: np.ndarray, spec: ViewSpec, step: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vector-stack make_views over a batch of rows."""
    b, d = features.shape
    weak = np.empty((b, d), dtype=np.float64)
    strong = np.empty((b, d), dtype=np.float64)
    for i in range(b):
        weak[i], strong[i] = make_views(features[i], spec, int(sample_ids[i]), step)
    return weak, strong
