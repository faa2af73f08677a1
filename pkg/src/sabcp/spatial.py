"""Online anisotropic Gaussian-kernel memory over spatial states.

A state is a d-dimensional vector summarizing the recent trajectory. The
archive remembers every (state, score) pair; the similarity of the current
state to an archived one is a product-Gaussian kernel whose per-dimension
bandwidths follow an online Scott rule fed by Welford moments. Summed over
history, the kernel weights give the total spatial evidence; normalized
against score indicators, they give the state-conditional empirical CDF.

Functions here evaluate the defining sums directly; the quantile engine
reproduces them incrementally and is held to these as the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OnlineMoments:
    """Welford running mean / squared-deviation accumulator, one slot per dimension."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "OnlineMoments":
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        return cls(0, np.zeros(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def push(self, x) -> None:
        """Fold one sample in place via the single-pass recurrence."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.mean.shape:
            raise ValueError(f"dimension mismatch: expected {self.mean.shape}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"sample must be finite, got {x!r}")
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self.m2 = self.m2 + delta * (x - self.mean)

    def variance(self) -> np.ndarray:
        """Per-dimension sample variance m2 / (n - 1); zeros while n < 2."""
        if self.n < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n - 1)

    def stddev(self) -> np.ndarray:
        return np.sqrt(self.variance())

    def copy(self) -> "OnlineMoments":
        return OnlineMoments(self.n, self.mean.copy(), self.m2.copy())


def welford_update(m: OnlineMoments, s) -> OnlineMoments:
    """Functional Welford step: a new accumulator with ``s`` folded in."""
    out = m.copy()
    out.push(s)
    return out


def scott_factor(n: int, dim: int) -> float:
    """Sample-size shrink factor n ** (-1 / (dim + 4)) of the Scott rule."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return float(n) ** (-1.0 / (dim + 4))


def bandwidth(m: OnlineMoments, floor: float = 1e-8) -> np.ndarray:
    """Per-dimension kernel bandwidth from running moments.

    h_j = max(sigma_j, floor) * n ** (-1/(d+4)).  The floor keeps the kernel
    well-defined under constant features (sigma_j = 0), in which case any
    nonzero distance collapses the kernel weight toward 0 and the evidence
    gate falls back to the temporal base.
    """
    if m.n < 1:
        raise ValueError("bandwidth undefined before the first sample")
    if not floor > 0.0:
        raise ValueError(f"floor must be positive, got {floor!r}")
    return np.maximum(m.stddev(), floor) * scott_factor(m.n, m.dim)


def kernel_weight(s_t, s_i, h) -> float:
    """Product-Gaussian similarity exp(-0.5 * sum_j ((s_t - s_i)_j / h_j)^2).

    Equals 1 iff the states coincide; depends only on the per-dimension
    distance-to-bandwidth ratios, so rescaling states and bandwidths together
    leaves it unchanged.
    """
    s_t = np.asarray(s_t, dtype=np.float64)
    s_i = np.asarray(s_i, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if s_t.shape != s_i.shape or s_t.shape != h.shape:
        raise ValueError(
            f"dimension mismatch: states {s_t.shape} vs {s_i.shape}, bandwidth {h.shape}"
        )
    if not np.all(h > 0.0):
        raise ValueError("bandwidths must be strictly positive")
    z = (s_t - s_i) / h
    return float(np.exp(-0.5 * np.dot(z, z)))


class SpatialArchive:
    """Aligned history of (state, score) pairs, in arrival order."""

    def __init__(self):
        self.states: list[np.ndarray] = []
        self.scores: list[float] = []

    def __len__(self) -> int:
        return len(self.scores)

    def append(self, state, score: float) -> None:
        state = np.asarray(state, dtype=np.float64)
        if self.states and state.shape != self.states[0].shape:
            raise ValueError(
                f"dimension mismatch: expected {self.states[0].shape}, got {state.shape}"
            )
        if not score >= 0.0:
            raise ValueError(f"scores are nonnegative, got {score!r}")
        self.states.append(state)
        self.scores.append(float(score))

    def state_matrix(self) -> np.ndarray:
        return np.asarray(self.states, dtype=np.float64)


def _weights_over(archive: SpatialArchive, s_t, h) -> np.ndarray:
    s_t = np.asarray(s_t, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    mat = archive.state_matrix()
    if mat.shape[1:] != s_t.shape:
        raise ValueError(f"dimension mismatch: archive {mat.shape[1:]}, query {s_t.shape}")
    if not np.all(h > 0.0):
        raise ValueError("bandwidths must be strictly positive")
    z = (mat - s_t) / h
    return np.exp(-0.5 * np.einsum("ij,ij->i", z, z))


def spatial_evidence(archive: SpatialArchive, s_t, h) -> float:
    """Total kernel mass of the archive around ``s_t``; 0 for an empty archive."""
    if len(archive) == 0:
        return 0.0
    return float(_weights_over(archive, s_t, h).sum())


def spatial_cdf(archive: SpatialArchive, s_t, h, r: float) -> float:
    """Kernel-weighted fraction of archived scores <= r, conditioned near ``s_t``."""
    if len(archive) == 0:
        raise ValueError("spatial CDF undefined with zero evidence; gate must skip it")
    w = _weights_over(archive, s_t, h)
    total = float(w.sum())
    if total == 0.0:
        raise ValueError("spatial CDF undefined with zero evidence; gate must skip it")
    covered = np.asarray(archive.scores, dtype=np.float64) <= r
    return float(np.dot(w, covered) / total)
