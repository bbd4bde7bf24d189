"""Sources, channels, and closed-form mutual-information references.

Correlated-Gaussian pair sampling, AWGN application under both noise
conventions, the derangement sampler that turns joint batches into
product-of-marginal batches, and the SNR/rho/sigma^2 conversions with their
closed-form MI/capacity counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

LN2 = np.log(2.0)


class ChannelError(Exception):
    """Invalid channel/source configuration or sampling request."""


class MiValue(NamedTuple):
    """One mutual-information figure in both units."""

    nats: float
    bits: float


def mi_from_nats(nats: float) -> MiValue:
    return MiValue(float(nats), float(nats) / LN2)


def mi_from_bits(bits: float) -> MiValue:
    return MiValue(float(bits) * LN2, float(bits))


def snr_to_sigma2(snr_db: float, power: float = 1.0) -> float:
    """Noise variance sigma^2 = P * 10^(-snr_db/10)."""
    if power <= 0:
        raise ChannelError(f"power must be positive, got {power}")
    return power * 10.0 ** (-snr_db / 10.0)


def snr_to_rho(snr_db: float) -> float:
    """Correlation of the matched Gaussian pair: rho = sqrt(1/(1+sigma^2)).

    Uses the unit-power convention, under which the AWGN channel output
    renormalized to unit variance has exactly this correlation with its input.
    """
    return float(np.sqrt(1.0 / (1.0 + snr_to_sigma2(snr_db))))


def gaussian_mi(d: int, rho: float) -> MiValue:
    """I(X;Y) for d i.i.d. Gaussian pairs with per-component correlation rho."""
    if not abs(rho) < 1.0:
        raise ChannelError(f"|rho| must be < 1, got {rho}")
    bits = -(d / 2.0) * np.log2(1.0 - rho * rho)
    return mi_from_bits(bits)


def awgn_capacity(snr_db: float) -> float:
    """C = log2(1 + SNR) in bits per complex symbol."""
    return float(np.log2(1.0 + 10.0 ** (snr_db / 10.0)))


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel over d real dimensions.

    A complex symbol occupies two real dimensions; with ``real_noise`` False
    the variance sigma^2 is split as sigma^2/2 per real dimension (complex
    convention), with it True each real dimension receives sigma^2.
    """

    dim: int
    snr_db: float
    power: float = 1.0
    real_noise: bool = False
    kind: str = "awgn"

    def __post_init__(self):
        if self.kind != "awgn":
            raise ChannelError(f"unknown channel kind '{self.kind}'")
        if self.dim < 1:
            raise ChannelError(f"dim must be >= 1, got {self.dim}")
        if self.power <= 0:
            raise ChannelError(f"power must be positive, got {self.power}")

    @property
    def sigma2(self) -> float:
        return snr_to_sigma2(self.snr_db, self.power)


def awgn_apply(x: np.ndarray, sigma2: float, rng, real_noise: bool = False) -> np.ndarray:
    """y = x + n with i.i.d. Gaussian noise.

    Complex convention (default): each real dimension gets variance sigma^2/2.
    ``real_noise`` switches to sigma^2 per real dimension.
    """
    if sigma2 < 0:
        raise ChannelError(f"sigma2 must be >= 0, got {sigma2}")
    x = np.asarray(x, dtype=np.float64)
    if sigma2 == 0.0:
        return x.copy()
    std = np.sqrt(sigma2 if real_noise else sigma2 / 2.0)
    return x + std * rng.standard_normal(x.shape)


def derange(y: np.ndarray, rng, strategy: str = "batch") -> np.ndarray:
    """Fixed-point-free shuffle breaking the (x, y) pairing.

    batch: rows are rotated by a uniform offset in 1..N-1, so no row keeps
    its index. within_sample: each row's d entries are rotated by a random
    nonzero offset (only sound for i.i.d. components).
    """
    y = np.asarray(y)
    n, d = y.shape
    if strategy == "batch":
        if n < 2:
            raise ChannelError(f"batch derangement needs N >= 2, got {n}")
        k = int(rng.integers(1, n))
        return np.roll(y, k, axis=0)
    if strategy == "within_sample":
        if d < 2:
            raise ChannelError(f"within-sample derangement needs d >= 2, got {d}")
        shifts = rng.integers(1, d, size=n)
        cols = (np.arange(d)[None, :] - shifts[:, None]) % d
        return np.take_along_axis(y, cols, axis=1)
    raise ChannelError(f"unknown derangement strategy '{strategy}'")


@dataclass(frozen=True)
class GaussianSourceConfig:
    """d i.i.d. components with corr(X_i, Y_i) = rho."""

    dim: int
    rho: float

    def __post_init__(self):
        if self.dim < 1:
            raise ChannelError(f"dim must be >= 1, got {self.dim}")
        if not abs(self.rho) < 1.0:
            raise ChannelError(f"|rho| must be < 1, got {self.rho}")


@dataclass(frozen=True)
class SampleBatch:
    """Joint pairs (x, y) plus the deranged marginal-product pairing y_perm."""

    x: np.ndarray
    y: np.ndarray
    y_perm: np.ndarray


def gaussian_pair_batch(cfg: GaussianSourceConfig, n: int, rng,
                        strategy: str = "batch") -> SampleBatch:
    """x ~ N(0, I); y = rho*x + sqrt(1-rho^2)*n, so y is unit-variance too."""
    if n < 2:
        raise ChannelError(f"batch size must be >= 2, got {n}")
    x = rng.standard_normal((n, cfg.dim))
    noise = rng.standard_normal((n, cfg.dim))
    y = cfg.rho * x + np.sqrt(1.0 - cfg.rho**2) * noise
    return SampleBatch(x=x, y=y, y_perm=derange(y, rng, strategy))


class GaussianSource:
    """Sampler facade used by the estimator training loop."""

    def __init__(self, cfg: GaussianSourceConfig, strategy: str = "batch"):
        self.cfg = cfg
        self.strategy = strategy

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def sample(self, n: int, rng) -> SampleBatch:
        return gaussian_pair_batch(self.cfg, n, rng, self.strategy)
