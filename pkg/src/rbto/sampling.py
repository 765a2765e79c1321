"""Random inputs, reproducible sample streams, and standard-normal transforms.

All estimators and surrogates in this package operate internally in
standard-normal space ("u-space"); physical realizations are produced by
mapping u-space draws through the marginal transforms defined here.
Lognormal marginals are specified by their physical-space mean and standard
deviation and are moment-matched:

    sigma_ln^2 = ln(1 + (std/mean)^2),   mu_ln = ln(mean) - sigma_ln^2 / 2.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Normal:
    """Gaussian marginal. Normal(0, 1) is the standard-normal component."""

    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0.0:
            raise ValueError(f"Normal std must be > 0, got {self.std}")


@dataclass(frozen=True)
class Lognormal:
    """Lognormal marginal parameterized by physical-space mean and std."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.mean > 0.0:
            raise ValueError(f"Lognormal mean must be > 0, got {self.mean}")
        if not self.std > 0.0:
            raise ValueError(f"Lognormal std must be > 0, got {self.std}")

    @property
    def sigma_ln(self) -> float:
        return float(np.sqrt(np.log(1.0 + (self.std / self.mean) ** 2)))

    @property
    def mu_ln(self) -> float:
        return float(np.log(self.mean) - 0.5 * np.log(1.0 + (self.std / self.mean) ** 2))


RandomVariable = Normal | Lognormal


def standard_normal() -> Normal:
    return Normal(0.0, 1.0)


def _encode_label(label) -> list[int]:
    # Stable across processes; never use built-in hash() here.
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"stream path labels must be non-negative, got {label}")
        return [1, int(label)]
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return [2, int.from_bytes(digest, "little")]
    raise TypeError(f"stream path labels must be int or str, got {type(label).__name__}")


@dataclass(frozen=True)
class SampleStream:
    """Named substream of a root seed.

    Two streams with equal (seed, path) produce identical sequences; distinct
    paths give statistically independent sequences. Immutable, so a stream can
    be shared freely; every use site derives its own generator via rng().
    """

    seed: int
    path: tuple = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        for label in self.path:
            _encode_label(label)

    def child(self, *labels) -> "SampleStream":
        return SampleStream(self.seed, self.path + tuple(labels))

    def rng(self) -> np.random.Generator:
        words = [self.seed]
        for label in self.path:
            words.extend(_encode_label(label))
        return np.random.default_rng(np.random.SeedSequence(words))


@dataclass(frozen=True)
class RandomInput:
    """Ordered vector of independent random variables (the uncertain input).

    Component order is fixed and shared by sampling, the u-space transforms,
    and surrogate basis construction.
    """

    components: tuple[RandomVariable, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("RandomInput needs at least one component")

    @property
    def dim(self) -> int:
        return len(self.components)

    def sample(self, n: int, stream: SampleStream) -> np.ndarray:
        """Draw n i.i.d. physical-space realizations, shape (n, dim)."""
        if n < 1:
            raise ValueError("sample count must be >= 1")
        u = stream.rng().standard_normal((n, self.dim))
        return self.from_u(u)

    def sample_u(self, n: int, stream: SampleStream) -> np.ndarray:
        """Draw n i.i.d. u-space points, shape (n, dim)."""
        if n < 1:
            raise ValueError("sample count must be >= 1")
        return stream.rng().standard_normal((n, self.dim))

    def from_u(self, u: np.ndarray) -> np.ndarray:
        """Map u-space points to physical space (vector or n x dim matrix)."""
        u = np.asarray(u, dtype=float)
        x = np.empty_like(u)
        cols = u[..., None] if u.ndim == 0 else u
        for i, rv in enumerate(self.components):
            ui = cols[..., i]
            if isinstance(rv, Normal):
                x[..., i] = rv.mean + rv.std * ui
            else:
                x[..., i] = np.exp(rv.mu_ln + rv.sigma_ln * ui)
        return x

    def to_u(self, x: np.ndarray) -> np.ndarray:
        """Map physical-space points to u-space; inverse of from_u."""
        x = np.asarray(x, dtype=float)
        u = np.empty_like(x)
        for i, rv in enumerate(self.components):
            xi = x[..., i]
            if isinstance(rv, Normal):
                u[..., i] = (xi - rv.mean) / rv.std
            else:
                if np.any(xi <= 0.0):
                    raise ValueError("lognormal realization must be positive")
                u[..., i] = (np.log(xi) - rv.mu_ln) / rv.sigma_ln
        return u


def log_pdf_u(u) -> float:
    """Log density of the standard-normal measure at a u-space point."""
    u = np.asarray(u, dtype=float)
    return float(np.sum(-0.5 * u**2 - LOG_SQRT_2PI))
