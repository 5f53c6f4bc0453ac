"""Position probability distributions on a lattice."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbabilityDistribution:
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if support.shape != mass.shape or support.ndim != 1:
            raise ValueError("support and mass must be 1-d arrays of equal length")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def clipped(self) -> "ProbabilityDistribution":
        """Copy with tiny negative roundoff masses set to zero (most negative value logged)."""
        low = float(self.mass.min()) if self.mass.size else 0.0
        if low < 0.0:
            log.debug("clipping negative probability mass, min=%.3e", low)
        return ProbabilityDistribution(self.support, np.clip(self.mass, 0.0, None))

    def validate(self, tol: float = 1e-9) -> None:
        if not np.all(np.isfinite(self.mass)):
            raise ValueError("distribution contains non-finite mass")
        if self.mass.min(initial=0.0) < -1e-10:
            raise ValueError(f"negative probability mass {self.mass.min():.3e}")
        if abs(self.total - 1.0) > tol:
            raise ValueError(f"distribution sums to {self.total!r}, not 1")

    def __call__(self, x: float) -> float:
        idx = np.flatnonzero(np.isclose(self.support, x, rtol=0.0, atol=1e-9))
        return float(self.mass[idx[0]]) if idx.size else 0.0
