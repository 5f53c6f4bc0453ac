"""Observables, distances, scaling fits and the discrete-to-continuum harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import su3
from .continuum import (
    ContinuumParams,
    diagonal_field,
    field_probability,
    kernel_from_state,
    kernel_solve,
)
from .distribution import ProbabilityDistribution
from .errors import ConfigError, NumericalGuardError
from .openwalk import DensityOperator, NoiseChannel, evolve_open, from_pure
from .walk import FOURIER_SYMMETRIC, CoinSpec, LatticeGrid, gaussian_state, momentum_operator

__all__ = [
    "ProbabilityDistribution",
    "MomentSummary",
    "moments",
    "total_variation",
    "trace_distance",
    "variance_exponent",
    "loglog_slope",
    "DispersionTable",
    "dispersion",
    "ScalingParams",
    "ConvergenceReport",
    "converge",
    "coherence_l1",
]


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    excess_kurtosis: float | None
    side_mass_ratio: float | None


def moments(p: ProbabilityDistribution, t: float | None = None, velocity: float = 1.0) -> MomentSummary:
    """Central moments of ``p``; side mass is the fraction with ``|x| > velocity * t / 2``.

    Excess kurtosis is ``None`` for a zero-variance distribution, and the
    side mass is ``None`` when no time is given.
    """
    x, m = p.support, p.clipped().mass
    total = m.sum()
    m = m / total
    mean = float(np.dot(m, x))
    d = x - mean
    var = float(np.dot(m, d**2))
    kurt = None
    if var > 0.0:
        kurt = float(np.dot(m, d**4) / var**2 - 3.0)
    side = None
    if t is not None:
        side = float(np.clip(m[np.abs(x) > 0.5 * velocity * t].sum(), 0.0, 1.0))
    return MomentSummary(mean, max(var, 0.0), kurt, side)


def total_variation(p1: ProbabilityDistribution, p2: ProbabilityDistribution) -> float:
    if p1.support.shape != p2.support.shape or not np.allclose(p1.support, p2.support, rtol=0, atol=1e-9):
        raise ValueError("distributions live on different supports")
    return float(0.5 * np.abs(p1.mass - p2.mass).sum())


def trace_distance(rho1, rho2) -> float:
    """``||rho1 - rho2||_1 / 2`` from singular values; accepts arrays or DensityOperators."""
    a = rho1.matrix if isinstance(rho1, DensityOperator) else np.asarray(rho1)
    b = rho2.matrix if isinstance(rho2, DensityOperator) else np.asarray(rho2)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(0.5 * np.linalg.svd(a - b, compute_uv=False).sum())


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def variance_exponent(times, variances, window: tuple[float, float] | None = None) -> float:
    """Growth exponent ``a`` in ``variance ~ t^a`` fitted over ``window`` (inclusive)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(variances, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, v = t[sel], v[sel]
    if t.size < 4:
        raise ValueError(f"need at least 4 points in the fit window, got {t.size}")
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValueError("times and variances in the fit window must be positive")
    return loglog_slope(t, v)


@dataclass(frozen=True)
class DispersionTable:
    k: np.ndarray
    phases: np.ndarray  # (n_k, 3) discrete eigenphases / dt, ascending
    h_eigs: np.ndarray  # (n_k, 3) eigenvalues of H_phys, ascending
    max_deviation: float


def eigenphases(u: np.ndarray) -> np.ndarray:
    """``-arg(eig(u))`` on the principal branch (-pi, pi], ascending."""
    ph = -np.angle(np.linalg.eigvals(u))
    ph[ph <= -np.pi] += 2.0 * np.pi
    return np.sort(ph)


def dispersion(theta: float, dx: float, dt: float, k_samples) -> DispersionTable:
    """Discrete walk eigenphases per unit time against the continuum spectrum.

    The continuum side is ``eig((dx/dt) k Jz + (theta/dt) G)``; for the
    scaling ``dx = dt`` this is ``eig(H_phys(k, theta/dt))``.
    """
    ks = np.atleast_1d(np.asarray(k_samples, dtype=float))
    c = CoinSpec.angle(theta)
    phases = np.array([eigenphases(momentum_operator(k, c, dx)) for k in ks]) / dt
    h = np.array([np.linalg.eigvalsh(su3.h_phys(k * dx / dt, theta / dt)) for k in ks])
    return DispersionTable(ks, phases, h, float(np.abs(phases - h).max()))


@dataclass(frozen=True)
class ScalingParams:
    """One member of the continuum-limit family: ``dt = dx = eps``, ``theta = eps * theta_bar``, ``gamma = eps * gamma_bar``."""

    epsilon: float
    theta_bar: float
    gamma_bar: float
    t_phys: float

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.theta_bar < 0 or self.gamma_bar < 0 or self.t_phys < 0:
            raise ConfigError("theta_bar, gamma_bar and t_phys must be non-negative")
        if self.gamma > 1.0:
            raise ConfigError(f"gamma = eps * gamma_bar = {self.gamma!r} exceeds 1")

    @property
    def dx(self) -> float:
        return self.epsilon

    @property
    def dt(self) -> float:
        return self.epsilon

    @property
    def theta(self) -> float:
        return self.epsilon * self.theta_bar

    @property
    def gamma(self) -> float:
        return self.epsilon * self.gamma_bar

    @property
    def steps(self) -> int:
        return int(round(self.t_phys / self.epsilon))


@dataclass
class ConvergenceEntry:
    epsilon: float
    steps: int
    n_sites: int
    tv: float
    discrete: ProbabilityDistribution
    continuum: ProbabilityDistribution
    continuum_dt: float
    trace_drift: float


@dataclass
class ConvergenceReport:
    theta_bar: float
    gamma_bar: float
    t_phys: float
    channel: str
    sigma: float
    entries: list[ConvergenceEntry] = field(default_factory=list)

    @property
    def tvs(self) -> list[float]:
        return [e.tv for e in self.entries]

    @property
    def order(self) -> float | None:
        if len(self.entries) < 2:
            return None
        return loglog_slope([e.epsilon for e in self.entries], self.tvs)

    @property
    def monotone(self) -> bool:
        tv = self.tvs
        return all(b < a for a, b in zip(tv, tv[1:]))


def _sites_for(eps: float, t_phys: float, sigma: float) -> int:
    # light cone plus eight envelope widths on either side
    half = math.ceil((t_phys + 8.0 * sigma) / eps)
    return 2 * half + 1


def converge(
    theta_bar: float,
    gamma_bar: float,
    t_phys: float,
    channel: str,
    epsilons,
    sigma: float = 0.25,
    coin_vector=FOURIER_SYMMETRIC,
    max_dim: int = 3000,
) -> ConvergenceReport:
    """Compare the scaled discrete walk with the continuum kernel equation.

    For each ``eps`` the discrete map runs with ``dx = dt = eps``,
    ``theta = eps theta_bar``, ``gamma = eps gamma_bar`` for
    ``round(t_phys / eps)`` steps, and the continuum equation runs on the
    same eps-lattice from the identical sampled Gaussian initial state.
    The error is the total-variation distance of the final position
    distributions.
    """
    eps_list = [float(e) for e in epsilons]
    if not eps_list:
        raise ConfigError("need at least one epsilon")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("epsilons must be strictly decreasing")
    if channel not in ("none", "coin", "spatial"):
        raise ConfigError(f"unknown channel {channel!r}")
    scalings = [ScalingParams(e, theta_bar, gamma_bar, t_phys) for e in eps_list]
    for s in scalings:
        n = _sites_for(s.epsilon, t_phys, sigma)
        if 3 * n > max_dim:
            raise NumericalGuardError(
                f"eps={s.epsilon!r} needs a {3 * n}-dimensional density operator "
                f"(budget {max_dim})"
            )

    report = ConvergenceReport(theta_bar, gamma_bar, t_phys, channel, sigma)
    for s in scalings:
        grid = LatticeGrid(_sites_for(s.epsilon, t_phys, sigma), s.dx)
        psi0 = gaussian_state(grid, sigma, coin_vector)
        noise = NoiseChannel(channel if s.gamma > 0 else "none", s.gamma)
        rho, _ = evolve_open(from_pure(psi0), CoinSpec.angle(s.theta), noise, s.steps)
        p_disc = rho.probability()
        run = kernel_solve(
            kernel_from_state(psi0),
            ContinuumParams(theta_bar, gamma_bar, channel, s.steps * s.dt),
        )
        p_cont = field_probability(diagonal_field(run.kernel))
        report.entries.append(
            ConvergenceEntry(
                epsilon=s.epsilon,
                steps=s.steps,
                n_sites=grid.n_sites,
                tv=total_variation(p_disc, p_cont),
                discrete=p_disc,
                continuum=p_cont,
                continuum_dt=run.dt,
                trace_drift=run.trace_drift,
            )
        )
    return report


def coherence_l1(rho_coin: np.ndarray) -> float:
    """Sum of the moduli of the off-diagonal entries."""
    m = np.asarray(rho_coin)
    return float(np.abs(m).sum() - np.abs(np.diag(m)).sum())
