"""Discrete-time lazy quantum walk on a periodic 1-d lattice.

Amplitudes are stored as an array of shape ``(n_sites, n_coin)`` with coin
order (L, S, R) for the lazy walk and (L, R) for the two-state baseline.
One step applies the coin at every site, then moves L one site left, R one
site right, and leaves S in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import su3
from .distribution import ProbabilityDistribution
from .errors import ConfigError

OMEGA = np.exp(2j * np.pi / 3)
# (|L> + w|S> + w^2|R>)/sqrt(3): initial coin state of the reference runs
FOURIER_SYMMETRIC = np.array([1.0, OMEGA, OMEGA**2]) / np.sqrt(3.0)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)

# site offset of each coin component under the conditional shift
LAZY_OFFSETS = (-1, 0, 1)
TWO_STATE_OFFSETS = (-1, 1)


@dataclass(frozen=True)
class LatticeGrid:
    """Periodic lattice ``x_j = (j - n_sites // 2) * spacing``."""

    n_sites: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ConfigError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ConfigError(f"spacing must be positive, got {self.spacing!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def origin(self) -> int:
        return self.n_sites // 2

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_sites) - self.origin) * self.spacing

    @property
    def length(self) -> float:
        return self.n_sites * self.spacing

    def wavenumbers(self) -> np.ndarray:
        """Discrete momenta ``2 pi m / (n_sites * spacing)``, m = 0..n_sites-1."""
        return 2.0 * np.pi * np.arange(self.n_sites) / self.length

    @classmethod
    def for_steps(cls, steps: int, spacing: float = 1.0) -> "LatticeGrid":
        """Smallest odd grid that passes the light-cone guard for ``steps``."""
        return cls(2 * int(steps) + 3, spacing)


def check_steps(steps) -> None:
    if steps < 0 or int(steps) != steps:
        raise ConfigError(f"steps must be a non-negative integer, got {steps!r}")


def check_light_cone(grid: LatticeGrid, steps: int) -> None:
    """Reject grids on which a walk of ``steps`` steps could wrap around."""
    check_steps(steps)
    if grid.n_sites % 2 == 0:
        raise ConfigError(f"walk grids need an odd number of sites, got {grid.n_sites}")
    if grid.n_sites < 2 * steps + 3:
        raise ConfigError(
            f"{grid.n_sites} sites is too small for {steps} steps "
            f"(need at least {2 * steps + 3})"
        )


@dataclass(frozen=True)
class CoinSpec:
    kind: str
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in ("grover", "theta", "hadamard2"):
            raise ConfigError(f"unknown coin kind {self.kind!r}")
        if self.kind == "theta":
            if self.theta is None or not np.isfinite(self.theta):
                raise ConfigError("theta coin needs a finite angle")
            object.__setattr__(self, "theta", float(self.theta))
        elif self.theta is not None:
            raise ConfigError(f"{self.kind} coin takes no angle")

    @classmethod
    def grover(cls) -> "CoinSpec":
        return cls("grover")

    @classmethod
    def angle(cls, theta: float) -> "CoinSpec":
        return cls("theta", theta)

    @classmethod
    def hadamard2(cls) -> "CoinSpec":
        return cls("hadamard2")

    @property
    def n_coin(self) -> int:
        return 2 if self.kind == "hadamard2" else 3

    def matrix(self) -> np.ndarray:
        if self.kind == "grover":
            return su3.grover()
        if self.kind == "theta":
            return su3.coin(self.theta)
        return HADAMARD.copy()


@dataclass
class PureState:
    grid: LatticeGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 2 or amps.shape[0] != self.grid.n_sites or amps.shape[1] not in (2, 3):
            raise ValueError(
                f"amplitudes must have shape ({self.grid.n_sites}, 2 or 3), got {amps.shape}"
            )
        self.amplitudes = amps

    @property
    def n_coin(self) -> int:
        return self.amplitudes.shape[1]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self) -> "PureState":
        return PureState(self.grid, self.amplitudes.copy())


def localized_state(grid: LatticeGrid, coin_vector) -> PureState:
    """All amplitude on the origin site with the given (normalized) coin vector."""
    v = np.asarray(coin_vector, dtype=complex).ravel()
    if v.size not in (2, 3):
        raise ConfigError(f"coin vector must have 2 or 3 entries, got {v.size}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ConfigError(f"coin vector is not normalized (norm {np.linalg.norm(v)!r})")
    amps = np.zeros((grid.n_sites, v.size), dtype=complex)
    amps[grid.origin] = v
    return PureState(grid, amps)


def gaussian_state(grid: LatticeGrid, sigma: float, coin_vector) -> PureState:
    """Sampled Gaussian envelope ``exp(-x^2 / (4 sigma^2))`` times a coin vector.

    The envelope is renormalized on the lattice so that the position
    distribution has standard deviation close to ``sigma``.
    """
    v = np.asarray(coin_vector, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ConfigError("coin vector is not normalized")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma!r}")
    g = np.exp(-grid.x**2 / (4.0 * sigma**2))
    g /= np.linalg.norm(g)
    return PureState(grid, np.outer(g, v))


def shift(amps: np.ndarray, offsets=LAZY_OFFSETS, axis: int = 0) -> np.ndarray:
    """Conditional shift: coin component ``c`` moves by ``offsets[c]`` sites (periodic).

    ``axis`` is the position axis; the coin axis must follow it directly.
    """
    out = np.empty_like(amps)
    lead = (slice(None),) * axis
    for c, off in enumerate(offsets):
        out[lead + (slice(None), c)] = np.roll(amps[lead + (slice(None), c)], off, axis=axis)
    return out


def _step(amps: np.ndarray, coin_matrix: np.ndarray, offsets) -> np.ndarray:
    return shift(amps @ coin_matrix.T, offsets)


def step_unitary(state: PureState, coin: CoinSpec) -> PureState:
    """One lazy-walk step: coin at every site, then the conditional shift."""
    if coin.n_coin != 3 or state.n_coin != 3:
        raise ConfigError("step_unitary needs a three-state coin and state")
    return PureState(state.grid, _step(state.amplitudes, coin.matrix(), LAZY_OFFSETS))


def step_hadamard2(state: PureState) -> PureState:
    """One step of the two-state baseline walk with the Hadamard coin on (L, R)."""
    if state.n_coin != 2:
        raise ConfigError("step_hadamard2 needs a two-component state")
    return PureState(state.grid, _step(state.amplitudes, HADAMARD, TWO_STATE_OFFSETS))


def probability(state: PureState) -> ProbabilityDistribution:
    return ProbabilityDistribution(state.grid.x, np.sum(np.abs(state.amplitudes) ** 2, axis=1))


def evolve_unitary(
    state0: PureState,
    coin: CoinSpec,
    steps: int,
    snapshot_every: int = 0,
    enforce_light_cone: bool = True,
) -> tuple[PureState, dict[int, ProbabilityDistribution]]:
    """Apply ``steps`` walk steps.

    Returns the final state and, when ``snapshot_every > 0``, the position
    distribution every ``snapshot_every`` steps (step 0 included) keyed by
    step number.  Works for both the lazy and the two-state engine; the
    coin kind selects which.  ``enforce_light_cone=False`` permits runs
    that wrap around the periodic grid.
    """
    if enforce_light_cone:
        check_light_cone(state0.grid, steps)
    else:
        check_steps(steps)
    if coin.n_coin != state0.n_coin:
        raise ConfigError(f"{coin.kind} coin does not match a {state0.n_coin}-component state")
    offsets = TWO_STATE_OFFSETS if coin.n_coin == 2 else LAZY_OFFSETS
    c = coin.matrix()
    amps = state0.amplitudes.copy()
    snaps: dict[int, ProbabilityDistribution] = {}
    for t in range(steps + 1):
        if snapshot_every and t % snapshot_every == 0:
            snaps[t] = probability(PureState(state0.grid, amps))
        if t == steps:
            break
        amps = _step(amps, c, offsets)
    return PureState(state0.grid, amps), snaps


def shift_matrix(k: float, dx: float = 1.0) -> np.ndarray:
    """Momentum-space shift ``diag(exp(-ik dx), 1, exp(+ik dx))``."""
    return np.diag([np.exp(-1j * k * dx), 1.0, np.exp(1j * k * dx)])


def momentum_operator(k: float, coin: CoinSpec, dx: float = 1.0) -> np.ndarray:
    """Fourier-space walk operator ``S(k) C`` for the transform ``sum_x exp(ikx) psi(x)``."""
    if coin.kind == "hadamard2":
        raise ConfigError("momentum_operator is defined for the three-state walk only")
    return shift_matrix(k, dx) @ coin.matrix()


def to_momentum(amps: np.ndarray, axis: int = 0) -> np.ndarray:
    """``psi~(k_m) = sum_j exp(+i k_m x_j) psi(x_j)`` on the discrete momentum grid.

    Positions are measured from site 0; the phase convention cancels
    against :func:`from_momentum`.
    """
    n = amps.shape[axis]
    return n * np.fft.ifft(amps, axis=axis)


def from_momentum(amps_k: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.fft.fft(amps_k, axis=axis) / amps_k.shape[axis]


def evolve_momentum(state0: PureState, coin: CoinSpec, steps: int) -> PureState:
    """Evolve by diagonalizing ``U(k)`` on each discrete momentum mode.

    Exact alternative route to :func:`evolve_unitary` on the periodic grid.
    """
    grid = state0.grid
    ks = grid.wavenumbers()
    u = np.stack([momentum_operator(k, coin, grid.spacing) for k in ks])
    # complex Schur form of a normal matrix is diagonal with a unitary basis
    schur = [scipy.linalg.schur(m, output="complex") for m in u]
    phases = np.array([np.diag(t) for t, _ in schur])
    phases /= np.abs(phases)
    evecs = np.array([z for _, z in schur])
    psi_k = to_momentum(state0.amplitudes)
    coeff = np.einsum("kji,kj->ki", evecs.conj(), psi_k)
    coeff *= phases**steps
    psi_k = np.einsum("kij,kj->ki", evecs, coeff)
    return PureState(grid, from_momentum(psi_k))


def dense_operator(grid: LatticeGrid, coin: CoinSpec) -> np.ndarray:
    """Full walk unitary on the joint index ``n_coin * site + coin`` (small grids only)."""
    n, m = grid.n_sites, coin.n_coin
    offsets = TWO_STATE_OFFSETS if m == 2 else LAZY_OFFSETS
    s = np.zeros((n * m, n * m))
    for x in range(n):
        for c, off in enumerate(offsets):
            s[((x + off) % n) * m + c, x * m + c] = 1.0
    return s @ np.kron(np.eye(n), coin.matrix())
