"""Density-operator evolution of the lazy walk under projective dephasing.

The density operator is stored blockwise as an array of shape
``(n_sites, 3, n_sites, 3)``: ``blocks[x, c, y, d] = <x, c| rho |y, d>``.
Reshaping to ``(3 n, 3 n)`` gives the dense matrix on the joint index
``3 * site + coin``.  The walk unitary is never materialized; the coin acts
on each coin axis and the conditional shift is a roll of the position axes,
so one step costs O(d^2) for d = 3 n.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .distribution import ProbabilityDistribution
from .errors import ConfigError, NumericalGuardError
from .walk import LAZY_OFFSETS, CoinSpec, LatticeGrid, PureState, check_steps, check_light_cone, shift

CHANNEL_KINDS = ("none", "coin", "spatial")
MAP_FORMS = ("kraus", "lindblad_euler")
POSITIVITY_FLAG = -1e-8


class PositivityWarning(UserWarning):
    """The density operator acquired a clearly negative eigenvalue."""


@dataclass
class DensityOperator:
    grid: LatticeGrid
    blocks: np.ndarray

    def __post_init__(self):
        n = self.grid.n_sites
        b = np.asarray(self.blocks, dtype=complex)
        if b.shape == (3 * n, 3 * n):
            b = b.reshape(n, 3, n, 3)
        if b.shape != (n, 3, n, 3):
            raise ValueError(f"blocks must have shape ({n}, 3, {n}, 3), got {b.shape}")
        self.blocks = b

    @property
    def dim(self) -> int:
        return 3 * self.grid.n_sites

    @property
    def matrix(self) -> np.ndarray:
        return self.blocks.reshape(self.dim, self.dim)

    def trace(self) -> float:
        return float(np.einsum("xaxa->", self.blocks).real)

    def hermiticity_error(self) -> float:
        m = self.matrix
        return float(np.abs(m - m.conj().T).max())

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the Hermitian part (O(d^3); opt-in)."""
        m = self.matrix
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])

    def probability(self) -> ProbabilityDistribution:
        return ProbabilityDistribution(self.grid.x, np.einsum("xaxa->x", self.blocks).real)

    def copy(self) -> "DensityOperator":
        return DensityOperator(self.grid, self.blocks.copy())


@dataclass(frozen=True)
class NoiseChannel:
    kind: str = "none"
    gamma: float = 0.0
    form: str = "kraus"

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ConfigError(f"unknown channel kind {self.kind!r}")
        if self.form not in MAP_FORMS:
            raise ConfigError(f"unknown map form {self.form!r}")
        if not (np.isfinite(self.gamma) and 0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class OpenSnapshot:
    distribution: ProbabilityDistribution
    coin_state: np.ndarray


def from_pure(state: PureState) -> DensityOperator:
    if state.n_coin != 3:
        raise ConfigError("density operators are defined for the three-state walk")
    psi = state.amplitudes
    return DensityOperator(state.grid, np.einsum("xa,yc->xayc", psi, psi.conj()))


def coin_projectors() -> list[np.ndarray]:
    """P_L, P_S, P_R on the coin space (implicitly tensored with the position identity)."""
    return [np.diag(np.eye(3)[j]).astype(complex) for j in range(3)]


def spatial_projectors(grid: LatticeGrid) -> np.ndarray:
    """Dense ``|x><x| (x) I_c`` for every site, shape ``(n, 3n, 3n)``.  Small grids only."""
    n = grid.n_sites
    out = np.zeros((n, 3 * n, 3 * n), dtype=complex)
    for x in range(n):
        out[x, 3 * x:3 * x + 3, 3 * x:3 * x + 3] = np.eye(3)
    return out


def _coin_left(blocks, c):
    return np.einsum("ab,xbyd->xayd", c, blocks, optimize=True)


def _coin_right(blocks, c):
    # blocks @ c^dagger on the column coin index
    return np.einsum("xayc,dc->xayd", blocks, c.conj(), optimize=True)


def _unshift(blocks, axis):
    return shift(blocks, tuple(-o for o in LAZY_OFFSETS), axis=axis)


def conjugate_by_walk(blocks: np.ndarray, coin_matrix: np.ndarray) -> np.ndarray:
    """``U rho U^dagger`` with ``U = S (I (x) C)``, applied structurally."""
    out = _coin_right(_coin_left(blocks, coin_matrix), coin_matrix)
    return shift(shift(out, axis=0), axis=2)


def _left_walk(blocks, c):
    return shift(_coin_left(blocks, c), axis=0)


def _left_walk_dagger(blocks, c):
    return _coin_left(_unshift(blocks, 0), c.conj().T)


def _dephase_mask(kind: str, n: int) -> np.ndarray:
    """Broadcastable 0/1 mask of ``sum_j P_j (.) P_j`` for a projector family."""
    if kind == "coin":
        return np.eye(3)[None, :, None, :]
    return np.eye(n)[:, None, :, None]


def _projector_sum_left(blocks: np.ndarray, kind: str) -> np.ndarray:
    """``(sum_j P_j) X`` for the coin or spatial projector family."""
    if kind == "coin":
        total = np.sum(coin_projectors(), axis=0)
        return np.einsum("ab,xbyd->xayd", total, blocks)
    # diagonal of sum_x |x><x|
    weights = np.eye(blocks.shape[0]).sum(axis=0)
    return blocks * weights[:, None, None, None]


def lindblad_step(rho: DensityOperator, coin: CoinSpec, channel: NoiseChannel) -> DensityOperator:
    """One step of the discrete dephasing map.

    ``kraus``: ``(1 - g) U rho U^+ + g sum_j P_j U rho U^+ P_j`` (CPTP for all g).
    ``lindblad_euler``: ``U rho U^+ + g sum_j (L_j rho L_j^+ - {L_j^+ L_j, rho}/2)``
    with ``L_j = P_j U``; trace preserving, but not positivity preserving for
    large g.  The two forms coincide at g = 0.
    """
    c = coin.matrix()
    if coin.n_coin != 3:
        raise ConfigError("open evolution needs a three-state coin")
    sigma = conjugate_by_walk(rho.blocks, c)
    g = channel.gamma
    if channel.kind == "none" or g == 0.0:
        return DensityOperator(rho.grid, sigma)
    mask = _dephase_mask(channel.kind, rho.grid.n_sites)
    if channel.form == "kraus":
        return DensityOperator(rho.grid, (1.0 - g) * sigma + g * (sigma * mask))
    # anticommutator with K = sum_j L_j^+ L_j = U^+ (sum_j P_j) U
    k_rho = _left_walk_dagger(_projector_sum_left(_left_walk(rho.blocks, c), channel.kind), c)
    n = rho.grid.n_sites
    rho_k = k_rho.reshape(3 * n, 3 * n).conj().T.reshape(rho.blocks.shape)
    return DensityOperator(rho.grid, sigma + g * (sigma * mask - 0.5 * (k_rho + rho_k)))


def reduced_coin_state(rho: DensityOperator) -> np.ndarray:
    """Partial trace over position."""
    return np.einsum("xaxc->ac", rho.blocks)


def evolve_open(
    rho0: DensityOperator,
    coin: CoinSpec,
    channel: NoiseChannel,
    steps: int,
    snapshot_every: int = 0,
    monitor_positivity: bool = False,
    enforce_light_cone: bool = True,
) -> tuple[DensityOperator, dict[int, OpenSnapshot]]:
    """Iterate :func:`lindblad_step`.

    With ``monitor_positivity`` the smallest eigenvalue is checked at every
    snapshot and at the end; values below -1e-8 raise a
    :class:`PositivityWarning`.  The check is O(d^3).
    ``enforce_light_cone=False`` permits runs that wrap around the grid.
    """
    if enforce_light_cone:
        check_light_cone(rho0.grid, steps)
    else:
        check_steps(steps)
    rho = rho0.copy()
    snaps: dict[int, OpenSnapshot] = {}
    for t in range(steps + 1):
        snap = bool(snapshot_every) and t % snapshot_every == 0
        if snap:
            snaps[t] = OpenSnapshot(rho.probability(), reduced_coin_state(rho))
        if monitor_positivity and (snap or t == steps):
            lam = rho.min_eigenvalue()
            if lam < POSITIVITY_FLAG:
                warnings.warn(
                    f"step {t}: minimum eigenvalue {lam:.3e} ({channel.form}, gamma={channel.gamma})",
                    PositivityWarning,
                    stacklevel=2,
                )
        if t == steps:
            break
        rho = lindblad_step(rho, coin, channel)
        if not np.isfinite(rho.blocks).all():
            raise NumericalGuardError(f"non-finite density operator after step {t + 1}")
    return rho, snaps
