"""Continuum dynamics of the lazy walk on a periodic grid.

The pure-state equation is ``d_t psi = Jz d_x psi - i theta_bar G psi``,
i.e. ``d_t psi~(k) = -i H_phys(k) psi~(k)`` for the transform
``psi~(k) = sum_x exp(+ikx) psi(x)`` used by the discrete walk.  With coin
order (L, S, R) and ``Jz = diag(1, 0, -1)`` this moves L left and R right
at unit speed, matching the lattice shift.

Mixed states are evolved as a two-point kernel ``K[x, c, y, d]`` normalized
so that ``h * sum_x Tr K(x, x) = 1``:

    d_t K = A K + K A^+ - gamma_bar * D[K],    A = Jz d_x - i theta_bar G

with ``D`` the coin dissipator (``B - diag(B)`` in every block) or the
spatial dissipator (every block with x != y).  Derivatives are spectral;
time stepping is classical RK4.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import su3
from .distribution import ProbabilityDistribution
from .errors import ConfigError, NumericalGuardError, StabilityError
from .walk import LatticeGrid, PureState, gaussian_state

_JZ = np.array([1.0, 0.0, -1.0])
_OFFDIAG_COIN = (1.0 - np.eye(3))[None, :, None, :]


@dataclass(frozen=True)
class ContinuumParams:
    theta_bar: float = 0.0
    gamma_bar: float = 0.0
    channel: str = "none"
    t_final: float = 1.0
    dt: float | None = None

    def __post_init__(self):
        if self.channel not in ("none", "coin", "spatial"):
            raise ConfigError(f"unknown channel {self.channel!r}")
        for name in ("theta_bar", "gamma_bar", "t_final"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {value!r}")
        if self.dt is not None and not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")


@dataclass
class TwoPointKernel:
    grid: LatticeGrid
    blocks: np.ndarray

    def __post_init__(self):
        n = self.grid.n_sites
        b = np.asarray(self.blocks, dtype=complex)
        if b.shape != (n, 3, n, 3):
            raise ValueError(f"kernel blocks must have shape ({n}, 3, {n}, 3), got {b.shape}")
        self.blocks = b

    def trace(self) -> float:
        """Integrated trace ``h * sum_x Tr K(x, x)``."""
        return float(self.grid.spacing * np.einsum("xaxa->", self.blocks).real)

    def symmetry_error(self) -> float:
        """Max deviation from ``K(y, x) = K(x, y)^+``."""
        return float(np.abs(self.blocks - _dagger(self.blocks)).max())

    def purity(self) -> float:
        """``Tr(rho^2)`` by grid quadrature of the kernel composed with itself."""
        n = self.grid.n_sites
        m = self.blocks.reshape(3 * n, 3 * n)
        return float(self.grid.spacing**2 * np.einsum("ij,ji->", m, m).real)


@dataclass(frozen=True)
class MatrixField:
    """On-site coin density matrices ``K(x, x)``, shape ``(n_sites, 3, 3)``."""

    grid: LatticeGrid
    blocks: np.ndarray


def _dagger(blocks: np.ndarray) -> np.ndarray:
    return blocks.conj().transpose(2, 3, 0, 1)


def spectral_wavenumbers(grid: LatticeGrid) -> np.ndarray:
    """numpy-ordered angular wavenumbers q with ``d_x <-> i q``."""
    return 2.0 * np.pi * np.fft.fftfreq(grid.n_sites, d=grid.spacing)


@functools.lru_cache(maxsize=16)
def differentiation_matrix(n_sites: int, spacing: float) -> np.ndarray:
    """Fourier collocation matrix of ``d/dx`` on the periodic grid.

    Real for odd ``n_sites``; for even sizes the Nyquist mode is kept, which
    leaves the matrix anti-Hermitian but complex.
    """
    q = 2.0 * np.pi * np.fft.fftfreq(n_sites, d=spacing)
    d = np.fft.ifft(1j * q[:, None] * np.fft.fft(np.eye(n_sites), axis=0), axis=0)
    if n_sites % 2:
        d = np.ascontiguousarray(d.real)
    d.setflags(write=False)
    return d


def _ddx(d: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply ``d`` along the leading axis of a complex array."""
    a = np.ascontiguousarray(a)
    flat = a.reshape(a.shape[0], -1)
    if d.dtype.kind == "f":
        return (d @ flat.view(float)).view(complex).reshape(a.shape)
    return (d @ flat).reshape(a.shape)


# ---------------------------------------------------------------- pure states


def dirac_solve(psi0: PureState, theta_bar: float, t_final: float) -> PureState:
    """Exact spectral solution of the continuum pure-state equation.

    Each discrete mode is propagated with ``exp(-i H_phys(k, theta_bar) t)``;
    in numpy's transform ``k = -q``.
    """
    if psi0.n_coin != 3:
        raise ConfigError("dirac_solve needs a three-component state")
    q = spectral_wavenumbers(psi0.grid)
    hs = np.stack([su3.h_phys(-qi, theta_bar) for qi in q])
    w, v = np.linalg.eigh(hs)
    psi_hat = np.fft.fft(psi0.amplitudes, axis=0)
    coeff = np.einsum("kji,kj->ki", v.conj(), psi_hat) * np.exp(-1j * w * t_final)
    psi_hat = np.einsum("kij,kj->ki", v, coeff)
    return PureState(psi0.grid, np.fft.ifft(psi_hat, axis=0))


# ---------------------------------------------------------------- kernels


def kernel_from_state(psi: PureState) -> TwoPointKernel:
    """Pure kernel ``psi(x) psi(y)^+ / h`` of a lattice-normalized state."""
    a = psi.amplitudes
    if a.shape[1] != 3:
        raise ConfigError("kernels are defined for three-component states")
    return TwoPointKernel(psi.grid, np.einsum("xa,yc->xayc", a, a.conj()) / psi.grid.spacing)


def kernel_init_gaussian(grid: LatticeGrid, sigma: float, coin_vector) -> TwoPointKernel:
    """Pure Gaussian kernel ``g(x) g(y)^* v v^+`` with ``h sum |g|^2 = 1``."""
    if not sigma >= 4.0 * grid.spacing:
        raise ConfigError(
            f"sigma={sigma!r} is under-resolved on spacing {grid.spacing!r} (need sigma >= 4h)"
        )
    return kernel_from_state(gaussian_state(grid, sigma, coin_vector))


def stability_bound(grid: LatticeGrid, params: ContinuumParams) -> float:
    """Largest admissible RK4 step: ``min(h/2, 1/(4 (gamma + theta + pi/h)))``."""
    h = grid.spacing
    return min(0.5 * h, 1.0 / (4.0 * (params.gamma_bar + params.theta_bar + math.pi / h)))


def kernel_rhs(blocks: np.ndarray, grid: LatticeGrid, params: ContinuumParams) -> np.ndarray:
    """Time derivative of a Hermitian kernel; ``K A^+`` is formed as ``(A K)^+``."""
    d = differentiation_matrix(grid.n_sites, grid.spacing)
    a_k = np.zeros_like(blocks)
    # Jz = diag(1, 0, -1): the S row carries no advection
    a_k[:, 0] = _ddx(d, blocks[:, 0])
    a_k[:, 2] = -_ddx(d, blocks[:, 2])
    if params.theta_bar:
        # G B = B - (column sums)/3
        a_k -= 1j * params.theta_bar * (blocks - blocks.sum(axis=1, keepdims=True) / 3.0)
    out = a_k + _dagger(a_k)
    if params.gamma_bar and params.channel != "none":
        out -= params.gamma_bar * dissipator(blocks, params.channel)
    return out


def dissipator(blocks: np.ndarray, channel: str) -> np.ndarray:
    """``D_c`` (coin-off-diagonal part of every block) or ``D_x`` (blocks with x != y)."""
    if channel == "coin":
        return blocks * _OFFDIAG_COIN
    if channel == "spatial":
        out = blocks.copy()
        idx = np.arange(blocks.shape[0])
        out[idx, :, idx, :] = 0.0
        return out
    if channel == "none":
        return np.zeros_like(blocks)
    raise ConfigError(f"unknown channel {channel!r}")


def _check_dt(dt: float, grid: LatticeGrid, params: ContinuumParams, force_dt: bool) -> None:
    bound = stability_bound(grid, params)
    if dt > bound * (1.0 + 1e-12) and not force_dt:
        raise StabilityError(f"dt={dt!r} exceeds the stability bound {bound!r}")


def kernel_step(
    kernel: TwoPointKernel, params: ContinuumParams, dt: float | None = None, force_dt: bool = False
) -> TwoPointKernel:
    """One RK4 step of size ``dt`` (default ``params.dt``, else the stability bound)."""
    grid = kernel.grid
    if dt is None:
        dt = params.dt if params.dt is not None else stability_bound(grid, params)
    _check_dt(dt, grid, params, force_dt)
    y = kernel.blocks
    k1 = kernel_rhs(y, grid, params)
    k2 = kernel_rhs(y + 0.5 * dt * k1, grid, params)
    k3 = kernel_rhs(y + 0.5 * dt * k2, grid, params)
    k4 = kernel_rhs(y + dt * k3, grid, params)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise NumericalGuardError(f"non-finite kernel after RK4 step of size {dt!r}")
    return TwoPointKernel(grid, out)


@dataclass
class KernelRun:
    kernel: TwoPointKernel
    dt: float
    steps: int
    trace_drift: float
    symmetry_error: float
    snapshots: dict[float, MatrixField] = field(default_factory=dict)


def time_grid(t_final: float, dt_max: float) -> tuple[int, float]:
    """Number of equal steps reaching ``t_final`` without exceeding ``dt_max``."""
    if t_final == 0:
        return 0, dt_max
    n = max(1, math.ceil(t_final / dt_max - 1e-9))
    return n, t_final / n


def kernel_solve(
    kernel0: TwoPointKernel,
    params: ContinuumParams,
    snapshot_every: int = 0,
    force_dt: bool = False,
) -> KernelRun:
    """Integrate to ``params.t_final``; snapshots of the diagonal field every ``snapshot_every`` steps."""
    grid = kernel0.grid
    dt_max = params.dt if params.dt is not None else stability_bound(grid, params)
    steps, dt = time_grid(params.t_final, dt_max)
    _check_dt(dt, grid, params, force_dt)
    trace0 = kernel0.trace()
    kernel = kernel0
    snaps: dict[float, MatrixField] = {}
    for n in range(steps + 1):
        if snapshot_every and n % snapshot_every == 0:
            snaps[n * dt] = diagonal_field(kernel)
        if n == steps:
            break
        kernel = kernel_step(kernel, params, dt, force_dt=force_dt)
    if snapshot_every and steps * dt not in snaps:
        snaps[steps * dt] = diagonal_field(kernel)
    return KernelRun(
        kernel=kernel,
        dt=dt,
        steps=steps,
        trace_drift=abs(kernel.trace() - trace0),
        symmetry_error=kernel.symmetry_error(),
        snapshots=snaps,
    )


# ---------------------------------------------------------------- single modes


def mode_superoperator(k: float, k_prime: float, theta_bar: float, gamma_bar: float) -> np.ndarray:
    """9x9 generator of ``dB/dt = -i(H(k) B - B H(k')) - gamma_bar (B - diag B)`` on row-major vec(B)."""
    hk = su3.h_phys(k, theta_bar)
    hkp = su3.h_phys(k_prime, theta_bar)
    eye = np.eye(3)
    # row-major vec: vec(A B C) = (A kron C^T) vec(B)
    gen = -1j * (np.kron(hk, eye) - np.kron(eye, hkp.T))
    gen -= gamma_bar * np.diag((1.0 - eye).ravel())
    return gen


def mode_solve_coin(k: float, k_prime: float, b0: np.ndarray, params: ContinuumParams) -> np.ndarray:
    """Exact coin-channel evolution of the mode ``exp(-ikx) B exp(+ik'y)`` to ``params.t_final``."""
    if params.channel not in ("coin", "none"):
        raise ConfigError("mode_solve_coin handles the coin channel (or no channel)")
    gamma = params.gamma_bar if params.channel == "coin" else 0.0
    gen = mode_superoperator(k, k_prime, params.theta_bar, gamma)
    b = scipy.linalg.expm(gen * params.t_final) @ np.asarray(b0, dtype=complex).ravel()
    return b.reshape(3, 3)


def mode_kernel(grid: LatticeGrid, k: float, k_prime: float, b: np.ndarray) -> np.ndarray:
    """Kernel blocks of the single mode ``exp(-ikx) B exp(+ik'y)``."""
    x = grid.x
    return np.einsum("x,ac,y->xayc", np.exp(-1j * k * x), np.asarray(b, dtype=complex), np.exp(1j * k_prime * x))


# ---------------------------------------------------------------- observables


def diagonal_field(kernel: TwoPointKernel) -> MatrixField:
    idx = np.arange(kernel.grid.n_sites)
    return MatrixField(kernel.grid, kernel.blocks[idx, :, idx, :].copy())


def field_probability(fld: MatrixField) -> ProbabilityDistribution:
    """``P(x) = h Tr F(x)``."""
    mass = fld.grid.spacing * np.einsum("xaa->x", fld.blocks).real
    return ProbabilityDistribution(fld.grid.x, mass)
