"""SU(3) / Gell-Mann algebra on the three-state coin space.

Coin basis order is (L, S, R) everywhere in the package.  With that order
``jz3() == diag(1, 0, -1)`` and ``expm(-1j * k * dx * jz3())`` is the
momentum-space shift ``diag(exp(-ik dx), 1, exp(+ik dx))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT3 = np.sqrt(3.0)

_GELLMANN = np.zeros((8, 3, 3), dtype=complex)
_GELLMANN[0][0, 1] = _GELLMANN[0][1, 0] = 1
_GELLMANN[1][0, 1], _GELLMANN[1][1, 0] = -1j, 1j
_GELLMANN[2][0, 0], _GELLMANN[2][1, 1] = 1, -1
_GELLMANN[3][0, 2] = _GELLMANN[3][2, 0] = 1
_GELLMANN[4][0, 2], _GELLMANN[4][2, 0] = -1j, 1j
_GELLMANN[5][1, 2] = _GELLMANN[5][2, 1] = 1
_GELLMANN[6][1, 2], _GELLMANN[6][2, 1] = -1j, 1j
_GELLMANN[7] = np.diag([1, 1, -2]) / SQRT3
_GELLMANN.setflags(write=False)

# uniform coin vector u = (1, 1, 1)/sqrt(3)
UNIFORM = np.ones(3, dtype=complex) / SQRT3


def gellmann(i: int) -> np.ndarray:
    """Return the Gell-Mann matrix ``lambda_i`` for ``i`` in 1..8."""
    if not 1 <= int(i) <= 8 or int(i) != i:
        raise ValueError(f"Gell-Mann index must be an integer in 1..8, got {i!r}")
    return _GELLMANN[int(i) - 1].copy()


def gellmann_basis() -> np.ndarray:
    """All eight Gell-Mann matrices stacked as an array of shape (8, 3, 3)."""
    return _GELLMANN.copy()


@dataclass(frozen=True)
class GellMannCoefficients:
    """Expansion ``A = trace_part * I + 1/2 * sum_i c[i] * lambda_{i+1}``.

    Both fields are real for Hermitian input and complex otherwise.
    """

    trace_part: complex | float
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c)
        if c.shape != (8,):
            raise ValueError(f"expected 8 Gell-Mann coefficients, got shape {c.shape}")
        object.__setattr__(self, "c", c)


def decompose(a: np.ndarray) -> GellMannCoefficients:
    """Expand a 3x3 matrix in the identity + Gell-Mann basis."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
    trace_part = np.trace(a) / 3.0
    c = np.einsum("ij,kji->k", a, _GELLMANN)
    if np.allclose(a, a.conj().T, rtol=0.0, atol=1e-14):
        return GellMannCoefficients(float(trace_part.real), c.real.copy())
    return GellMannCoefficients(complex(trace_part), c)


def reconstruct(coeffs: GellMannCoefficients) -> np.ndarray:
    """Inverse of :func:`decompose`."""
    return coeffs.trace_part * np.eye(3, dtype=complex) + 0.5 * np.einsum(
        "k,kij->ij", np.asarray(coeffs.c, dtype=complex), _GELLMANN
    )


def projector_u() -> np.ndarray:
    """Projector onto the uniform coin vector; every entry equals 1/3."""
    return np.full((3, 3), 1.0 / 3.0, dtype=complex)


def projector_perp() -> np.ndarray:
    """Complement ``I - P_u``: 2/3 on the diagonal, -1/3 elsewhere."""
    return np.eye(3, dtype=complex) - projector_u()


def generator_g() -> np.ndarray:
    """Coin generator ``G = I - |u><u|``, so that ``coin(theta) = exp(-i theta G)``."""
    return projector_perp()


def coin(theta: float) -> np.ndarray:
    """Closed form ``P_u + exp(-i theta) P_perp`` of ``exp(-i theta G)``.

    ``coin(pi)`` is the three-state Grover coin ``2|u><u| - I``.
    """
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError(f"coin angle must be finite, got {theta!r}")
    return projector_u() + np.exp(-1j * theta) * projector_perp()


def grover() -> np.ndarray:
    """Grover coin written entrywise: -1/3 on the diagonal, 2/3 elsewhere."""
    return (np.full((3, 3), 2.0, dtype=complex) - 3.0 * np.eye(3)) / 3.0


def jz3() -> np.ndarray:
    """Spin-1 z generator ``lambda_3/2 + sqrt(3)/2 lambda_8 = diag(1, 0, -1)``."""
    return np.diag([1.0, 0.0, -1.0]).astype(complex)


def h_phys(k: float, theta: float) -> np.ndarray:
    """Continuum coin Hamiltonian ``k Jz + theta G`` for wavenumber ``k``."""
    return float(k) * jz3() + float(theta) * generator_g()


def expm_series(a: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Matrix exponential by scaling and squaring of the plain Taylor series.

    Independent of scipy; used to check the closed-form coin.  Terms are
    summed until they no longer change the partial sum.
    """
    a = np.asarray(a, dtype=complex)
    norm = np.abs(a).sum(axis=1).max()
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0.5 else 0
    b = a / 2.0**squarings
    total = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for n in range(1, 60):
        term = term @ b / n
        new = total + term
        if np.array_equal(new, total) or np.abs(term).max() <= tol:
            total = new
            break
        total = new
    for _ in range(squarings):
        total = total @ total
    return total
