"""Irrep combinatorics for the N-copy effective state.

Spins are carried as integers ``twice_j`` so that half-integer labels never
touch floating point.  Block weights are evaluated as sums of nonnegative
monomials ``x**p * y**(N-p)`` with ``x = (1+b)/2`` and ``y = (1-b)/2``; the
same quantity expanded as a polynomial in ``b`` has huge alternating
coefficients and is only used through exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

__all__ = [
    "HalfSpin",
    "SpectralBlock",
    "Spectrum",
    "block_dimension",
    "block_weight",
    "path_multiplicity",
    "spectrum",
    "spins_for",
    "symmetric_dimension",
    "weight_polynomial",
]


@dataclass(frozen=True, order=True)
class HalfSpin:
    """Total-spin label j stored as 2j."""

    twice_j: int

    def __post_init__(self):
        if not isinstance(self.twice_j, (int, np.integer)) or self.twice_j < 0:
            raise ValueError(f"twice_j must be a nonnegative integer, got {self.twice_j!r}")
        object.__setattr__(self, "twice_j", int(self.twice_j))

    @classmethod
    def from_value(cls, j) -> "HalfSpin":
        """Build from a number or string such as ``1.5`` or ``"3/2"``."""
        twice = Fraction(j) * 2
        if twice.denominator != 1:
            raise ValueError(f"{j!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice_j, 2)

    @property
    def multiplet(self) -> int:
        """2j + 1."""
        return self.twice_j + 1

    def __str__(self) -> str:
        if self.twice_j % 2:
            return f"{self.twice_j}/2"
        return str(self.twice_j // 2)


def _as_spin(j) -> HalfSpin:
    return j if isinstance(j, HalfSpin) else HalfSpin.from_value(j)


def _check_compatible(N: int, j: HalfSpin) -> int:
    """Return r = N/2 - j, the number of 'lowered' steps from the top spin."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if j.twice_j > N or (N - j.twice_j) % 2:
        raise ValueError(f"spin {j} does not occur among {N} coupled spin-1/2 systems")
    return (N - j.twice_j) // 2


def path_multiplicity(N: int, j) -> int:
    """Number of equivalent spin-j irreps in (C^2)^{⊗N}.

    d_j = C(N, N/2 - j) - C(N, N/2 - j - 1), exact in Python integers.
    """
    r = _check_compatible(N, _as_spin(j))
    return comb(N, r) - (comb(N, r - 1) if r > 0 else 0)


def block_dimension(j) -> int:
    """Dimension (2j+1)^2 of the j x j sector of SU(2) x SU(2)."""
    return _as_spin(j).multiplet ** 2


def symmetric_dimension(N: int) -> int:
    """Dimension of the symmetric subspace of (C^4)^{⊗N}."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return (N + 3) * (N + 2) * (N + 1) // 6


def _monomial_sum(N: int, r: int, b) -> np.ndarray:
    # sum_{p=r}^{N-r} x^p y^(N-p); every term is nonnegative
    b = np.asarray(b, dtype=float)
    x = (1.0 + b) / 2.0
    y = (1.0 - b) / 2.0
    p = np.arange(r, N - r + 1)
    shape = (-1,) + (1,) * b.ndim
    terms = x[None, ...] ** p.reshape(shape) * y[None, ...] ** (N - p).reshape(shape)
    return terms.sum(axis=0)


def _check_b(b) -> np.ndarray:
    arr = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("b must lie in [0, 1]")
    return arr


def block_weight(N: int, j, b):
    """Probability n_j * lambda_j(b) of landing in the spin-j block.

    Accepts a scalar or an array of ``b`` values and returns the same shape.
    """
    r = _check_compatible(N, _as_spin(j))
    arr = _check_b(b)
    out = path_multiplicity(N, j) * _monomial_sum(N, r, arr)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=None)
def _binomial_products(N: int) -> tuple[tuple[int, ...], ...]:
    # integer coefficients (in b, ascending) of (1+b)^p (1-b)^(N-p), p = 0..N
    plus = [np.array([comb(p, i) for i in range(p + 1)], dtype=object) for p in range(N + 1)]
    minus = [
        np.array([(-1) ** i * comb(q, i) for i in range(q + 1)], dtype=object) for q in range(N + 1)
    ]
    return tuple(tuple(int(c) for c in np.convolve(plus[p], minus[N - p])) for p in range(N + 1))


@lru_cache(maxsize=None)
def weight_polynomial(N: int, twice_j: int) -> tuple[Fraction, ...]:
    """Exact coefficients (ascending powers of b) of the spin-j block weight."""
    j = HalfSpin(twice_j)
    r = _check_compatible(N, j)
    rows = _binomial_products(N)
    acc = [0] * (N + 1)
    for p in range(r, N - r + 1):
        for i, c in enumerate(rows[p]):
            acc[i] += c
    d = path_multiplicity(N, j)
    denom = 2**N
    coeffs = [Fraction(d * c, denom) for c in acc]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class SpectralBlock:
    """One eigenvalue block of the N-copy effective state."""

    N: int
    j: HalfSpin
    copies: int
    block_dim: int

    def weight(self, b):
        """n_j lambda_j(b), the outcome probability of this block."""
        return block_weight(self.N, self.j, b)

    def eigenvalue(self, b):
        """lambda_j(b)."""
        return self.weight(b) / self.block_dim

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return weight_polynomial(self.N, self.j.twice_j)

    @property
    def is_constant(self) -> bool:
        """True when the weight does not depend on b at all."""
        return len(self.coefficients) == 1


@dataclass(frozen=True)
class Spectrum:
    """Complete ordered block list, j descending from N/2."""

    N: int
    blocks: tuple[SpectralBlock, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, k: int) -> SpectralBlock:
        return self.blocks[k]

    @property
    def spins(self) -> list[HalfSpin]:
        return [blk.j for blk in self.blocks]

    def weights(self, b) -> np.ndarray:
        """Stack of block weights, shape ``(m,) + np.shape(b)``."""
        return np.stack([np.asarray(blk.weight(b), dtype=float) for blk in self.blocks])

    def total_dimension(self) -> int:
        return sum(blk.block_dim for blk in self.blocks)


def spectrum(N: int) -> Spectrum:
    """Spectral blocks of the N-copy effective state."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    blocks = []
    for twice_j in range(N, -1, -2):
        j = HalfSpin(twice_j)
        blocks.append(
            SpectralBlock(N=N, j=j, copies=path_multiplicity(N, j), block_dim=block_dimension(j))
        )
    return Spectrum(N=N, blocks=tuple(blocks))


def spins_for(N: int) -> Sequence[HalfSpin]:
    """Spins occurring among N spin-1/2 systems, j descending."""
    return [HalfSpin(t) for t in range(N, -1, -2)]
