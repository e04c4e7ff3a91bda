"""Estimating the degree of mixing of a single qubit from N copies.

The unknown state is U rho_A(b) U^† with rho_A(b) = diag((1+b)/2, (1-b)/2)
and U Haar-random.  After twirling, every spin-j irrep of (C^2)^{⊗N} carries
the eigenvalue

    lambda_j^L(b) = sum_{m=-j}^{j} x^{N/2+m} y^{N/2-m} / (2j+1),

shared by all d_j equivalent copies, which is the diagonal of
rho_A(b)^{⊗N} in the coupled basis averaged over each multiplet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayes import DEFAULT_NODES, DEFAULT_TOL, GainReport, PriorDensity, _gain_from_blocks
from .haar import DensityOperator, su2_twirl
from .spin import HalfSpin, path_multiplicity, spins_for, weight_polynomial

__all__ = ["LocalSpectralBlock", "local_gain", "local_haar_average", "local_spectrum"]

MAX_LOCAL_COPIES = 8


@dataclass(frozen=True)
class LocalSpectralBlock:
    N: int
    j: HalfSpin
    copies: int
    copy_dim: int

    def eigenvalue(self, b):
        """lambda_j^L(b), identical on each of the d_j copies."""
        b = np.asarray(b, dtype=float)
        if np.any(b < 0) or np.any(b > 1):
            raise ValueError("b must lie in [0, 1]")
        x = (1.0 + b) / 2.0
        y = (1.0 - b) / 2.0
        acc = np.zeros_like(b)
        for twice_m in range(-self.j.twice_j, self.j.twice_j + 1, 2):
            up = (self.N + twice_m) // 2
            acc = acc + x**up * y ** (self.N - up)
        out = acc / self.copy_dim
        return float(out) if out.ndim == 0 else out

    def eigenvalue_weight(self, b):
        """Total probability d_j (2j+1) lambda_j^L(b) of the spin-j sector."""
        return self.copies * self.copy_dim * self.eigenvalue(b)

    weight = eigenvalue_weight

    @property
    def coefficients(self):
        return weight_polynomial(self.N, self.j.twice_j)

    @property
    def is_constant(self) -> bool:
        return len(self.coefficients) == 1


def local_spectrum(N: int) -> list[LocalSpectralBlock]:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return [
        LocalSpectralBlock(N=N, j=j, copies=path_multiplicity(N, j), copy_dim=j.multiplet)
        for j in spins_for(N)
    ]


def local_haar_average(N: int, b: float, budget: int | None = None) -> DensityOperator:
    """SU(2) twirl of rho_A(b)^{⊗N} by Euler-angle quadrature (2^N x 2^N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_LOCAL_COPIES:
        raise ValueError(f"dense oracle limited to N <= {MAX_LOCAL_COPIES} (dimension 2^N)")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must lie in [0, 1]")
    single = np.array([(1 + b) / 2, (1 - b) / 2])
    diag = np.ones(1)
    for _ in range(N):
        diag = np.kron(diag, single)
    rho = su2_twirl(np.diag(diag).astype(complex), N, tuple(range(N)), beta_nodes=budget)
    return DensityOperator((rho + rho.conj().T) / 2)


def local_gain(
    N: int, prior: PriorDensity | None = None, nodes: int = DEFAULT_NODES, tol: float = DEFAULT_TOL
) -> GainReport:
    """Expected gain in bits of the optimal collective measurement on rho_A^{⊗N}."""
    prior = prior or PriorDensity.quadratic()
    return _gain_from_blocks(N, local_spectrum(N), prior, nodes=nodes, tol=tol)
