"""Brute-force group integration of the N-copy two-qubit state.

Everything here is dense linear algebra on (C^4)^{⊗N}, so it is only meant
for small N (4^N <= 256).  Qubits are ordered copy-major: A1 B1 A2 B2 ...,
with |0> the spin-up state along z.

Two integration routes are provided:

* ``"euler-quadrature"``: U = Rz(a) Ry(b) Rz(g) on each side.  The z
  rotations act diagonally, so their trapezoid averages are applied
  elementwise; only Ry needs dense conjugation, at Gauss-Legendre nodes in
  the polar angle.
* ``"monte-carlo"``: Haar samples from uniform unit quaternions, in batches
  with independent child seeds so results do not depend on worker count.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .spin import HalfSpin, block_weight, spectrum

__all__ = [
    "AmbiguousClusteringError",
    "DensityOperator",
    "ProjectivePOVM",
    "VerificationReport",
    "casimir_multiplicities",
    "commutator_check",
    "extract_povm",
    "haar_average_state",
    "haar_twirl",
    "mc_block_weights",
    "random_su2",
    "reference_povm",
    "reference_state",
    "schmidt_average_state",
    "schmidt_state",
    "spinor",
    "su2_twirl",
    "symmetric_projector",
    "total_spin_projectors",
    "verify_spectrum",
]

MAX_COPIES = 4
METHODS = ("euler-quadrature", "monte-carlo")
BATCH = 20000


class AmbiguousClusteringError(RuntimeError):
    pass


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10, eig_tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise ValueError(f"trace is {np.trace(m).real}, not 1")
        if np.linalg.eigvalsh(m).min() < -eig_tol:
            raise ValueError("matrix has negative eigenvalues")


@dataclass(frozen=True)
class ProjectivePOVM:
    """Orthogonal projectors, largest block first.

    ``bases[k]`` holds an orthonormal basis (columns) of the k-th range and
    ``eigenvalues[k]`` the mean eigenvalue found there at extraction time.
    """

    projectors: list[np.ndarray]
    block_dims: list[int]
    bases: list[np.ndarray] = field(repr=False)
    eigenvalues: list[float] = field(default_factory=list)

    def check(self, support: np.ndarray | None = None, atol: float = 1e-9) -> None:
        for k, p in enumerate(self.projectors):
            if np.max(np.abs(p @ p - p)) > atol:
                raise ValueError(f"projector {k} is not idempotent")
            for q in self.projectors[k + 1:]:
                if np.max(np.abs(p @ q)) > atol:
                    raise ValueError("projectors are not mutually orthogonal")
        if support is not None:
            total = sum(self.projectors)
            if np.max(np.abs(total - support)) > atol:
                raise ValueError("projectors do not resolve the identity on the support")


def spinor(direction) -> np.ndarray:
    """Spin-up state along a Bloch direction (array of shape (..., 3))."""
    n = np.asarray(direction, dtype=float)
    theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    phi = np.arctan2(n[..., 1], n[..., 0])
    return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def _antispinor(direction) -> np.ndarray:
    n = np.asarray(direction, dtype=float)
    theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    phi = np.arctan2(n[..., 1], n[..., 0])
    return np.stack([np.sin(theta / 2), -np.exp(1j * phi) * np.cos(theta / 2)], axis=-1)


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(np.abs(norm - 1.0) > 1e-8):
        warnings.warn(f"{name} is not a unit vector; normalizing", stacklevel=3)
    return v / norm


def schmidt_state(b, a_hat, b_hat, alpha) -> np.ndarray:
    """Two-qubit state sqrt((1+b)/2)|a>|b> + e^{i alpha} sqrt((1-b)/2)|-a>|-b>.

    Broadcasts over leading axes; returns amplitudes of shape (..., 4).
    """
    b = np.asarray(b, dtype=float)
    if np.any(b < 0) or np.any(b > 1):
        raise ValueError("b must lie in [0, 1]")
    a_hat = _unit(a_hat, "a_hat")
    b_hat = _unit(b_hat, "b_hat")
    cp = np.sqrt((1 + b) / 2)[..., None]
    cm = np.sqrt((1 - b) / 2)[..., None]
    phase = np.exp(1j * np.asarray(alpha, dtype=float))[..., None]
    up = np.einsum("...i,...j->...ij", spinor(a_hat), spinor(b_hat)).reshape(*a_hat.shape[:-1], 4)
    down = np.einsum("...i,...j->...ij", _antispinor(a_hat), _antispinor(b_hat)).reshape(
        *a_hat.shape[:-1], 4
    )
    return cp * up + cm * phase * down


def reference_state(b: float) -> np.ndarray:
    """c+ |00> + c- |11>."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = np.sqrt((1 + b) / 2)
    psi[3] = np.sqrt((1 - b) / 2)
    return psi


def random_su2(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random SU(2) matrices from uniform unit quaternions."""
    shape = () if size is None else (size,)
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    a = q[..., 0] + 1j * q[..., 1]
    c = q[..., 2] + 1j * q[..., 3]
    return np.stack(
        [np.stack([a, -c.conj()], axis=-1), np.stack([c, a.conj()], axis=-1)], axis=-2
    )


# --- deterministic Euler-angle twirl ------------------------------------------------


def _ry(beta: float) -> np.ndarray:
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    return np.array([[c, -s], [s, c]])


@lru_cache(maxsize=None)
def _site_m(n_sites: int, acted: tuple[int, ...]) -> np.ndarray:
    # total z-spin of the acted qubits for each computational basis index
    bits = (np.arange(2**n_sites)[:, None] >> (n_sites - 1 - np.arange(n_sites))[None, :]) & 1
    return 0.5 * (1 - 2 * bits[:, list(acted)]).sum(axis=1)


def _kron_sites(n_sites: int, acted: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    eye = np.eye(2)
    out = np.ones((1, 1))
    for q in range(n_sites):
        out = np.kron(out, u if q in acted else eye)
    return out


def _dephase(x: np.ndarray, m: np.ndarray, n_phi: int) -> np.ndarray:
    # trapezoid average over the angle of Rz^{⊗}: exact for |Δm| < n_phi
    dm = m[:, None] - m[None, :]
    angles = 2 * np.pi * np.arange(n_phi) / n_phi
    factor = np.exp(-1j * angles[:, None, None] * dm[None]).mean(axis=0)
    return x * factor


def su2_twirl(
    x: np.ndarray,
    n_sites: int,
    acted: tuple[int, ...],
    beta_nodes: int | None = None,
    n_phi: int | None = None,
) -> np.ndarray:
    """Average of U^{⊗} x U^{†⊗} over Haar-random U acting on the ``acted`` qubits."""
    acted = tuple(acted)
    k = len(acted)
    n_phi = n_phi or 2 * k + 2
    beta_nodes = beta_nodes or 2 * k + 16
    m = _site_m(n_sites, acted)
    x = _dephase(np.asarray(x, dtype=complex), m, n_phi)
    t, w = np.polynomial.legendre.leggauss(beta_nodes)
    betas = (t + 1) * np.pi / 2
    weights = w * np.pi / 2 * np.sin(betas) / 2
    acc = np.zeros_like(x)
    for beta, wt in zip(betas, weights):
        r = _kron_sites(n_sites, acted, _ry(beta))
        acc += wt * (r @ x @ r.T)
    return _dephase(acc, m, n_phi)


def haar_twirl(x: np.ndarray, N: int, beta_nodes: int | None = None) -> np.ndarray:
    """Average of D(g)^{⊗N} x D(g)^{†⊗N} over g = (U_A, U_B) in SU(2) x SU(2)."""
    n_sites = 2 * N
    side_a = tuple(range(0, n_sites, 2))
    side_b = tuple(range(1, n_sites, 2))
    x = su2_twirl(x, n_sites, side_b, beta_nodes)
    return su2_twirl(x, n_sites, side_a, beta_nodes)


# --- Monte Carlo ----------------------------------------------------------------------


def _tensor_power(psi: np.ndarray, N: int) -> np.ndarray:
    out = psi
    for _ in range(N - 1):
        out = np.einsum("si,sj->sij", out, psi).reshape(psi.shape[0], -1)
    return out


def _mc_vectors(N: int, b: float, rng: np.random.Generator, size: int) -> np.ndarray:
    ua = random_su2(rng, size)
    ub = random_su2(rng, size)
    d = np.einsum("sij,skl->sikjl", ua, ub).reshape(size, 4, 4)
    psi = d @ reference_state(b)
    return _tensor_power(psi, N)


def _batches(samples: int, seed: int) -> list[tuple[int, np.random.SeedSequence]]:
    n = -(-samples // BATCH)
    seqs = np.random.SeedSequence(seed).spawn(n)
    sizes = [BATCH] * (n - 1) + [samples - BATCH * (n - 1)]
    return list(zip(sizes, seqs))


def _run_batches(fn, samples: int, seed: int, workers: int):
    jobs = _batches(samples, seed)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: fn(job[0], np.random.default_rng(job[1])), jobs))
    else:
        parts = [fn(size, np.random.default_rng(ss)) for size, ss in jobs]
    return parts


def _check_args(N: int, b: float) -> None:
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_COPIES:
        raise ValueError(f"dense oracle limited to N <= {MAX_COPIES} (matrix dimension 4^N)")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must lie in [0, 1]")


def haar_average_state(
    N: int,
    b: float,
    method: str = "euler-quadrature",
    budget: int | None = None,
    seed: int = 0,
    workers: int = 1,
) -> DensityOperator:
    """Numerical rho^(N)(b) = Haar average of (U_A ⊗ U_B)^{⊗N} M(b)^{⊗N} (...)^†.

    ``budget`` is the number of polar-angle nodes for the quadrature method
    and the number of samples for Monte Carlo.
    """
    _check_args(N, b)
    if method == "euler-quadrature":
        psi = _tensor_power(reference_state(b)[None, :], N)[0]
        rho = haar_twirl(np.outer(psi, psi.conj()), N, beta_nodes=budget)
    elif method == "monte-carlo":
        samples = budget or 100_000

        def part(size, rng):
            v = _mc_vectors(N, b, rng, size)
            return v.T @ v.conj()

        rho = sum(_run_batches(part, samples, seed, workers)) / samples
    else:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    rho = (rho + rho.conj().T) / 2
    return DensityOperator(rho)


def schmidt_average_state(N: int, b: float, samples: int, seed: int = 0) -> DensityOperator:
    """Monte Carlo average over isotropic a_hat, b_hat and uniform phase alpha."""
    _check_args(N, b)

    def part(size, rng):
        a_hat = rng.standard_normal((size, 3))
        b_hat = rng.standard_normal((size, 3))
        a_hat /= np.linalg.norm(a_hat, axis=1, keepdims=True)
        b_hat /= np.linalg.norm(b_hat, axis=1, keepdims=True)
        alpha = rng.uniform(0, 2 * np.pi, size)
        psi = schmidt_state(np.full(size, b), a_hat, b_hat, alpha)
        v = _tensor_power(psi, N)
        return v.T @ v.conj()

    rho = sum(_run_batches(part, samples, seed, 1)) / samples
    return DensityOperator((rho + rho.conj().T) / 2)


def mc_block_weights(
    N: int, b: float, povm: ProjectivePOVM, samples: int, seed: int = 0, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimates of block weights with their standard errors.

    tr(P_k Psi Psi^†) is the same for every group element, so it carries no
    sampling information.  Instead each block is probed with one fixed random
    unit vector v_k in its range: n_k |<v_k|Psi>|^2 has the block weight as
    its Haar mean only if the average state is flat on the block.
    """
    _check_args(N, b)
    probe_rng = np.random.default_rng([seed, 0x9B0BE])
    probes = []
    for basis, dim in zip(povm.bases, povm.block_dims):
        z = probe_rng.standard_normal(dim) + 1j * probe_rng.standard_normal(dim)
        probes.append(basis @ (z / np.linalg.norm(z)))
    probes = np.stack(probes, axis=1)
    dims = np.array(povm.block_dims, dtype=float)

    def part(size, rng):
        v = _mc_vectors(N, b, rng, size)
        w = dims[:, None] * (np.abs(v @ probes.conj()) ** 2).T
        return np.stack([w.sum(axis=1), (w**2).sum(axis=1)])

    s = sum(_run_batches(part, samples, seed, workers))
    mean = s[0] / samples
    var = np.maximum(s[1] / samples - mean**2, 0.0)
    return mean, np.sqrt(var / samples)


# --- structure extraction ---------------------------------------------------------------


def extract_povm(
    rho: DensityOperator | np.ndarray,
    cluster_tol: float = 1e-6,
    support_tol: float = 1e-9,
) -> ProjectivePOVM:
    """Projectors onto the eigenspaces of ``rho``, largest dimension first.

    Eigenvalues (relative to the largest) closer than ``cluster_tol`` are
    merged; a gap between clusters smaller than ten times that is refused as
    ambiguous.  Eigenvalues below ``support_tol`` are treated as the kernel.
    """
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    vals, vecs = np.linalg.eigh(mat)
    scale = vals.max()
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order] / scale, vecs[:, order]
    keep = vals > support_tol
    vals, vecs = vals[keep], vecs[:, keep]
    groups: list[list[int]] = [[0]]
    for i in range(1, len(vals)):
        gap = vals[i - 1] - vals[i]
        if gap <= cluster_tol:
            groups[-1].append(i)
        elif gap < 10 * cluster_tol:
            raise AmbiguousClusteringError(
                f"eigenvalue gap {gap:.3g} is within 10x cluster_tol; try another reference b"
            )
        else:
            groups.append([i])
    groups.sort(key=len, reverse=True)
    bases = [vecs[:, g] for g in groups]
    return ProjectivePOVM(
        projectors=[v @ v.conj().T for v in bases],
        block_dims=[len(g) for g in groups],
        bases=bases,
        eigenvalues=[float(vals[g].mean() * scale) for g in groups],
    )


@lru_cache(maxsize=None)
def symmetric_projector(N: int, local_dim: int = 4) -> np.ndarray:
    """Projector onto the permutation-symmetric subspace of (C^local_dim)^{⊗N}."""
    dim = local_dim**N
    idx = np.arange(dim).reshape((local_dim,) * N)
    proj = np.zeros((dim, dim))
    for perm in itertools.permutations(range(N)):
        target = np.transpose(idx, perm).reshape(-1)
        proj[target, np.arange(dim)] += 1.0
    return proj / factorial(N)


def total_spin_projectors(n_qubits: int) -> dict[int, np.ndarray]:
    """Isotypic projectors of the total spin on n_qubits, keyed by 2j.

    Built from the eigenspaces of the Casimir J^2 = sum_a (sum_q S_a^(q))^2.
    """
    paulis = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    acted_all = tuple(range(n_qubits))
    dim = 2**n_qubits
    casimir = np.zeros((dim, dim), dtype=complex)
    for s in paulis:
        total = sum(_kron_sites(n_qubits, (q,), s / 2) for q in acted_all)
        casimir += total @ total
    vals, vecs = np.linalg.eigh(casimir)
    out = {}
    for twice_j in range(n_qubits, -1, -2):
        j = twice_j / 2
        sel = np.abs(vals - j * (j + 1)) < 1e-8
        v = vecs[:, sel]
        out[twice_j] = v @ v.conj().T
    return out


def casimir_multiplicities(n_qubits: int) -> dict[int, int]:
    """Count of spin-j irreps in (C^2)^{⊗n} read off from Casimir eigenspace ranks."""
    projs = total_spin_projectors(n_qubits)
    return {tj: int(round(np.trace(p).real)) // (tj + 1) for tj, p in projs.items()}


# --- verification -------------------------------------------------------------------------


@dataclass
class VerificationReport:
    N: int
    method: str
    rows: list[dict]
    max_deviation: float
    max_stderr: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r["deviation"] <= r["allowed"] for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "method": self.method,
            "max_deviation": self.max_deviation,
            "max_stderr": self.max_stderr,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "rows": self.rows,
        }


def reference_povm(N: int, reference_b: float = 0.3, method: str = "euler-quadrature",
                   budget: int | None = None, seed: int = 0) -> ProjectivePOVM:
    """Block projectors from one generic-b diagonalization."""
    rho = haar_average_state(N, reference_b, method=method, budget=budget, seed=seed)
    tol = 1e-6 if method == "euler-quadrature" else 0.02
    return extract_povm(rho, cluster_tol=tol)


def verify_spectrum(
    N: int,
    b_list=(0.0, 0.3, 0.7, 1.0),
    method: str = "euler-quadrature",
    budget: int | None = None,
    seed: int = 0,
    tolerance: float = 1e-8,
    n_sigma: float = 3.0,
    workers: int = 1,
) -> VerificationReport:
    """Compare closed-form block weights with the numerically averaged state.

    Quadrature rows must agree within ``tolerance``; Monte Carlo rows within
    ``n_sigma`` standard errors (plus a 1e-12 rounding floor).
    """
    _check_args(N, 0.0)
    povm = reference_povm(N)
    spins = [blk.j for blk in spectrum(N)]
    if len(povm.block_dims) != len(spins):
        raise AssertionError(f"found {len(povm.block_dims)} blocks, expected {len(spins)}")
    rows = []
    for b in b_list:
        closed = [block_weight(N, j, b) for j in spins]
        if method == "euler-quadrature":
            rho = haar_average_state(N, b, method=method, budget=budget).matrix
            for k, (j, basis) in enumerate(zip(spins, povm.bases)):
                restricted = basis.conj().T @ rho @ basis
                eig = np.linalg.eigvalsh(restricted)
                trace = float(np.trace(restricted).real)
                dev = max(abs(trace - closed[k]), abs(eig.sum() - closed[k]))
                rows.append(dict(b=b, j=str(j), closed=closed[k], trace=trace,
                                 eigen_sum=float(eig.sum()), block_spread=float(np.ptp(eig)),
                                 stderr=0.0, deviation=dev, allowed=tolerance))
        elif method == "monte-carlo":
            mean, se = mc_block_weights(N, b, povm, budget or 1_000_000, seed=seed, workers=workers)
            for k, j in enumerate(spins):
                dev = abs(mean[k] - closed[k])
                rows.append(dict(b=b, j=str(j), closed=closed[k], trace=float(mean[k]),
                                 eigen_sum=float("nan"), block_spread=float("nan"),
                                 stderr=float(se[k]), deviation=dev,
                                 allowed=n_sigma * float(se[k]) + 1e-12))
        else:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return VerificationReport(
        N=N,
        method=method,
        rows=rows,
        max_deviation=max(r["deviation"] for r in rows),
        max_stderr=max(r["stderr"] for r in rows),
        tolerance=tolerance if method == "euler-quadrature" else n_sigma,
    )


def commutator_check(
    N: int, b1: float, b2: float, method: str = "euler-quadrature", budget: int | None = None,
    seed: int = 0,
) -> float:
    """Spectral norm of [rho(b1), rho(b2)]."""
    r1 = haar_average_state(N, b1, method=method, budget=budget, seed=seed).matrix
    r2 = r1 if b1 == b2 else haar_average_state(N, b2, method=method, budget=budget,
                                                seed=seed + 1).matrix
    return float(np.linalg.norm(r1 @ r2 - r2 @ r1, 2))


def spin_label(twice_j: int) -> str:
    return str(HalfSpin(twice_j))
