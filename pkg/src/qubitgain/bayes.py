"""Priors, posteriors and Kullback information gain for block measurements.

All gains returned to callers are in bits; integrals are carried out in nats
and converted at the end.  Outcome labels ``k`` are 1-based, matching the
block ordering of a :class:`~qubitgain.spin.Spectrum` (k = 1 is the top spin).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import tanhsinh
from scipy.optimize import elementwise
from scipy.special import roots_legendre

__all__ = [
    "AbstractPOVM",
    "ExperimentTrace",
    "GainReport",
    "PriorDensity",
    "UndefinedPosteriorError",
    "average_gain",
    "entanglement_of_formation",
    "fit_asymptote",
    "marginal_probability",
    "outcome_gain",
    "outcome_probability",
    "posterior",
    "povm_gain",
    "reparametrized_gain",
    "simulate_experiment",
    "single_copy_monotone",
]

LN2 = math.log(2.0)
DEFAULT_NODES = 200
DEFAULT_TOL = 1e-10
MAX_NODES = 12800


class UndefinedPosteriorError(ValueError):
    """Raised when conditioning on an outcome of zero probability."""


@lru_cache(maxsize=None)
def _nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


def _horner(coeffs: Sequence[Fraction], b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(b, dtype=float)
    for c in reversed(coeffs):
        out = out * b + float(c)
    return out


def _poly_integral(coeffs: Iterable[Fraction]) -> Fraction:
    return sum((Fraction(c) / (i + 1) for i, c in enumerate(coeffs)), Fraction(0))


def _poly_mul(p: Sequence[Fraction], q: Sequence[Fraction]) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, c in enumerate(q):
            out[i + j] += a * c
    return tuple(out)


@dataclass(frozen=True)
class PriorDensity:
    """Probability density on b in [0, 1].

    Polynomial priors carry exact rational ``coefficients`` (ascending powers
    of b) and support exact moments.  Generic priors only carry a vectorized
    ``density`` callable; ``bound`` is an upper bound used for rejection
    sampling.
    """

    density: Callable[[np.ndarray], np.ndarray]
    coefficients: tuple[Fraction, ...] | None = None
    bound: float | None = None
    name: str = "custom"

    @classmethod
    def polynomial(cls, coefficients: Iterable, name: str | None = None) -> "PriorDensity":
        coeffs = tuple(Fraction(c) for c in coefficients)
        if not coeffs:
            raise ValueError("empty coefficient list")
        total = _poly_integral(coeffs)
        if total != 1:
            raise ValueError(f"polynomial prior integrates to {total}, not 1")
        grid = np.linspace(0.0, 1.0, 2001)
        vals = _horner(coeffs, grid)
        if np.any(vals < -1e-12):
            raise ValueError("polynomial prior is negative somewhere on [0, 1]")
        bound = float(vals.max()) * (1 + 1e-9) + 1e-12
        return cls(
            density=lambda b, c=coeffs: _horner(c, np.asarray(b, dtype=float)),
            coefficients=coeffs,
            bound=bound,
            name=name or "poly:" + ",".join(str(c) for c in coeffs),
        )

    @classmethod
    def quadratic(cls) -> "PriorDensity":
        """The unbiased prior 3b^2 induced by Haar-random two-qubit pure states."""
        return cls.polynomial([0, 0, 3], name="quadratic")

    @classmethod
    def uniform(cls) -> "PriorDensity":
        return cls.polynomial([1], name="uniform")

    @classmethod
    def from_callable(
        cls,
        fn: Callable,
        bound: float | None = None,
        normalize: bool = True,
        name: str = "custom",
    ) -> "PriorDensity":
        """Wrap a vectorized nonnegative function, normalizing it numerically."""
        x, w = _nodes(4000)
        vals = np.asarray(fn(x), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")
        total = float(w @ vals)
        if not total > 0:
            raise ValueError("density has zero mass on [0, 1]")
        scale = 1.0 / total if normalize else 1.0
        if not normalize and abs(total - 1.0) > 1e-10:
            raise ValueError(f"density integrates to {total}, not 1")
        return cls(
            density=lambda b, f=fn, s=scale: s * np.asarray(f(np.asarray(b, dtype=float)), dtype=float),
            bound=None if bound is None else bound * scale,
            name=name,
        )

    @property
    def kind(self) -> str:
        return "polynomial" if self.coefficients is not None else "generic"

    def __call__(self, b):
        return self.density(b)

    def integrate(self, fn: Callable | None = None, nodes: int = 2000) -> float:
        """Quadrature of ``density * fn`` (or of the density alone)."""
        x, w = _nodes(nodes)
        vals = self.density(x)
        if fn is not None:
            vals = vals * fn(x)
        return float(w @ vals)

    def mean(self) -> float:
        if self.coefficients is not None:
            return float(_poly_integral((Fraction(0),) + self.coefficients))
        return self.integrate(lambda b: b)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` values of b.

        The quadratic prior uses the closed-form inverse CDF b = u**(1/3);
        other polynomials invert the exact CDF numerically; generic priors
        use rejection sampling against ``bound``.
        """
        if self.coefficients == (0, 0, 3):
            return rng.random(size) ** (1.0 / 3.0)
        if self.coefficients is not None:
            cdf = (Fraction(0),) + tuple(c / (i + 1) for i, c in enumerate(self.coefficients))
            u = rng.random(size)
            res = elementwise.find_root(
                lambda b, target: _horner(cdf, b) - target,
                (np.zeros(size), np.ones(size)),
                args=(u,),
                tolerances=dict(xatol=1e-15, xrtol=0.0),
            )
            return np.clip(res.x, 0.0, 1.0)
        if self.bound is None:
            raise ValueError("rejection sampling needs a density bound")
        out = np.empty(0)
        while out.size < size:
            n = max(2 * (size - out.size), 64)
            cand = rng.random(n)
            keep = rng.random(n) * self.bound < self.density(cand)
            out = np.concatenate([out, cand[keep]])
        return out[:size]


@dataclass(frozen=True)
class GainReport:
    N: int
    marginals: list
    outcome_gains: list[float]
    average_gain: float
    quad_error: float
    nodes: int = 0
    prior: str = ""

    @property
    def exact(self) -> bool:
        return all(isinstance(p, Fraction) for p in self.marginals)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "prior": self.prior,
            "marginals": [str(p) if isinstance(p, Fraction) else p for p in self.marginals],
            "outcome_gains_bits": self.outcome_gains,
            "average_gain_bits": self.average_gain,
            "quad_error_bits": self.quad_error,
            "nodes": self.nodes,
        }


def _block(spec, k: int):
    m = len(spec)
    if not 1 <= k <= m:
        raise IndexError(f"outcome index {k} outside 1..{m}")
    return spec[k - 1]


def outcome_probability(spec, k: int, b):
    """p(k|b) for the optimal projective measurement: the k-th block weight."""
    return _block(spec, k).weight(b)


def _block_marginal(block, prior: PriorDensity, nodes: int = 2000):
    if prior.coefficients is not None:
        return _poly_integral(_poly_mul(block.coefficients, prior.coefficients))
    return prior.integrate(block.weight, nodes=nodes)


def marginal_probability(spec, k: int, prior: PriorDensity):
    """p(k) = integral of f(b) p(k|b); a Fraction for polynomial priors."""
    return _block_marginal(_block(spec, k), prior)


def posterior(prior: PriorDensity, spec, k: int) -> PriorDensity:
    """Bayes update of ``prior`` after observing outcome ``k``."""
    block = _block(spec, k)
    if block.is_constant:
        return prior
    pk = _block_marginal(block, prior)
    if pk == 0:
        raise UndefinedPosteriorError(f"outcome {k} has zero marginal probability")
    pkf = float(pk)

    def density(b, _w=block.weight, _f=prior.density):
        b = np.asarray(b, dtype=float)
        return _w(b) * _f(b) / pkf

    coeffs = None
    if prior.coefficients is not None:
        coeffs = tuple(c / pk for c in _poly_mul(block.coefficients, prior.coefficients))
    bound = None if prior.bound is None else prior.bound / pkf
    return PriorDensity(density=density, coefficients=coeffs, bound=bound, name=f"{prior.name}|k={k}")


def _xlogy_ratio(p: np.ndarray, q) -> np.ndarray:
    # p * ln(p / q) with 0 ln 0 := 0
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * np.log(p / q)
    return np.where(p > 0, out, 0.0)


def _doubling(evaluate: Callable[[int], float], nodes: int, tol: float) -> tuple[float, float, int]:
    n = nodes
    prev = evaluate(n)
    while True:
        n *= 2
        cur = evaluate(n)
        err = abs(cur - prev)
        if err < tol or n >= MAX_NODES:
            return cur, err, n
        prev = cur


def outcome_gain(
    prior: PriorDensity, post: PriorDensity, nodes: int = DEFAULT_NODES, tol: float = DEFAULT_TOL
) -> float:
    """Kullback information K[post, prior] in bits."""
    if post is prior:
        return 0.0

    def evaluate(n):
        x, w = _nodes(n)
        f = prior.density(x)
        g = post.density(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(g > 0, g * np.log(g / f), 0.0)
        return float(w @ vals)

    value, _, _ = _doubling(evaluate, nodes, tol)
    return value / LN2


def _gain_from_blocks(
    N: int,
    blocks: Sequence,
    prior: PriorDensity,
    nodes: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
) -> GainReport:
    marginals = [_block_marginal(blk, prior) for blk in blocks]
    live = [i for i, blk in enumerate(blocks) if not blk.is_constant and marginals[i] != 0]

    def terms(n):
        x, w = _nodes(n)
        f = prior.density(x)
        out = np.zeros(len(blocks))
        for i in live:
            out[i] = w @ (f * _xlogy_ratio(blocks[i].weight(x), float(marginals[i])))
        return out

    n = nodes
    prev = terms(n)
    while True:
        n *= 2
        cur = terms(n)
        err = abs(cur.sum() - prev.sum())
        if err < tol or n >= MAX_NODES:
            break
        prev = cur

    gains = [
        float(cur[i]) / float(marginals[i]) / LN2 if marginals[i] != 0 else 0.0
        for i in range(len(blocks))
    ]
    return GainReport(
        N=N,
        marginals=marginals,
        outcome_gains=gains,
        average_gain=max(float(cur.sum()), 0.0) / LN2,
        quad_error=err / LN2,
        nodes=n,
        prior=prior.name,
    )


def average_gain(
    spec, prior: PriorDensity | None = None, nodes: int = DEFAULT_NODES, tol: float = DEFAULT_TOL
) -> GainReport:
    """Expected information gain of the optimal block measurement.

    This is the upper bound over all measurements; it is attained by
    projecting onto the blocks of ``spec``.
    """
    prior = prior or PriorDensity.quadratic()
    return _gain_from_blocks(spec.N, spec.blocks, prior, nodes=nodes, tol=tol)


@dataclass(frozen=True)
class AbstractPOVM:
    """Block traces q[k, j] = tr(M_k restricted to block j)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        object.__setattr__(self, "q", q)

    def validate(self, spec, atol: float = 1e-10) -> None:
        q = self.q
        if q.ndim != 2 or q.shape[1] != len(spec):
            raise ValueError(f"q must have shape (outcomes, {len(spec)}), got {q.shape}")
        if np.any(~np.isfinite(q)) or np.any(q < 0):
            raise ValueError("q entries must be finite and nonnegative")
        dims = np.array([blk.block_dim for blk in spec], dtype=float)
        if np.any(np.abs(q.sum(axis=0) - dims) > atol):
            raise ValueError("column sums of q must equal the block dimensions")

    @classmethod
    def optimal(cls, spec) -> "AbstractPOVM":
        return cls(np.diag([float(blk.block_dim) for blk in spec]))

    @classmethod
    def trivial(cls, spec) -> "AbstractPOVM":
        return cls(np.array([[float(blk.block_dim) for blk in spec]]))

    @classmethod
    def random(cls, spec, outcomes: int, rng: np.random.Generator) -> "AbstractPOVM":
        """Random block traces; occasionally zeroes entries to hit the boundary."""
        raw = rng.random((outcomes, len(spec)))
        raw[rng.random(raw.shape) < 0.2] = 0.0
        raw[rng.integers(outcomes), :] += 1e-3
        dims = np.array([blk.block_dim for blk in spec], dtype=float)
        return cls(raw / raw.sum(axis=0) * dims)


def povm_gain(
    povm: AbstractPOVM,
    spec,
    prior: PriorDensity | None = None,
    nodes: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
) -> float:
    """Expected gain in bits of an arbitrary measurement given by block traces."""
    prior = prior or PriorDensity.quadratic()
    povm.validate(spec)
    dims = np.array([blk.block_dim for blk in spec], dtype=float)
    mix = povm.q / dims  # p(k|b) = sum_j mix[k, j] * weight_j(b)
    block_marg = np.array([float(_block_marginal(blk, prior)) for blk in spec])
    marg = mix @ block_marg

    def evaluate(n):
        x, w = _nodes(n)
        pkb = mix @ spec.weights(x)
        f = prior.density(x)
        total = 0.0
        for k in range(mix.shape[0]):
            if marg[k] > 0:
                total += w @ (f * _xlogy_ratio(pkb[k], marg[k]))
        return float(total)

    value, _, _ = _doubling(evaluate, nodes, tol)
    return max(value, 0.0) / LN2


def entanglement_of_formation(b):
    """Entanglement-type reparametrization of b (decreasing in b).

    -s log2 s - t log2 t with s = sqrt((1+b)/2), t = sqrt((1-b)/2).
    """
    b = np.asarray(b, dtype=float)
    s = np.sqrt((1.0 + b) / 2.0)
    t = np.sqrt(np.clip((1.0 - b) / 2.0, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -(s * np.log2(s)) - np.where(t > 0, t * np.log2(t), 0.0)
    return val


def _eof_derivative(b):
    b = np.asarray(b, dtype=float)
    s = np.sqrt((1.0 + b) / 2.0)
    t = np.sqrt(np.clip((1.0 - b) / 2.0, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = -(np.log2(s) + 1.0 / LN2) / (4.0 * s)
        dt = (np.log2(t) + 1.0 / LN2) / (4.0 * t)
    return np.where(t > 0, ds + dt, -np.inf)


def single_copy_monotone(b):
    """sqrt((1-b)/2), the single-copy entanglement monotone (decreasing in b)."""
    b = np.asarray(b, dtype=float)
    return np.sqrt(np.clip((1.0 - b) / 2.0, 0.0, None))


def _monotone_derivative(b):
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore"):
        return -0.25 / np.sqrt(np.clip((1.0 - b) / 2.0, 0.0, None))


entanglement_of_formation.derivative = _eof_derivative
single_copy_monotone.derivative = _monotone_derivative


def _numeric_derivative(h: Callable) -> Callable:
    def dh(b):
        b = np.asarray(b, dtype=float)
        step = 1e-6
        lo = np.clip(b - step, 0.0, 1.0)
        hi = np.clip(b + step, 0.0, 1.0)
        return (h(hi) - h(lo)) / (hi - lo)

    return dh


def reparametrized_gain(
    spec,
    prior: PriorDensity | None,
    h: Callable,
    dh: Callable | None = None,
    atol: float = 1e-13,
) -> float:
    """Optimal expected gain in bits, computed in the parameter b' = h(b).

    The prior is pushed forward to g(b') = f(h^-1(b')) / |h'(h^-1(b'))| and
    every integral is taken over b' with tanh-sinh quadrature, so endpoint
    singularities introduced by ``h`` are tolerated.  ``h`` must be strictly
    monotone on [0, 1]; ``dh`` defaults to ``h.derivative`` or a central
    difference.
    """
    prior = prior or PriorDensity.quadratic()
    grid = np.linspace(0.0, 1.0, 4001)
    hv = np.asarray(h(grid), dtype=float)
    steps = np.diff(hv)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("reparametrization must be strictly monotone on [0, 1]")
    if dh is None:
        dh = getattr(h, "derivative", None) or _numeric_derivative(h)
    increasing = steps[0] > 0
    h0, h1 = float(hv[0]), float(hv[-1])
    lo, hi = min(h0, h1), max(h0, h1)

    def inverse(bp):
        bp = np.asarray(bp, dtype=float)
        sign = 1.0 if increasing else -1.0
        res = elementwise.find_root(
            lambda b, target: sign * (np.asarray(h(b), dtype=float) - target),
            (np.zeros_like(bp), np.ones_like(bp)),
            args=(bp,),
            tolerances=dict(xatol=2e-15, xrtol=0.0, fatol=0.0, frtol=0.0),
        )
        return np.clip(res.x, 0.0, 1.0)

    def pushed_prior(b):
        d = np.abs(np.asarray(dh(b), dtype=float))
        f = prior.density(b)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = f / d
        return np.where((f == 0) | ~np.isfinite(g), 0.0, g)

    def integrate(fn):
        res = tanhsinh(fn, lo, hi, atol=atol, rtol=0.0, maxlevel=14)
        return float(res.integral)

    total = 0.0
    for blk in spec:
        if blk.is_constant:
            continue

        def mass(bp, _blk=blk):
            b = inverse(bp)
            return pushed_prior(b) * _blk.weight(b)

        pk = integrate(mass)
        if pk <= 0:
            continue

        def info(bp, _blk=blk, _pk=pk):
            b = inverse(bp)
            return pushed_prior(b) * _xlogy_ratio(_blk.weight(b), _pk)

        total += integrate(info)
    return max(total, 0.0) / LN2


def fit_asymptote(points: Iterable[tuple[float, float]], min_n: float = 40) -> tuple[float, float]:
    """Least-squares fit of gain against log2 N over points with N >= min_n.

    Returns ``(slope, intercept)`` in bits per log2 N.
    """
    pts = [(float(n), float(k)) for n, k in points if float(n) >= min_n]
    ns = {n for n, _ in pts}
    if len(ns) < 2:
        raise ValueError(f"need at least two distinct N >= {min_n} to fit, got {sorted(ns)}")
    x = np.log2([n for n, _ in pts])
    y = np.array([k for _, k in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


@dataclass
class ExperimentTrace:
    """Outcome of repeated simulated measurements."""

    N: int
    seed: int
    b_true: np.ndarray
    outcomes: np.ndarray  # 1-based block labels
    posterior_mean: np.ndarray  # indexed by outcome - 1
    outcome_gain: np.ndarray  # bits, indexed by outcome - 1
    prior_mean: float = field(default=0.0)

    def frequencies(self) -> np.ndarray:
        m = len(self.posterior_mean)
        return np.bincount(self.outcomes - 1, minlength=m) / len(self.outcomes)

    def mean_gain(self) -> float:
        return float(self.outcome_gain[self.outcomes - 1].mean())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "b_true", "outcome", "posterior_mean", "gain_bits"])
        for i, (b, k) in enumerate(zip(self.b_true, self.outcomes)):
            writer.writerow(
                [i, repr(float(b)), int(k), repr(float(self.posterior_mean[k - 1])),
                 repr(float(self.outcome_gain[k - 1]))]
            )
        return buf.getvalue()


def simulate_experiment(
    spec,
    prior: PriorDensity | None = None,
    trials: int = 1,
    seed: int = 0,
    b_true: float | None = None,
) -> ExperimentTrace:
    """Sample b from the prior (or fix it), then an outcome from p(k|b).

    Each outcome is reported with its posterior mean of b and its Kullback
    gain, so the mean gain over trials estimates the expected gain.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    prior = prior or PriorDensity.quadratic()
    rng = np.random.default_rng(seed)
    if b_true is None:
        b = prior.sample(rng, trials)
    else:
        b = np.full(trials, float(b_true))
    weights = spec.weights(b)
    cum = np.cumsum(weights, axis=0)
    u = rng.random(trials)
    idx = np.minimum((u[None, :] >= cum).sum(axis=0), len(spec) - 1)
    # rounding can leave cum[-1] a hair below u; never land on a zero-weight block
    bad = weights[idx, np.arange(trials)] <= 0
    if np.any(bad):
        idx[bad] = np.argmax(weights[:, bad] > 0, axis=0)

    prior_mean = prior.mean()
    post_mean = np.empty(len(spec))
    gains = np.empty(len(spec))
    for k in range(1, len(spec) + 1):
        try:
            post = posterior(prior, spec, k)
        except UndefinedPosteriorError:
            post_mean[k - 1] = math.nan
            gains[k - 1] = math.nan
            continue
        post_mean[k - 1] = post.mean() if post is not prior else prior_mean
        gains[k - 1] = outcome_gain(prior, post)
    return ExperimentTrace(
        N=spec.N,
        seed=seed,
        b_true=b,
        outcomes=idx + 1,
        posterior_mean=post_mean,
        outcome_gain=gains,
        prior_mean=prior_mean,
    )
