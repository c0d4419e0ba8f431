"""Concurrent-learning critic and projected actor updates.

The critic descends the Bellman error at the current state and at a fixed
cloud of sampled states ``z_j``. Because the sampled points are synthetic
rather than recorded, their regressors are re-evaluated with the current
actor weights every time (only the weight-independent pieces
``sigma'(z_j), f(z_j), g(z_j)`` are cached).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from ._kernels import bellman_terms

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LearnerGains:
    eta_c: float
    eta_a1: float
    eta_a2: float

    def __post_init__(self):
        for name in ("eta_c", "eta_a1", "eta_a2"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative gain")
            object.__setattr__(self, name, v)

    @property
    def strictly_positive(self) -> bool:
        return self.eta_c > 0 and self.eta_a1 > 0 and self.eta_a2 > 0


@dataclass(frozen=True)
class SampleSet:
    """Sampled states with cached weight-independent terms.

    ``omega``, ``p`` and ``delta`` are filled by :func:`refresh_samples`.
    ``multiplicity`` weights each point in the Gram and gradient sums.
    """

    points: np.ndarray  # (N, n)
    S: np.ndarray  # (N, m, n) feature Jacobians
    F: np.ndarray  # (N, n) drift
    G: np.ndarray  # (N, n, k) input maps
    multiplicity: np.ndarray  # (N,)
    omega: np.ndarray | None = None
    p: np.ndarray | None = None
    delta: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class RankReport:
    rank: int
    c_lower: float
    c_upper: float
    m: int

    @property
    def full_rank(self) -> bool:
        return self.rank == self.m

    def to_dict(self) -> dict:
        return {"rank": self.rank, "m": self.m, "c_lower": self.c_lower, "c_upper": self.c_upper}


def _grid_points(low, high, N, rng):
    n = low.shape[0]
    q = 2
    while q**n < N:
        q += 1
    axes = [np.linspace(lo, hi, q) for lo, hi in zip(low, high)]
    total = q**n
    idx = np.arange(total) if total == N else np.sort(rng.choice(total, size=N, replace=False))
    digits = np.array(np.unravel_index(idx, (q,) * n)).T
    return np.column_stack([axes[d][digits[:, d]] for d in range(n)])


def sample_points(low, high, N: int, strategy: str = "latin-hypercube", seed: int = 0) -> np.ndarray:
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    if low.shape != high.shape or np.any(high <= low):
        raise ValueError("sample domain needs low < high componentwise")
    rng = np.random.default_rng(seed)
    if strategy in ("latin-hypercube", "lhs"):
        unit = qmc.LatinHypercube(d=low.shape[0], seed=rng).random(N)
        return qmc.scale(unit, low, high)
    if strategy == "grid":
        return _grid_points(low, high, N, rng)
    raise ValueError(f"unknown sampling strategy {strategy!r}")


def samples_from_points(points, plant, basis, multiplicity=None) -> SampleSet:
    points = np.ascontiguousarray(points, dtype=float)
    F, G = plant.affine_batch(points)
    mult = np.ones(points.shape[0]) if multiplicity is None else np.asarray(multiplicity, dtype=float)
    return SampleSet(points, np.ascontiguousarray(basis.jacobian_batch(points)),
                     np.ascontiguousarray(F), np.ascontiguousarray(G), mult)


def build_sample_set(low, high, N: int, plant, basis, strategy: str = "latin-hypercube",
                     seed: int = 0) -> SampleSet:
    """Deterministic sample cloud inside the box ``[low, high]``."""
    if N < basis.m:
        raise ValueError(f"need at least m={basis.m} sample points, got N={N}")
    return samples_from_points(sample_points(low, high, N, strategy, seed), plant, basis)


def refresh_samples(samples: SampleSet, weights, cost) -> SampleSet:
    omega, p, delta, *_ = bellman_terms(
        samples.S, samples.F, samples.G, samples.points, cost.Q, cost.R, cost.R_inv,
        cost.gamma, weights.Wc, weights.Wa1, weights.Wa2,
    )
    return replace(samples, omega=omega, p=p, delta=delta)


def gram(omega, p, multiplicity) -> np.ndarray:
    w = multiplicity / p
    return (omega * w[:, None]).T @ omega


def rank_check(samples: SampleSet, weights, cost) -> RankReport:
    """Rank and eigenvalue bounds of ``sum_j omega_j omega_j' / p_j``."""
    s = refresh_samples(samples, weights, cost)
    lam = np.linalg.eigvalsh(gram(s.omega, s.p, s.multiplicity))
    top = float(lam[-1])
    rank = int(np.sum(lam > RANK_RTOL * top)) if top > 0 else 0
    return RankReport(rank=rank, c_lower=max(float(lam[0]), 0.0), c_upper=max(top, 0.0),
                      m=lam.shape[0])


def critic_derivative(live, samples: SampleSet, gains: LearnerGains) -> np.ndarray:
    """Concurrent-learning critic update.

    ``live`` is ``(delta, omega, p)`` at the current state, or ``None`` to
    drop the instantaneous term. ``samples`` must be freshly refreshed.
    """
    w = samples.multiplicity * samples.delta / samples.p
    out = -gains.eta_c * (w @ samples.omega)
    if live is not None:
        delta, omega, p = live
        out = out - gains.eta_c * (delta / p) * np.asarray(omega)
    return out


def project(W, y, W_bar: float, kappa_p: float = 0.05) -> np.ndarray:
    """Smooth projection of ``y`` keeping ``W`` inside the ball ``|W| <= W_bar``.

    Identity for ``|W| <= (1 - kappa_p) W_bar``; across the boundary layer
    the outward radial part of ``y`` is removed in proportion to depth, fully
    at ``|W| = W_bar``.
    """
    W = np.asarray(W, dtype=float)
    y = np.asarray(y, dtype=float)
    r0 = (1.0 - kappa_p) * W_bar
    nrm2 = W @ W
    depth = (nrm2 - r0 * r0) / (W_bar * W_bar - r0 * r0)
    radial = W @ y
    if depth > 0.0 and radial > 0.0:
        return y - depth * (radial / nrm2) * W
    return y


def actor_derivative(Wa, Wc, eta_a: float, W_bar: float, kappa_p: float = 0.05) -> np.ndarray:
    return project(Wa, -eta_a * (np.asarray(Wa) - np.asarray(Wc)), W_bar, kappa_p)
