"""Fixed mean photon number does not bound the variance of the phase generator.

Two-mode pure states are written as ``sum_{N,n} C_{N,n} |n1, n2>`` with total photon
number ``N = n1 + n2`` and difference ``n = n1 - n2``. The generator
``H = (a^dag a - b^dag b)/2`` acts as ``n/2``, so its variance depends only on the
weights ``|C_{N,n}|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import InvalidParameter

NORM_TOL = 1e-12


@dataclass(frozen=True)
class TotalPhotonDistribution:
    """Probabilities ``p_N`` of finding ``N`` photons in total, on a finite support."""

    probs: Mapping[int, float]

    def __post_init__(self):
        clean = {}
        for n_total, p in self.probs.items():
            if int(n_total) != n_total or n_total < 0:
                raise InvalidParameter(f"photon number {n_total!r} is not a non-negative integer")
            if not math.isfinite(p) or p < 0:
                raise InvalidParameter(f"p_{n_total} = {p!r} is not a probability")
            if p > 0:
                clean[int(n_total)] = float(p)
        total = math.fsum(clean.values())
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidParameter(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", dict(sorted(clean.items())))

    def mean_photon(self) -> float:
        return math.fsum(n * p for n, p in self.probs.items())

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.probs)


@dataclass(frozen=True)
class TwoModeCoefficients:
    """Amplitudes ``C_{N,n}`` keyed by ``(N, n)``; absent keys are zero."""

    amplitudes: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (n_total, n), c in self.amplitudes.items():
            if n_total < 0 or abs(n) > n_total or (n_total - n) % 2:
                raise InvalidParameter(f"(N, n) = {(n_total, n)} does not describe photon occupations")
            if c != 0:
                clean[(int(n_total), int(n))] = complex(c)
        norm = math.fsum(abs(c) ** 2 for c in clean.values())
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidParameter(f"coefficients have norm^2 {norm!r}, not 1")
        object.__setattr__(self, "amplitudes", dict(sorted(clean.items())))

    def weights(self) -> dict[tuple[int, int], float]:
        return {key: abs(c) ** 2 for key, c in self.amplitudes.items()}

    def total_photon_distribution(self) -> TotalPhotonDistribution:
        probs: dict[int, float] = {}
        for (n_total, _), w in self.weights().items():
            probs[n_total] = probs.get(n_total, 0.0) + w
        return TotalPhotonDistribution(probs)

    def max_photons(self) -> int:
        return max((n_total for n_total, _ in self.amplitudes), default=0)

    def to_fock_vector(self, cutoff: int) -> np.ndarray:
        """State vector on ``{|n1, n2> : n1, n2 <= cutoff}``, flattened as ``n1 * (cutoff+1) + n2``."""
        if cutoff < self.max_photons():
            raise InvalidParameter(f"cutoff {cutoff} below the largest photon number {self.max_photons()}")
        psi = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        for (n_total, n), c in self.amplitudes.items():
            psi[(n_total + n) // 2, (n_total - n) // 2] = c
        return psi.ravel()


def max_variance_coeffs(dist: TotalPhotonDistribution) -> TwoModeCoefficients:
    """Put half of each ``p_N`` on ``|N, 0>`` and half on ``|0, N>``.

    For ``N = 0`` both coincide and the whole weight sits on the vacuum.
    """
    amps: dict[tuple[int, int], complex] = {}
    for n_total, p in dist.probs.items():
        if n_total == 0:
            amps[(0, 0)] = math.sqrt(p)
        else:
            amps[(n_total, n_total)] = math.sqrt(p / 2)
            amps[(n_total, -n_total)] = math.sqrt(p / 2)
    return TwoModeCoefficients(amps)


def variance_h(coeffs: TwoModeCoefficients) -> float:
    """``<H^2> - <H>^2 = (1/4) sum |C|^2 n^2 - ((1/2) sum |C|^2 n)^2``."""
    w = coeffs.weights()
    second = math.fsum(p * n * n for (_, n), p in w.items()) / 4.0
    first = math.fsum(p * n for (_, n), p in w.items()) / 2.0
    return max(second - first * first, 0.0)


def _variance_from_weights(blocks: list[np.ndarray], n_vals: list[np.ndarray]) -> np.ndarray:
    first = sum(w @ n for w, n in zip(blocks, n_vals)) / 2.0
    second = sum(w @ n**2 for w, n in zip(blocks, n_vals)) / 4.0
    return second - first**2


def brute_force_max_variance(
    dist: TotalPhotonDistribution, samples: int = 50_000, ascent_starts: int = 10, seed: int = 0
) -> float:
    """Largest generator variance found by searching weight assignments consistent with ``dist``.

    Sector ``N`` spreads ``p_N`` over ``n in {-N, -N+2, ..., N}``. Candidates come
    from Dirichlet sampling of every sector jointly, followed by Frank-Wolfe ascent
    from the best samples (the variance is concave in the weights). Intended for
    small supports such as ``N <= 3``; it never consults the analytic maximiser.
    """
    rng = np.random.default_rng(seed)
    sectors = list(dist.probs.items())
    n_vals = [np.arange(-n, n + 1, 2, dtype=float) for n, _ in sectors]
    blocks = [
        p * rng.dirichlet(np.full(len(nv), 0.3), size=samples) for (_, p), nv in zip(sectors, n_vals)
    ]
    variances = _variance_from_weights(blocks, n_vals)
    best = float(variances.max())
    for idx in np.argsort(variances)[-ascent_starts:]:
        w = [b[idx].copy() for b in blocks]
        for step in range(300):
            mean = sum(wi @ nv for wi, nv in zip(w, n_vals)) / 2.0
            gamma = 2.0 / (step + 2.0)
            for i, ((_, p), nv) in enumerate(zip(sectors, n_vals)):
                grad = nv**2 / 4.0 - mean * nv
                target = np.zeros_like(nv)
                target[np.argmax(grad)] = p
                w[i] = (1 - gamma) * w[i] + gamma * target
        best = max(best, float(_variance_from_weights(w, n_vals)))
    return best


class UnboundedDemo(NamedTuple):
    distribution: TotalPhotonDistribution
    delta_h: float

    @property
    def n_max(self) -> int:
        return max(self.distribution.support)

    @property
    def mean(self) -> float:
        return self.distribution.mean_photon()


def demo_photon_number(n_bar: float, kappa: float) -> int:
    """Smallest ``N >= n_bar`` with ``sqrt(n_bar N)/2 >= kappa``."""
    target = 4.0 * kappa * kappa / n_bar
    n = math.ceil(target)
    # guard against ceil(400.00000000000006) = 401
    if n - 1 >= 1 and math.sqrt(n_bar * (n - 1)) / 2.0 >= kappa:
        n -= 1
    return max(n, math.ceil(n_bar), 1)


def unbounded_demo(n_bar: float, kappa: float) -> UnboundedDemo:
    """Two-point distribution with mean ``n_bar`` whose maximal generator spread reaches ``kappa``.

    ``p_0 = 1 - n_bar/N`` and ``p_N = n_bar/N``; the maximal-variance state then has
    ``Delta H = sqrt(n_bar N)/2``.
    """
    for name, v in (("n_bar", n_bar), ("kappa", kappa)):
        if not math.isfinite(v) or v <= 0:
            raise InvalidParameter(f"{name} must be positive and finite, got {v!r}")
    n = demo_photon_number(n_bar, kappa)
    p_n = n_bar / n
    probs = {n: p_n} if p_n == 1.0 else {0: 1.0 - p_n, n: p_n}
    dist = TotalPhotonDistribution(probs)
    return UnboundedDemo(dist, math.sqrt(variance_h(max_variance_coeffs(dist))))
