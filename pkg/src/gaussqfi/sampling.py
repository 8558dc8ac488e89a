"""Random parameter points for cross-checks and property tests."""

from __future__ import annotations

import math

import numpy as np

from .gaussian_state import ProductStateParams, mean_photon_input


def random_params(
    rng: np.random.Generator, max_r: float = 1.0, max_alpha: float = 2.0, max_n_bar: float | None = None
) -> ProductStateParams:
    """Uniform magnitudes and phases; resampled until the mean photon number is at most ``max_n_bar``."""
    while True:
        ra, rb = rng.uniform(0.0, max_r, 2)
        aa, ab = rng.uniform(0.0, max_alpha, 2)
        phases = rng.uniform(0.0, 2 * math.pi, 6)
        p = ProductStateParams(
            omega_a=phases[0], alpha_abs_a=aa, beta_a=phases[1], r_a=ra, theta_a=phases[2],
            omega_b=phases[3], alpha_abs_b=ab, beta_b=phases[4], r_b=rb, theta_b=phases[5],
        )
        if max_n_bar is None or mean_photon_input(p) <= max_n_bar:
            return p


def random_optimal_params(
    rng: np.random.Generator, max_r: float = 1.5, max_alpha: float = 3.0
) -> ProductStateParams:
    """Random magnitudes with a random member of the family of QFI-maximising phases.

    ``omega_a``, ``omega_b`` and ``beta_a`` are free; the rest follow from
    ``theta_b = 2(beta_a + omega_a - omega_b)``,
    ``theta_a = theta_b - 2 omega_a + 2 omega_b + pi`` and
    ``beta_b = theta_a / 2 + omega_a - omega_b``.
    """
    ra, rb = rng.uniform(0.0, max_r, 2)
    aa, ab = rng.uniform(0.0, max_alpha, 2)
    wa, wb, ba = rng.uniform(0.0, 2 * math.pi, 3)
    tb = 2 * (ba + wa - wb)
    ta = tb - 2 * wa + 2 * wb + math.pi
    bb = ta / 2 + wa - wb
    return ProductStateParams(
        omega_a=wa, alpha_abs_a=aa, beta_a=ba, r_a=ra, theta_a=ta,
        omega_b=wb, alpha_abs_b=ab, beta_b=bb, r_b=rb, theta_b=tb,
    )
