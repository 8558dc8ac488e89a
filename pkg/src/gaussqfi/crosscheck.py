"""Gaussian-formula versus Fock-simulation comparison over a grid of interferometer configurations."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fock_oracle as fo
from .errors import InvalidParameter
from .gaussian_state import (
    MOMENT_NAMES,
    ChannelConfig,
    ProductStateParams,
    interferometer_output,
    mean_photon_input,
    moments_from_state,
)
from .qfi_engine import fidelity_gaussian, qfi_interferometer
from .sampling import random_params

TOLERANCES = {"moments": 1e-9, "fidelity": 1e-6, "qfi": 1e-4}
MAX_N_BAR = 4.0
FIDELITY_SHIFT = 0.25
# raw moments carry truncation error ~ leakage * cutoff, the spectral quantities ~ leakage * cutoff^2 relative to O(1) values
MOMENT_LEAK_TOL = 1e-12
SPECTRAL_LEAK_TOL = 1e-9


@dataclass(frozen=True)
class OraclePoint:
    label: str
    params: ProductStateParams
    cfg: ChannelConfig


@dataclass(frozen=True)
class GridSpec:
    etas: tuple[float, ...] = (0.5, 0.8, 1.0)
    dsv_n_bars: tuple[float, ...] = (0.5, 2.0, 4.0)
    dsdv_points: tuple[tuple[float, float], ...] = ((1.0, 0.4), (0.6, 0.7))
    random_states: int = 20
    seed: int = 2024
    phi: float = 0.3

    def points(self) -> list[OraclePoint]:
        for eta in self.etas:
            if not 0.0 <= eta <= 1.0:
                raise InvalidParameter(f"eta = {eta!r} outside [0, 1]")
        states: list[tuple[str, ProductStateParams]] = []
        states += [(f"dsv N={n:g}", ProductStateParams.dsv(n_bar=n)) for n in self.dsv_n_bars]
        states += [(f"dsdv alpha={a:g} r={r:g}", ProductStateParams.dsdv(a, r)) for a, r in self.dsdv_points]
        rng = np.random.default_rng(self.seed)
        states += [
            (f"random #{i}", random_params(rng, max_r=0.7, max_alpha=1.3, max_n_bar=MAX_N_BAR))
            for i in range(self.random_states)
        ]
        for label, p in states:
            if mean_photon_input(p) > MAX_N_BAR + 1e-12:
                raise InvalidParameter(f"{label} has mean photon number above {MAX_N_BAR:g}")
        return [
            OraclePoint(f"{label} eta={eta:g}", p, ChannelConfig.symmetric(eta, self.phi))
            for eta in self.etas
            for label, p in states
        ]


@dataclass(frozen=True)
class PointDeviation:
    label: str
    cutoff: int
    qfi_gaussian: float
    qfi_fock: float
    qfi_rel: float
    fidelity_abs: float
    moments_abs: float
    seconds: float


@dataclass
class CrossCheckReport:
    rows: list[PointDeviation] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=lambda: dict(TOLERANCES))

    def max_deviation(self) -> dict[str, float]:
        return {
            "moments": max(r.moments_abs for r in self.rows),
            "fidelity": max(r.fidelity_abs for r in self.rows),
            "qfi": max(r.qfi_rel for r in self.rows),
        }

    def failures(self) -> list[str]:
        worst = self.max_deviation()
        return [k for k, v in worst.items() if not v <= self.tolerances[k]]

    @property
    def passed(self) -> bool:
        return not self.failures()


def compare_point(point: OraclePoint) -> PointDeviation:
    start = time.perf_counter()
    p, cfg = point.params, point.cfg
    rho = fo.output_density_matrix(p, cfg, leak_tol=SPECTRAL_LEAK_TOL)
    fine = fo.output_density_matrix(p, cfg, leak_tol=MOMENT_LEAK_TOL)
    gauss = interferometer_output(p, cfg)

    q_gauss = qfi_interferometer(p, cfg).i_total
    q_fock = fo.qfi_spectral(rho)
    q_rel = abs(q_fock - q_gauss) / q_gauss if q_gauss > 0 else abs(q_fock)

    shifted_cfg = replace(cfg, phi=cfg.phi + FIDELITY_SHIFT)
    f_fock = fo.uhlmann_fidelity(rho, fo.apply_phase_fock(rho, FIDELITY_SHIFT))
    f_gauss = fidelity_gaussian(gauss, interferometer_output(p, shifted_cfg))

    expected = moments_from_state(gauss)
    m_abs = max(abs(fo.moment(fine, k) - expected[k]) for k in MOMENT_NAMES)
    return PointDeviation(
        point.label, fine.cutoff, q_gauss, q_fock, q_rel, abs(f_fock - f_gauss), m_abs,
        time.perf_counter() - start,
    )


def run_crosscheck(points: list[OraclePoint]) -> CrossCheckReport:
    if not points:
        raise InvalidParameter("empty grid")
    return CrossCheckReport([compare_point(pt) for pt in points])


def format_report(report: CrossCheckReport, verbose: bool = False) -> str:
    lines = []
    if verbose:
        lines.append(f"{'point':32s} {'cutoff':>6s} {'qfi_rel':>10s} {'fid_abs':>10s} {'mom_abs':>10s} {'sec':>6s}")
        for r in report.rows:
            lines.append(
                f"{r.label:32s} {r.cutoff:6d} {r.qfi_rel:10.2e} {r.fidelity_abs:10.2e} {r.moments_abs:10.2e} {r.seconds:6.2f}"
            )
    worst = report.max_deviation()
    lines.append(f"{'category':10s} {'max_dev':>10s} {'tol':>8s}  status")
    for k, v in worst.items():
        tol = report.tolerances[k]
        status = "pass" if v <= tol else "FAIL"
        lines.append(f"{k:10s} {v:10.3e} {tol:8.0e}  {status}")
    lines.append(f"points: {len(report.rows)}")
    return "\n".join(lines)

