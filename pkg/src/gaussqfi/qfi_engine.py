"""Quantum Fisher information of the interferometer output by several independent routes.

* :func:`qfi_general` evaluates the covariance-matrix formula for any two-mode
  Gaussian family given ``(Sigma, Sigma_dot, d, d_dot)``.
* :func:`qfi_fidelity_limit` differentiates the Gaussian fidelity numerically.
* :func:`qfi_closed_form` is the maximised expression in terms of ``r_a, r_b,
  |alpha_a|, |alpha_b|, eta``.
* :func:`qfi_dsv` and :func:`qfi_dsdv` are its two special cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConvergenceFailure,
    InvalidParameter,
    InvalidState,
    NonOptimalPhases,
    NumericalInconsistency,
)
from .gaussian_state import (
    IDENTITY,
    K,
    ChannelConfig,
    GaussianState,
    ProductStateParams,
    _check_eta,
    interferometer_output,
    mean_photon_input,
    state_derivative,
    symplectic_eigenvalues,
)

CONDITION_LIMIT = 1e12
NEAR_PURE_TOL = 1e-6
REGULARIZATION_STEP = 3e-2
REGULARIZATION_POINTS = 5
DEFAULT_EPSILON = 1e-3
RATIO_TEST = 0.25
PHASE_TOL = 1e-9
TAU_TERM_TOL = 1e-12
PURE_DET_TOL = 1e-12


@dataclass(frozen=True)
class QfiBreakdown:
    i_total: float
    i_matrix_part: float
    i_displacement_part: float
    tau_1: float
    tau_2: float
    tau_term: float = 0.0
    regularized: bool = False


@dataclass(frozen=True)
class PrecisionReport:
    n_bar: float
    qfi: float
    delta_phi_bound: float
    j_ratio: float
    route: str = "general"
    flags: tuple[str, ...] = field(default_factory=tuple)


def _solve(m: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise InvalidState(f"{what} is singular to working precision (condition number {cond:.3e})")
    return np.linalg.solve(m, rhs)


def _rounding_tol(m: np.ndarray) -> float:
    """Relative size of an imaginary part still explained by rounding in solves with ``m``."""
    return max(1e-9, 1e3 * np.finfo(float).eps * float(np.linalg.cond(m)))


def _tau_dots(a, a_dot, tau_1, tau_2, det_a):
    """phi-derivatives of the symplectic eigenvalues, from the trace/determinant formula."""
    tr_a2 = np.trace(a @ a).real
    d_tr = 2.0 * np.trace(a @ a_dot).real
    d_det = det_a * np.trace(np.linalg.solve(a, a_dot)).real
    scale = max(1.0, float(np.abs(a).max() * np.abs(a_dot).max()))
    if abs(d_tr) <= 1e-12 * scale and abs(d_det) <= 1e-12 * scale * max(1.0, abs(det_a)):
        return 0.0, 0.0
    disc = max(tr_a2**2 - 16.0 * det_a, 0.0)
    d_disc = 2.0 * tr_a2 * d_tr - 16.0 * d_det
    split = d_disc / (2.0 * math.sqrt(disc)) if disc > 0 else 0.0
    # tau^2 = (tr A^2 +/- sqrt(disc)) / 4
    return (d_tr + split) / (8.0 * tau_1), (d_tr - split) / (8.0 * tau_2)


def _tau_term(tau_1, tau_2, dot_1, dot_2, tau_denominator):
    def ratio(dot, denom):
        return 0.0 if dot == 0.0 else dot**2 / denom

    if tau_denominator == "symmetric":
        t1 = ratio(dot_1, tau_1**4 - 1.0)
    elif tau_denominator == "printed":
        t1 = ratio(dot_1, tau_1**2 - 1.0)
    else:
        raise InvalidParameter(f"tau_denominator must be 'symmetric' or 'printed', got {tau_denominator!r}")
    t2 = ratio(dot_2, tau_2**4 - 1.0)
    return 4.0 * (tau_1**2 - tau_2**2) * (t2 - t1)


def _is_static(sigma, sigma_dot):
    return not np.any(np.abs(sigma_dot) > 1e-14 * max(1.0, float(np.abs(sigma).max())))


def _matrix_part_terms(sigma, sigma_dot, tau_denominator):
    """Numerator pieces of the covariance part and ``|A|``; the caller divides by ``2(|A|-1)``."""
    a = K @ sigma
    a_dot = K @ sigma_dot
    det_a = float(np.linalg.det(a).real)
    tau_1, tau_2 = symplectic_eigenvalues(GaussianState(np.zeros(4), sigma))
    x = _solve(a, a_dot, "A = K Sigma")
    one_plus = IDENTITY + a @ a
    y = _solve(one_plus, a_dot, "1 + A^2")
    first = det_a * np.trace(x @ x)
    second = math.sqrt(max(float(np.linalg.det(one_plus).real), 0.0)) * np.trace(y @ y)
    dot_1, dot_2 = _tau_dots(a, a_dot, tau_1, tau_2, det_a)
    tau_term = _tau_term(tau_1, tau_2, dot_1, dot_2, tau_denominator)
    numerator = complex(first + second) + tau_term
    if abs(numerator.imag) > 10 * _rounding_tol(a) * max(1.0, abs(numerator.real)):
        raise NumericalInconsistency(f"covariance part has imaginary part {numerator.imag:.3e}")
    return numerator.real, tau_term, det_a


def qfi_general(
    sigma: np.ndarray,
    sigma_dot: np.ndarray,
    d: np.ndarray,
    d_dot: np.ndarray,
    *,
    tau_denominator: str = "symmetric",
) -> QfiBreakdown:
    """QFI of a two-mode Gaussian family from its covariance, means and their derivatives.

    The covariance-matrix part is ``{|A| tr[(A^-1 A')^2] + sqrt|1+A^2| tr[((1+A^2)^-1 A')^2]
    + tau-term} / (2(|A|-1))`` with ``A = K Sigma``; the displacement part is
    ``2 d'^dag Sigma^-1 d'``.

    For (nearly) pure states ``|A| -> 1`` and the matrix part is 0/0. Within
    ``NEAR_PURE_TOL`` the family is pushed through a small uniform loss ``1 - delta``
    (``Sigma -> (1 - delta) Sigma + delta``) at ``REGULARIZATION_POINTS`` halving
    steps starting from ``REGULARIZATION_STEP / max|Sigma|``, and the results are
    Richardson extrapolated to ``delta = 0``. Rounding limits this branch to about
    ``1e-5`` relative once ``Sigma`` has condition number near ``1e9`` (squeezing
    ``r ~ 5``).

    Args:
        sigma: 4x4 covariance matrix.
        sigma_dot: its derivative with respect to the estimated phase.
        d: first moments.
        d_dot: their derivative.
        tau_denominator: ``"symmetric"`` uses ``tau_i^4 - 1`` in both denominators
            of the tau-term; ``"printed"`` uses ``tau_1^2 - 1`` for the second one.
    """
    sigma = np.asarray(sigma, dtype=complex)
    sigma_dot = np.asarray(sigma_dot, dtype=complex)
    d = np.asarray(d, dtype=complex)
    d_dot = np.asarray(d_dot, dtype=complex)
    if sigma.shape != (4, 4) or sigma_dot.shape != (4, 4) or d.shape != (4,) or d_dot.shape != (4,):
        raise InvalidParameter("expected 4x4 covariance arrays and length-4 mean vectors")

    i_disp = 2.0 * np.vdot(d_dot, _solve(sigma, d_dot, "Sigma"))
    if abs(i_disp.imag) > _rounding_tol(sigma) * max(1.0, abs(i_disp.real)):
        raise NumericalInconsistency(f"displacement term has imaginary part {i_disp.imag:.3e}")
    i_disp = float(i_disp.real)

    tau_1, tau_2 = symplectic_eigenvalues(GaussianState(np.zeros(4), sigma))
    det_a = float(np.linalg.det(K @ sigma).real)
    regularized = False
    tau_term = 0.0
    if _is_static(sigma, sigma_dot):
        i_mat = 0.0
    elif abs(det_a - 1.0) < NEAR_PURE_TOL:
        regularized = True
        i_mat = _regularized_matrix_part(sigma, sigma_dot, tau_denominator)
    else:
        numerator, tau_term, det_a = _matrix_part_terms(sigma, sigma_dot, tau_denominator)
        i_mat = numerator / (2.0 * (det_a - 1.0))

    for name, value in (("matrix", i_mat), ("displacement", i_disp)):
        if value < -1e-8 * max(1.0, abs(i_mat) + abs(i_disp)):
            raise NumericalInconsistency(f"negative {name} part of the QFI: {value:.6e}")
    return QfiBreakdown(
        i_total=i_mat + i_disp,
        i_matrix_part=i_mat,
        i_displacement_part=i_disp,
        tau_1=tau_1,
        tau_2=tau_2,
        tau_term=tau_term,
        regularized=regularized,
    )


def _regularized_matrix_part(sigma, sigma_dot, tau_denominator):
    # relative step: the expansion parameter is delta * ||Sigma||, not delta
    scale = max(1.0, float(np.abs(sigma).max()))
    values = []
    for k in range(REGULARIZATION_POINTS):
        delta = REGULARIZATION_STEP * 0.5**k / scale
        s = (1.0 - delta) * sigma + delta * IDENTITY
        numerator, _, det_a = _matrix_part_terms(s, (1.0 - delta) * sigma_dot, tau_denominator)
        if det_a - 1.0 <= 0.0:
            raise NumericalInconsistency(f"regularisation with delta={delta:.3e} left |A| - 1 = {det_a - 1:.3e}")
        values.append(numerator / (2.0 * (det_a - 1.0)))
    # halving steps; each pass removes the next power of delta
    order = 1
    while len(values) > 1:
        values = [(2**order * fine - coarse) / (2**order - 1) for coarse, fine in zip(values, values[1:])]
        order += 1
    return values[0]


def qfi_interferometer(
    params: ProductStateParams, cfg: ChannelConfig, *, tau_denominator: str = "symmetric"
) -> QfiBreakdown:
    """:func:`qfi_general` on the full interferometer with the analytic phase derivative."""
    state = interferometer_output(params, cfg).validate()
    d_dot, sigma_dot = state_derivative(params, cfg)
    result = qfi_general(state.sigma, sigma_dot, state.d, d_dot, tau_denominator=tau_denominator)
    if abs(result.tau_term) >= TAU_TERM_TOL:
        raise NumericalInconsistency(
            f"symplectic eigenvalues should not depend on phi, tau-term = {result.tau_term:.3e}"
        )
    return result


def fidelity_gaussian(state_1: GaussianState, state_2: GaussianState) -> float:
    """Uhlmann fidelity of two two-mode Gaussian states from their moments.

    ``F = 4 exp(-dd^dag (S1+S2)^-1 dd) / (sqrt G + sqrt L - sqrt((sqrt G + sqrt L)^2 - D))``
    with ``D = |S1+S2|``, ``G = |1 + K S1 K S2|``, ``L = |S1+K||S2+K|``.
    When either state is pure (``|Sigma| = 1``) ``L = 0`` and ``G = D`` exactly; the
    denominator then collapses to ``sqrt D`` and is evaluated that way to avoid a
    square root of rounding noise. ``L`` alone vanishes whenever a single symplectic
    eigenvalue is 1, so it cannot serve as the purity test.
    """
    s1, s2 = state_1.sigma, state_2.sigma
    total = s1 + s2
    dd = state_1.d - state_2.d
    quad = np.vdot(dd, _solve(total, dd, "Sigma_1 + Sigma_2")).real
    delta = float(np.linalg.det(total).real)
    gamma = float(np.linalg.det(IDENTITY + K @ s1 @ K @ s2).real)
    lam = float((np.linalg.det(s1 + K) * np.linalg.det(s2 + K)).real)
    if -1e-10 * max(delta, 1.0) < lam < 0:
        lam = 0.0
    if delta <= 0 or gamma < 0 or lam < 0:
        raise InvalidState(f"fidelity determinants out of range: Gamma={gamma:.6e}, Lambda={lam:.6e}, Delta={delta:.6e}")
    pure = min(abs(np.linalg.det(s).real - 1.0) for s in (s1, s2)) < PURE_DET_TOL
    if pure:
        denom = math.sqrt(delta)
    else:
        root = math.sqrt(gamma) + math.sqrt(lam)
        inner = root**2 - delta
        if inner < 0:
            if inner < -1e-10 * delta:
                raise InvalidState(
                    f"negative radicand in fidelity: Gamma={gamma:.6e}, Lambda={lam:.6e}, Delta={delta:.6e}"
                )
            inner = 0.0
        denom = root - math.sqrt(inner)
    value = 4.0 * math.exp(-quad) / denom
    if not 0.0 <= value <= 1.0 + 1e-9:
        raise NumericalInconsistency(
            f"fidelity {value!r} outside [0, 1]: Gamma={gamma:.6e}, Lambda={lam:.6e}, Delta={delta:.6e}"
        )
    return value


def qfi_fidelity_limit(
    params: ProductStateParams, cfg: ChannelConfig, epsilon: float = DEFAULT_EPSILON
) -> float:
    """QFI as ``8 (1 - sqrt F(phi, phi + eps)) / eps^2``, Richardson-extrapolated over eps and eps/2."""
    if not 1e-6 <= epsilon <= 1e-2:
        raise InvalidParameter(f"epsilon must lie in [1e-6, 1e-2], got {epsilon!r}")
    base = interferometer_output(params, cfg)

    def estimate(eps):
        shifted = interferometer_output(params, replace(cfg, phi=cfg.phi + eps))
        return 8.0 * (1.0 - math.sqrt(fidelity_gaussian(base, shifted))) / eps**2

    coarse, fine = estimate(epsilon), estimate(epsilon / 2)
    if abs(fine - coarse) > RATIO_TEST * max(abs(fine), 1e-9):
        raise ConvergenceFailure(
            f"fidelity-limit estimates disagree: {coarse!r} at eps={epsilon}, {fine!r} at eps/2",
            (coarse, fine),
        )
    return (4.0 * fine - coarse) / 3.0


def phase_conditions(params: ProductStateParams) -> tuple[float, float, float]:
    """The three cosines whose extremal values maximise the QFI.

    Returns ``(c1, c2, c3)``; optimal phases have ``c1 = -1``, ``c2 = c3 = 1``.
    """
    p = params
    c1 = math.cos(p.theta_a - p.theta_b + 2 * p.omega_a - 2 * p.omega_b)
    c2 = math.cos(p.theta_b - 2 * (p.beta_a + p.omega_a - p.omega_b))
    c3 = math.cos(p.theta_a - 2 * (p.beta_b - p.omega_a + p.omega_b))
    return c1, c2, c3


def violated_conditions(params: ProductStateParams, tol: float = PHASE_TOL) -> list[str]:
    """Names of binding phase conditions that do not hold.

    A condition only binds when the quantity it multiplies is nonzero: the squeezing
    condition needs both modes squeezed, the displacement ones need the displaced
    mode's partner to be squeezed.
    """
    p = params
    c1, c2, c3 = phase_conditions(p)
    failed = []
    if p.r_a > 0 and p.r_b > 0 and c1 > -1 + tol:
        failed.append(f"cos(theta_a - theta_b + 2 omega_a - 2 omega_b) = {c1:.12g}, needs -1")
    if p.alpha_abs_a > 0 and p.r_b > 0 and c2 < 1 - tol:
        failed.append(f"cos(theta_b - 2(beta_a + omega_a - omega_b)) = {c2:.12g}, needs 1")
    if p.alpha_abs_b > 0 and p.r_a > 0 and c3 < 1 - tol:
        failed.append(f"cos(theta_a - 2(beta_b - omega_a + omega_b)) = {c3:.12g}, needs 1")
    return failed


def optimal_phases(params: ProductStateParams) -> ProductStateParams:
    """Same magnitudes with the representative optimal phases of the DSDV state.

    ``omega_a = omega_b = theta_a = beta_b = 0``, ``theta_b = pi``, ``beta_a = pi/2``.
    """
    return replace(
        params,
        omega_a=0.0, omega_b=0.0, theta_a=0.0, beta_b=0.0,
        theta_b=math.pi, beta_a=math.pi / 2,
    )


def qfi_closed_form(params: ProductStateParams, eta: float) -> float:
    """Maximised QFI for symmetric loss ``eta`` in terms of the input magnitudes only."""
    _check_eta(eta)
    failed = violated_conditions(params)
    if failed:
        raise NonOptimalPhases("phases are not optimal: " + "; ".join(failed))
    ra, rb = params.r_a, params.r_b
    na, nb = params.alpha_abs_a**2, params.alpha_abs_b**2
    # x = cosh(2r) - 1 keeps tiny squeezing and tiny eta free of cancellation
    x_a, x_b, x_d = (2 * math.sinh(v) ** 2 for v in (ra, rb, ra - rb))
    squeeze_num = eta * (x_a + x_b - x_d) + x_d
    squeeze_den = x_a + x_b + 2 * eta * (1 - eta) * x_a * x_b
    if squeeze_den == 0.0 and squeeze_num != 0.0:
        raise NumericalInconsistency("zero denominator with nonzero numerator in squeezing term")
    squeeze = squeeze_num / squeeze_den * math.sinh(ra + rb) ** 2 if squeeze_den != 0.0 else 0.0
    disp_num = math.exp(ra + rb) * (na + nb) - 2 * eta * (
        math.exp(rb) * math.sinh(ra) * na + math.exp(ra) * math.sinh(rb) * nb
    )
    disp_den = (math.cosh(ra) + (1 - 2 * eta) * math.sinh(ra)) * (math.cosh(rb) + (1 - 2 * eta) * math.sinh(rb))
    return eta * (squeeze + disp_num / disp_den)


def qfi_dsv(n_bar: float, eta: float) -> float:
    """``eta^2 N (N + 2) / (1 + (1 - eta) eta N)`` for the dual squeezed vacuum."""
    if n_bar < 0:
        raise InvalidParameter("n_bar must be >= 0")
    _check_eta(eta)
    return eta**2 * n_bar * (n_bar + 2) / (1 + (1 - eta) * eta * n_bar)


def qfi_dsdv(alpha: float, r: float, eta: float) -> float:
    """QFI of the dual squeezed displaced vacuum with amplitude ``alpha`` and squeezing ``r`` per mode."""
    if alpha < 0 or r < 0:
        raise InvalidParameter("alpha and r must be >= 0")
    _check_eta(eta)
    e2r = math.exp(2 * r)
    disp = 2 * e2r * alpha**2 / (eta + e2r * (1 - eta))
    sq = eta * math.sinh(2 * r) ** 2 / (1 + eta * (1 - eta) * (math.cosh(2 * r) - 1))
    return eta * (disp + sq)


def j_ratio(qfi: float, eta: float, n_bar: float) -> float:
    """Gain over coherent light, ``sqrt(I / (eta N))``; NaN when ``eta N = 0``."""
    if eta * n_bar == 0:
        return math.nan
    return math.sqrt(qfi / (eta * n_bar))


def j_dsv(n_bar: float, eta: float) -> float:
    return j_ratio(qfi_dsv(n_bar, eta), eta, n_bar)


def j_dsdv(alpha: float, r: float, eta: float) -> float:
    return j_ratio(qfi_dsdv(alpha, r, eta), eta, 2 * (alpha**2 + math.sinh(r) ** 2))


def delta_phi_bound(qfi: float) -> float:
    """Cramer-Rao bound ``1/sqrt(I)``; infinite when ``I = 0``."""
    return math.inf if qfi <= 0 else 1.0 / math.sqrt(qfi)


def precision_report(params: ProductStateParams, cfg: ChannelConfig) -> PrecisionReport:
    """Mean photon number, QFI, phase bound and gain ratio for one configuration.

    The closed form is used when the arms are balanced and the phases are optimal;
    otherwise the general covariance formula.
    """
    n_bar = mean_photon_input(params)
    if cfg.is_symmetric and not violated_conditions(params):
        qfi, route = qfi_closed_form(params, cfg.eta_a), "closed_form"
    else:
        qfi, route = qfi_interferometer(params, cfg).i_total, "general"
    qfi = max(qfi, 0.0) if qfi > -1e-12 else qfi
    flags = []
    bound = delta_phi_bound(qfi)
    if math.isinf(bound):
        flags.append("ZERO_QFI")
    j = j_ratio(qfi, cfg.eta, n_bar)
    if math.isnan(j):
        flags.append("J_UNDEFINED")
    return PrecisionReport(n_bar=n_bar, qfi=qfi, delta_phi_bound=bound, j_ratio=j, route=route, flags=tuple(flags))
