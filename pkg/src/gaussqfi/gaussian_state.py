r"""Two-mode Gaussian states and the lossy symmetric interferometer.

States are stored by their first moments ``d = <u>`` and covariance matrix

.. math::

    \Sigma_{ij} = \langle \{ u_i - \langle u_i\rangle, (u_j - \langle u_j\rangle)^\dagger \} \rangle

in the complex ordering ``u = (a, b, a^\dagger, b^\dagger)``, so that the vacuum has
``d = 0`` and ``Sigma = 1``. Every channel acts linearly on ``u`` and is applied as
``d -> M d`` together with the congruence ``Sigma -> M Sigma M^\dagger`` (plus the
vacuum-noise term for loss).

The interferometer is: product input -> 50:50 beam splitter -> loss in each arm ->
phase ``+phi/2`` on arm a and ``-phi/2`` on arm b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InvalidParameter, InvalidState

K = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
IDENTITY = np.eye(4, dtype=complex)

HERMITICITY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9

# Heisenberg map of the beam splitter exp(-i pi/4 (a^dag b + a b^dag)):
# a -> (a - i b)/sqrt2, b -> (b - i a)/sqrt2.
_BS_MODES = np.array([[1.0, -1.0j], [-1.0j, 1.0]]) / math.sqrt(2.0)
BEAM_SPLITTER = np.block(
    [[_BS_MODES, np.zeros((2, 2))], [np.zeros((2, 2)), _BS_MODES.conj()]]
)

# d/dphi of the phase map diag(e^{i phi/2}, e^{-i phi/2}, e^{-i phi/2}, e^{i phi/2}).
PHASE_GENERATOR = np.diag([0.5j, -0.5j, -0.5j, 0.5j])

MOMENT_NAMES = ("a", "a2", "ada", "b", "b2", "bdb", "ab", "abd")

_TWO_PI = 2.0 * math.pi


def _wrap(angle: float) -> float:
    return float(np.mod(angle, _TWO_PI))


@dataclass(frozen=True)
class ProductStateParams:
    """Parameters of ``R(omega) D(alpha) S(xi)|0>`` on each of the two input modes.

    ``alpha = alpha_abs * exp(i beta)`` and ``xi = r * exp(i theta)``.
    """

    omega_a: float = 0.0
    alpha_abs_a: float = 0.0
    beta_a: float = 0.0
    r_a: float = 0.0
    theta_a: float = 0.0
    omega_b: float = 0.0
    alpha_abs_b: float = 0.0
    beta_b: float = 0.0
    r_b: float = 0.0
    theta_b: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise InvalidParameter(f"{f.name} must be finite, got {value!r}")
        for name in ("alpha_abs_a", "alpha_abs_b", "r_a", "r_b"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} is a magnitude and must be >= 0")

    @classmethod
    def dsv(cls, r: float | None = None, *, n_bar: float | None = None) -> "ProductStateParams":
        """Dual squeezed vacuum ``|r> (x) |-r>``, given either ``r`` or the total mean photon number."""
        if (r is None) == (n_bar is None):
            raise InvalidParameter("give exactly one of r or n_bar")
        if n_bar is not None:
            if n_bar < 0:
                raise InvalidParameter("n_bar must be >= 0")
            r = math.asinh(math.sqrt(n_bar / 2.0))
        return cls(r_a=r, r_b=r, theta_a=0.0, theta_b=math.pi)

    @classmethod
    def dsdv(cls, alpha: float, r: float) -> "ProductStateParams":
        """Dual squeezed displaced vacuum ``|i alpha, r> (x) |alpha, -r>``."""
        return cls(
            alpha_abs_a=alpha, beta_a=math.pi / 2, r_a=r, theta_a=0.0,
            alpha_abs_b=alpha, beta_b=0.0, r_b=r, theta_b=math.pi,
        )

    def canonical(self) -> "ProductStateParams":
        """Copy with every phase reduced to ``[0, 2 pi)``; used for equality tests."""
        return replace(
            self,
            omega_a=_wrap(self.omega_a), beta_a=_wrap(self.beta_a), theta_a=_wrap(self.theta_a),
            omega_b=_wrap(self.omega_b), beta_b=_wrap(self.beta_b), theta_b=_wrap(self.theta_b),
        )

    def mode(self, which: str) -> tuple[float, float, float, float, float]:
        """``(omega, |alpha|, beta, r, theta)`` of mode ``'a'`` or ``'b'``."""
        if which not in ("a", "b"):
            raise InvalidParameter(f"unknown mode {which!r}")
        return tuple(
            getattr(self, f"{name}_{which}")
            for name in ("omega", "alpha_abs", "beta", "r", "theta")
        )


@dataclass(frozen=True)
class ChannelConfig:
    """Transmissivities of the two arms and the interferometer phase."""

    eta_a: float = 1.0
    eta_b: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("eta_a", "eta_b", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameter(f"{name} must be finite")
        _check_eta(self.eta_a, "eta_a")
        _check_eta(self.eta_b, "eta_b")

    @classmethod
    def symmetric(cls, eta: float, phi: float = 0.0) -> "ChannelConfig":
        return cls(eta_a=eta, eta_b=eta, phi=phi)

    @property
    def is_symmetric(self) -> bool:
        return self.eta_a == self.eta_b

    @property
    def eta(self) -> float:
        """Single transmissivity; the arithmetic mean when the arms differ."""
        return 0.5 * (self.eta_a + self.eta_b)


def _check_eta(eta: float, name: str = "eta") -> None:
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameter(f"{name} must lie in [0, 1], got {eta!r}")


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First moments ``d`` (length 4) and covariance ``sigma`` (4x4), both complex."""

    d: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=complex)
        sigma = np.asarray(self.sigma, dtype=complex)
        if d.shape != (4,) or sigma.shape != (4, 4):
            raise InvalidState(
                f"expected d of shape (4,) and sigma of shape (4, 4), got {d.shape} and {sigma.shape}"
            )
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def vacuum(cls) -> "GaussianState":
        return cls(np.zeros(4, dtype=complex), IDENTITY.copy())

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.sigma - self.sigma.conj().T)))

    def validate(self) -> "GaussianState":
        """Check Hermiticity, the ``d[2:] = conj(d[:2])`` structure and physicality.

        Returns ``self`` so calls can be chained.
        """
        herm = self.hermiticity_error()
        if herm > HERMITICITY_TOL:
            raise InvalidState(f"covariance matrix not Hermitian (max deviation {herm:.3e})")
        conj = float(np.max(np.abs(self.d[2:] - self.d[:2].conj())))
        if conj > HERMITICITY_TOL * max(1.0, float(np.max(np.abs(self.d)))):
            raise InvalidState(f"first moments violate d[2:] = conj(d[:2]) (deviation {conj:.3e})")
        symplectic_eigenvalues(self)
        return self

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.d, other.d, rtol=0, atol=atol)
            and np.allclose(self.sigma, other.sigma, rtol=0, atol=atol)
        )


def _single_mode(omega: float, alpha_abs: float, beta: float, r: float, theta: float):
    mean = np.exp(1j * omega) * alpha_abs * np.exp(1j * beta)
    # <{da, da^dag}> and <{da, da}> of R D S|0>; rotation acts last.
    anti_diag = math.cosh(2 * r)
    pair = -np.exp(1j * (theta + 2 * omega)) * math.sinh(2 * r)
    return mean, anti_diag, pair


def build_input_state(params: ProductStateParams) -> GaussianState:
    """Moments of ``R_a D_a S_a|0> (x) R_b D_b S_b|0>``."""
    da, na, ma = _single_mode(*params.mode("a"))
    db, nb, mb = _single_mode(*params.mode("b"))
    d = np.array([da, db, np.conj(da), np.conj(db)])
    sigma = np.diag([na, nb, na, nb]).astype(complex)
    sigma[0, 2], sigma[2, 0] = ma, np.conj(ma)
    sigma[1, 3], sigma[3, 1] = mb, np.conj(mb)
    return GaussianState(d, sigma)


def _linear_map(state: GaussianState, m: np.ndarray) -> GaussianState:
    return GaussianState(m @ state.d, m @ state.sigma @ m.conj().T)


def apply_beam_splitter(state: GaussianState) -> GaussianState:
    """50:50 beam splitter, ``a -> (a - i b)/sqrt2`` and ``b -> (b - i a)/sqrt2``."""
    return _linear_map(state, BEAM_SPLITTER)


def apply_loss(state: GaussianState, eta_a: float, eta_b: float) -> GaussianState:
    """Pure-loss channel with transmissivity ``eta_a`` on arm a and ``eta_b`` on arm b.

    Means scale by ``sqrt(eta)`` and second moments by the product of the two
    amplitude factors; the lost fraction is replaced by vacuum noise.
    """
    _check_eta(eta_a, "eta_a")
    _check_eta(eta_b, "eta_b")
    e = np.sqrt(np.array([eta_a, eta_b, eta_a, eta_b]))
    sigma = e[:, None] * state.sigma * e[None, :] + np.diag(1.0 - e**2)
    return GaussianState(e * state.d, sigma)


def phase_matrix(phi: float) -> np.ndarray:
    return np.diag(np.exp(1j * phi / 2 * np.array([1.0, -1.0, -1.0, 1.0])))


def apply_phase(state: GaussianState, phi: float) -> GaussianState:
    """Symmetric phase shift ``R_a(phi/2) R_b(-phi/2)``: ``a -> e^{i phi/2} a``, ``b -> e^{-i phi/2} b``.

    At ``phi = 2 pi`` the covariance is unchanged while ``d[0]`` and ``d[1]`` flip sign.
    """
    return _linear_map(state, phase_matrix(phi))


def interferometer_output(params: ProductStateParams, cfg: ChannelConfig) -> GaussianState:
    state = build_input_state(params)
    state = apply_beam_splitter(state)
    state = apply_loss(state, cfg.eta_a, cfg.eta_b)
    return apply_phase(state, cfg.phi)


def phase_derivative(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``d/dphi`` of a state whose last operation is ``apply_phase``.

    With ``P(phi) = exp(phi G)`` for the diagonal anti-Hermitian ``G``, ``d' = G d``
    and ``Sigma' = G Sigma - Sigma G``.
    """
    g = PHASE_GENERATOR
    return g @ state.d, g @ state.sigma - state.sigma @ g


def state_derivative(params: ProductStateParams, cfg: ChannelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Analytic phi-derivative ``(d_dot, sigma_dot)`` of the interferometer output."""
    return phase_derivative(interferometer_output(params, cfg))


def symplectic_eigenvalues(state: GaussianState) -> tuple[float, float]:
    r"""Symplectic eigenvalues ``tau_1 >= tau_2`` of ``Sigma`` from ``A = K Sigma``.

    .. math::

        \tau_{1,2} = \tfrac12 \sqrt{\mathrm{tr}A^2 \pm \sqrt{(\mathrm{tr}A^2)^2 - 16|A|}}

    The discriminant ``(tr A^2)^2 - 16|A|`` equals ``4 tr(B^2)`` with
    ``B = A^2 - (tr A^2 / 4) 1``; the second form is used because the first loses
    half the significant digits when the two eigenvalues are (nearly) degenerate.
    For the same reason ``tau_2`` is taken from ``tau_1^2 tau_2^2 = |A|``.

    Raises :class:`InvalidState` when either value falls below ``1 - tol`` with
    ``tol = max(1e-9, 64 eps ||Sigma||^2)``; ``tr A^2`` is a sum of products of
    entries of size ``||Sigma||``, so its rounding grows with their square.
    """
    a = K @ state.sigma
    a2 = a @ a
    tr_a2 = float(np.trace(a2).real)
    det_a = float(np.linalg.det(a).real)
    b = a2 - (tr_a2 / 4.0) * IDENTITY
    disc = 4.0 * float(np.trace(b @ b).real)
    if disc < 0:
        if disc < -1e-9 * max(1.0, tr_a2**2):
            raise InvalidState(f"negative discriminant {disc:.3e} in symplectic spectrum")
        disc = 0.0
    big = tr_a2 + math.sqrt(disc)
    if big <= 0 or det_a < 0:
        raise InvalidState(f"covariance has no positive symplectic spectrum (tr A^2 = {tr_a2:.3e}, |A| = {det_a:.3e})")
    tau_1 = 0.5 * math.sqrt(big)
    tau_2 = math.sqrt(det_a) / tau_1
    taus = [tau_1, tau_2]
    scale = float(np.max(np.abs(state.sigma)))
    tol = max(PHYSICALITY_TOL, 64 * np.finfo(float).eps * scale * scale)
    for i, tau in enumerate(taus, start=1):
        if tau < 1.0 - tol:
            raise InvalidState(f"unphysical covariance: tau_{i} = {tau:.12g} < 1")
    return taus[0], taus[1]


def symplectic_eigenvalues_closed_form(r_a: float, r_b: float, eta: float) -> tuple[float, float]:
    """Symplectic eigenvalues of the symmetric lossy interferometer output, sorted descending.

    Each depends on a single squeezing parameter:
    ``tau = sqrt(1 + 2 eta (1 - eta) (cosh 2r - 1))``.
    """
    _check_eta(eta)
    t = [math.sqrt(1.0 + 2.0 * eta * (1.0 - eta) * (math.cosh(2 * r) - 1.0)) for r in (r_a, r_b)]
    return max(t), min(t)


def mean_photon_input(params: ProductStateParams) -> float:
    """Total mean photon number ``|alpha_a|^2 + sinh^2 r_a + |alpha_b|^2 + sinh^2 r_b``."""
    return (
        params.alpha_abs_a**2 + math.sinh(params.r_a) ** 2
        + params.alpha_abs_b**2 + math.sinh(params.r_b) ** 2
    )


def moments_from_state(state: GaussianState) -> dict[str, complex]:
    """Raw moments ``<a>, <a^2>, <a^dag a>, ...`` recovered from ``(d, Sigma)``."""
    d, s = state.d, state.sigma
    return {
        "a": d[0],
        "a2": s[0, 2] / 2 + d[0] ** 2,
        "ada": (s[0, 0].real - 1) / 2 + abs(d[0]) ** 2,
        "b": d[1],
        "b2": s[1, 3] / 2 + d[1] ** 2,
        "bdb": (s[1, 1].real - 1) / 2 + abs(d[1]) ** 2,
        "ab": s[0, 3] / 2 + d[0] * d[1],
        "abd": s[0, 1] / 2 + d[0] * np.conj(d[1]),
    }


def closed_form_moments(params: ProductStateParams, cfg: ChannelConfig) -> dict[str, complex]:
    """Output moments written out explicitly in terms of the ten input parameters.

    This is an independent route to :func:`moments_from_state` applied to
    :func:`interferometer_output`; it never touches a matrix.
    """
    wa, aa, ba, ra, ta = params.mode("a")
    wb, ab, bb, rb, tb = params.mode("b")
    ea, eb, phi = cfg.eta_a, cfg.eta_b, cfg.phi
    alpha_a = np.exp(1j * (ba + wa)) * aa
    alpha_b = np.exp(1j * (bb + wb)) * ab
    sq_a = np.exp(1j * (ta + 2 * wa)) * math.cosh(ra) * math.sinh(ra)
    sq_b = np.exp(1j * (tb + 2 * wb)) * math.cosh(rb) * math.sinh(rb)
    n_sum = aa**2 + ab**2 + math.sinh(ra) ** 2 + math.sinh(rb) ** 2
    cross = 2 * aa * ab * math.sin(ba - bb + wa - wb)
    return {
        "a": np.exp(0.5j * phi) * math.sqrt(ea) * (alpha_a - 1j * alpha_b) / math.sqrt(2),
        "a2": 0.5 * np.exp(1j * phi) * ea * ((alpha_a - 1j * alpha_b) ** 2 - sq_a + sq_b),
        "ada": 0.5 * ea * (n_sum - cross),
        "b": np.exp(-0.5j * phi) * math.sqrt(eb) * (alpha_b - 1j * alpha_a) / math.sqrt(2),
        "b2": 0.5 * np.exp(-1j * phi) * eb * ((alpha_b - 1j * alpha_a) ** 2 + sq_a - sq_b),
        "bdb": 0.5 * eb * (n_sum + cross),
        "ab": -0.5j * math.sqrt(ea * eb) * (alpha_a**2 + alpha_b**2 - sq_a - sq_b),
        "abd": 0.5j * np.exp(1j * phi) * math.sqrt(ea * eb) * (
            aa**2 - ab**2 + math.sinh(ra) ** 2 - math.sinh(rb) ** 2
            - 2j * aa * ab * math.cos(ba - bb + wa - wb)
        ),
    }


def pqrs(params: ProductStateParams, eta: float, phi: float) -> tuple[float, complex, complex, complex]:
    """The four scalars that fill the symmetric-loss covariance matrix."""
    wa, _, _, ra, ta = params.mode("a")
    wb, _, _, rb, tb = params.mode("b")
    ch_a, ch_b = math.cosh(2 * ra), math.cosh(2 * rb)
    za = np.exp(1j * (ta + 2 * wa)) * math.sinh(2 * ra)
    zb = np.exp(1j * (tb + 2 * wb)) * math.sinh(2 * rb)
    p = 2 * (1 - eta) + eta * (ch_a + ch_b)
    q = 1j * eta * np.exp(1j * phi) * (ch_a - ch_b)
    r = eta * (za - zb)
    s = 1j * eta * (za + zb)
    return p, q, r, s


def closed_form_covariance(params: ProductStateParams, eta: float, phi: float) -> np.ndarray:
    """Covariance of the symmetric-loss output assembled from P, Q, R, S (with the overall 1/2)."""
    _check_eta(eta)
    p, q, r, s = pqrs(params, eta, phi)
    e = np.exp(1j * phi)
    c = np.conj
    m = np.array([
        [p, q, -e * r, s],
        [c(q), p, s, c(e) * r],
        [-c(e) * c(r), c(s), p, c(q)],
        [c(s), e * c(r), q, p],
    ])
    return 0.5 * m
