"""Brute-force Fock-space simulation of the lossy interferometer.

Nothing here uses covariance matrices. States live on the truncated two-mode space
``{|n1, n2> : n1, n2 <= cutoff}``, flattened in C order (index ``n1 * (cutoff + 1) + n2``).

The output of the lossy interferometer is mixed, and at the cutoffs needed for
tight comparisons its dense density matrix is large. It is therefore kept as a
factor ``W`` with ``rho = W W^dag``: one column per Kraus branch (photons lost
from each arm) that carries non-negligible weight. Eigen-decompositions go
through the small Gram matrix ``W^dag W`` and fidelities through the singular
values of ``W_1^dag W_2``. A dense ``rho`` is formed only on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.stats import binom

from .errors import InvalidParameter, TruncationError
from .gaussian_state import ChannelConfig, ProductStateParams, _check_eta

INPUT_LEAK_LIMIT = 1e-8
DEFAULT_LEAK_TOL = 1e-12
BRANCH_DROP_BUDGET = 1e-14
SUPPORT_TOL = 1e-14
PAIR_TOL = 1e-12
EIGEN_CLAMP = 1e-14
MIN_PAD = 40


def cutoff_rule(n_mode: float) -> int:
    """Starting per-mode cutoff ``max(16, ceil(n + 6 sqrt(n + 1)))`` for a mode with mean photon number ``n``."""
    return max(16, math.ceil(n_mode + 6.0 * math.sqrt(n_mode + 1.0)))


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)


def single_mode_state(
    omega: float, alpha_abs: float, beta: float, r: float, theta: float, size: int
) -> np.ndarray:
    """``R(omega) D(alpha) S(xi)|0>`` on the first ``size`` Fock states, by exponentiating truncated generators.

    The generators are anti-Hermitian on the truncated space, so the result has unit
    norm there; only amplitudes far below the top of the space are reliable.
    """
    a = annihilation(size - 1)
    ad = a.conj().T
    xi = r * np.exp(1j * theta)
    alpha = alpha_abs * np.exp(1j * beta)
    vec = np.zeros(size, dtype=complex)
    vec[0] = 1.0
    if r:
        vec = scipy.linalg.expm(0.5 * (np.conj(xi) * (a @ a) - xi * (ad @ ad))) @ vec
    if alpha_abs:
        vec = scipy.linalg.expm(alpha * ad - np.conj(alpha) * a) @ vec
    return np.exp(1j * omega * np.arange(size)) * vec


def _tail(vec: np.ndarray) -> np.ndarray:
    """``tail[c]`` is the norm^2 carried by Fock states above ``c``."""
    p = np.abs(vec) ** 2
    return np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])


def _mode_vector(params: ProductStateParams, which: str, cutoff: int | None, leak_tol: float):
    """Single-mode vector truncated to the requested (or smallest adequate) cutoff, plus its leakage."""
    omega, alpha_abs, beta, r, theta = params.mode(which)
    n_mode = alpha_abs**2 + math.sinh(r) ** 2
    start = cutoff if cutoff is not None else cutoff_rule(n_mode)
    size = 2 * start + MIN_PAD
    while True:
        vec = single_mode_state(omega, alpha_abs, beta, r, theta, size)
        tail = _tail(vec)
        if cutoff is not None:
            return vec[: cutoff + 1], float(tail[cutoff])
        ok = np.nonzero(tail[: size - MIN_PAD] < leak_tol)[0]
        ok = ok[ok >= start]
        if ok.size:
            c = int(ok[0])
            return vec[: c + 1], float(tail[c])
        size *= 2


class FockStateVector(NamedTuple):
    psi: np.ndarray
    cutoff: int
    leakage: float


def build_fock_input(
    params: ProductStateParams,
    cutoff: int | None = None,
    *,
    leak_limit: float = INPUT_LEAK_LIMIT,
    leak_tol: float = DEFAULT_LEAK_TOL,
) -> FockStateVector:
    """Product input state ``R D S|0> (x) R D S|0>`` on a common per-mode cutoff.

    With ``cutoff=None`` the cutoff starts from :func:`cutoff_rule` and grows until
    each mode discards less than ``leak_tol`` of its norm. An explicit cutoff that
    discards more than ``leak_limit`` raises :class:`TruncationError`.
    """
    if cutoff is not None and cutoff < 1:
        raise InvalidParameter("cutoff must be >= 1")
    va, la = _mode_vector(params, "a", cutoff, leak_tol)
    vb, lb = _mode_vector(params, "b", cutoff, leak_tol)
    for name, leak in (("a", la), ("b", lb)):
        if leak > leak_limit:
            raise TruncationError(
                f"mode {name} loses {leak:.3e} of its norm at cutoff {cutoff}; use a larger cutoff"
            )
    c = max(len(va), len(vb)) - 1
    va = np.pad(va, (0, c + 1 - len(va)))
    vb = np.pad(vb, (0, c + 1 - len(vb)))
    psi = np.outer(va, vb)
    return FockStateVector(psi.ravel(), c, float(1.0 - np.vdot(psi, psi).real))


@lru_cache(maxsize=None)
def _beam_splitter_block(n_total: int) -> np.ndarray:
    """``exp(-i pi/4 (a^dag b + a b^dag))`` on the span of ``|k, n_total - k>``, k = 0..n_total."""
    k = np.arange(n_total)
    off = np.sqrt((k + 1.0) * (n_total - k))
    gen = np.diag(off, 1) + np.diag(off, -1)
    return scipy.linalg.expm(-0.25j * math.pi * gen)


def apply_beam_splitter_fock(psi2d: np.ndarray) -> np.ndarray:
    """Exact 50:50 beam splitter on an amplitude grid ``psi2d[n1, n2]``.

    Total photon number is conserved, so each anti-diagonal is rotated by its own
    block. The result lives on a grid large enough to hold every output, i.e.
    ``(2c+1) x (2c+1)`` for a ``(c+1) x (c+1)`` input.
    """
    c = psi2d.shape[0] - 1
    size = 2 * c + 1
    big = np.zeros((size, size), dtype=complex)
    big[: c + 1, : c + 1] = psi2d
    out = np.zeros_like(big)
    for n_total in range(2 * c + 1):
        n1 = np.arange(n_total + 1)
        n1 = n1[(n1 < size) & (n_total - n1 < size)]
        amps = big[n1, n_total - n1]
        if not np.any(amps):
            continue
        out[n1, n_total - n1] = _beam_splitter_block(n_total) @ amps
    return out


class FockDensityMatrix:
    """Truncated two-mode density matrix, held as ``rho`` and/or a factor ``W`` with ``rho = W W^dag``.

    ``leakage`` records the trace discarded by truncation and by dropping
    negligible Kraus branches; ``trace`` is ``1 - leakage`` up to rounding.
    """

    def __init__(self, cutoff: int, rho: np.ndarray | None = None, *, factor: np.ndarray | None = None,
                 leakage: float = 0.0):
        if rho is None and factor is None:
            raise InvalidParameter("need rho or factor")
        dim = (cutoff + 1) ** 2
        for name, arr in (("rho", rho), ("factor", factor)):
            if arr is not None and arr.shape[0] != dim:
                raise InvalidParameter(f"{name} has {arr.shape[0]} rows, cutoff {cutoff} needs {dim}")
        self.cutoff = cutoff
        self.factor = None if factor is None else np.asarray(factor, dtype=complex)
        self._rho = None if rho is None else np.asarray(rho, dtype=complex)
        self.leakage = float(leakage)

    @classmethod
    def pure(cls, psi: np.ndarray, cutoff: int, leakage: float = 0.0) -> "FockDensityMatrix":
        return cls(cutoff, factor=np.asarray(psi, dtype=complex).reshape(-1, 1), leakage=leakage)

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** 2

    @property
    def rho(self) -> np.ndarray:
        if self._rho is None:
            self._rho = self.factor @ self.factor.conj().T
        return self._rho

    def trace(self) -> float:
        if self.factor is not None:
            return float(np.sum(np.abs(self.factor) ** 2))
        return float(np.trace(self._rho).real)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and orthonormal eigenvectors spanning the support of ``rho``."""
        if self.factor is not None:
            gram = self.factor.conj().T @ self.factor
            mu, v = np.linalg.eigh(gram)
            keep = mu > SUPPORT_TOL
            mu, v = mu[keep], v[:, keep]
            return mu, (self.factor @ v) / np.sqrt(mu)
        p, vecs = np.linalg.eigh(self._rho)
        return np.where(p < EIGEN_CLAMP, 0.0, p), vecs


@dataclass(frozen=True)
class PhaseGenerator:
    """``H = (a^dag a - b^dag b) / 2`` on the truncated space; diagonal in the Fock basis."""

    cutoff: int

    @cached_property
    def diagonal(self) -> np.ndarray:
        n = np.arange(self.cutoff + 1, dtype=float)
        return ((n[:, None] - n[None, :]) / 2.0).ravel()

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal).astype(complex)


def kraus_operators(eta: float, cutoff: int) -> list[np.ndarray]:
    """Single-mode loss operators ``(1-eta)^{p/2} eta^{n/2} a^p / sqrt(p!)`` for p = 0..cutoff."""
    _check_eta(eta)
    n = np.arange(cutoff + 1)
    a = annihilation(cutoff)
    eta_half = np.diag(np.power(eta, n / 2.0))
    ops = []
    a_power = np.eye(cutoff + 1, dtype=complex)
    for p in range(cutoff + 1):
        ops.append((1 - eta) ** (p / 2.0) * eta_half @ a_power / math.sqrt(math.factorial(p)))
        a_power = a_power @ a
    return ops


def _branch_amplitudes(eta: float, cutoff: int) -> np.ndarray:
    """``amp[p, m] = sqrt(C(m+p, p) (1-eta)^p eta^m)``, the coefficient of ``|m>`` in ``K_p |m+p>``."""
    p = np.arange(cutoff + 1)[:, None]
    m = np.arange(cutoff + 1)[None, :]
    return np.sqrt(binom.pmf(p, m + p, 1.0 - eta))


def _loss_on_arm(w: np.ndarray, eta: float, arm: int, budget: float) -> tuple[np.ndarray, float]:
    """Kraus branches of one arm applied to a factor ``w[n1, n2, j]``; returns the new factor and dropped weight."""
    x = np.moveaxis(w, arm, 0)
    c = x.shape[0] - 1
    n = np.arange(c + 1)
    # probability of losing p photons from n, for every (n, p)
    lose = binom.pmf(n[None, :], n[:, None], 1.0 - eta)
    # weights[p, j]: norm^2 of branch p applied to column j
    weights = lose.T @ np.sum(np.abs(x) ** 2, axis=1)
    # drop the lightest branches while their combined weight stays within budget
    flat = weights.ravel()
    order = np.argsort(flat)
    n_drop = int(np.searchsorted(np.cumsum(flat[order]), budget, side="right"))
    keep = np.ones(flat.size, dtype=bool)
    keep[order[:n_drop]] = False
    keep = keep.reshape(weights.shape)
    amp = _branch_amplitudes(eta, c)
    blocks = []
    for p in range(c + 1):
        cols = np.nonzero(keep[p])[0]
        if cols.size == 0:
            continue
        block = np.zeros((c + 1, x.shape[1], cols.size), dtype=complex)
        block[: c + 1 - p] = amp[p, : c + 1 - p, None, None] * x[p:, :, cols]
        blocks.append(block)
    if not blocks:
        blocks = [np.zeros((c + 1, x.shape[1], 1), dtype=complex)]
    out = np.concatenate(blocks, axis=2)
    return np.moveaxis(out, 0, arm), float(flat[~keep.ravel()].sum())


def compress(rho: FockDensityMatrix, budget: float) -> FockDensityMatrix:
    """Replace the factor by the leading eigenvectors of ``rho``, discarding eigenvalues worth at most ``budget``.

    The result is bounded above by ``rho`` and the discarded trace joins ``leakage``.
    """
    gram = rho.factor.conj().T @ rho.factor
    mu, v = np.linalg.eigh(gram)
    mu = np.clip(mu, 0.0, None)
    n_drop = int(np.searchsorted(np.cumsum(mu), budget, side="right"))
    factor = rho.factor @ v[:, n_drop:]
    if factor.shape[1] == 0:
        factor = np.zeros((rho.dim, 1), dtype=complex)
    return FockDensityMatrix(rho.cutoff, factor=factor, leakage=rho.leakage + float(mu[:n_drop].sum()))


def _loss_on_factor(rho: FockDensityMatrix, eta_a: float, eta_b: float, budget: float) -> FockDensityMatrix:
    c = rho.cutoff
    w = rho.factor.reshape(c + 1, c + 1, -1)
    w, dropped_a = _loss_on_arm(w, eta_a, 0, budget / 3)
    mid = compress(FockDensityMatrix(c, factor=w.reshape(rho.dim, -1), leakage=rho.leakage + dropped_a), budget / 3)
    w, dropped_b = _loss_on_arm(mid.factor.reshape(c + 1, c + 1, -1), eta_b, 1, budget / 3)
    return FockDensityMatrix(c, factor=w.reshape(rho.dim, -1), leakage=mid.leakage + dropped_b)


def loss_channel(
    rho: FockDensityMatrix, eta_a: float, eta_b: float, *, drop_budget: float = BRANCH_DROP_BUDGET
) -> FockDensityMatrix:
    """Photon loss on both arms via the Kraus operators ``K_{a,p} K_{b,q}``.

    On a factored state the arms are processed one after the other. The lightest
    branches and, between the arms, the smallest eigen-components are dropped as
    long as their combined weight stays below ``drop_budget``; that weight is
    added to ``leakage``.
    Dense input goes through the full operator sum.
    """
    _check_eta(eta_a, "eta_a")
    _check_eta(eta_b, "eta_b")
    if rho.factor is not None:
        return _loss_on_factor(rho, eta_a, eta_b, drop_budget)
    c = rho.cutoff
    out = np.zeros_like(rho.rho)
    kas = kraus_operators(eta_a, c)
    kbs = kraus_operators(eta_b, c)
    for ka in kas:
        for kb in kbs:
            k = np.kron(ka, kb)
            out += k @ rho.rho @ k.conj().T
    return FockDensityMatrix(c, out, leakage=rho.leakage)


def phase_unitary_diagonal(cutoff: int, phi: float) -> np.ndarray:
    """Diagonal of ``R_a(phi/2) R_b(-phi/2) = exp(i phi H)``."""
    return np.exp(1j * phi * PhaseGenerator(cutoff).diagonal)


def apply_phase_fock(rho: FockDensityMatrix, phi: float) -> FockDensityMatrix:
    u = phase_unitary_diagonal(rho.cutoff, phi)
    if rho.factor is not None:
        return FockDensityMatrix(rho.cutoff, factor=u[:, None] * rho.factor, leakage=rho.leakage)
    return FockDensityMatrix(rho.cutoff, u[:, None] * rho.rho * u.conj()[None, :], leakage=rho.leakage)


def _project(psi2d: np.ndarray, cutoff: int) -> np.ndarray:
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    n = min(cutoff + 1, psi2d.shape[0])
    out[:n, :n] = psi2d[:n, :n]
    return out


def _output_cutoff(prob: np.ndarray, leak_tol: float, floor: int) -> int:
    """Smallest cutoff whose square ``[0, c]^2`` leaves at most ``leak_tol`` of ``prob`` outside."""
    total = prob.sum()
    # mass inside the square [0, c]^2 for every c
    inside = np.cumsum(np.cumsum(prob, axis=0), axis=1).diagonal()
    ok = np.nonzero(total - inside < leak_tol)[0]
    return max(int(ok[0]), floor) if ok.size else prob.shape[0] - 1


def shrink_to_support(rho: FockDensityMatrix, leak_tol: float) -> FockDensityMatrix:
    """Lower the cutoff of a factored state as far as ``leak_tol`` of extra leakage allows."""
    c = rho.cutoff
    w = rho.factor.reshape(c + 1, c + 1, -1)
    prob = np.sum(np.abs(w) ** 2, axis=2)
    new_c = _output_cutoff(prob, leak_tol, floor=1)
    if new_c >= c:
        return rho
    kept = w[: new_c + 1, : new_c + 1].reshape((new_c + 1) ** 2, -1)
    lost = float(prob.sum() - prob[: new_c + 1, : new_c + 1].sum())
    return FockDensityMatrix(new_c, factor=kept, leakage=rho.leakage + lost)


def output_density_matrix(
    params: ProductStateParams,
    cfg: ChannelConfig,
    cutoff: int | None = None,
    *,
    leak_tol: float = DEFAULT_LEAK_TOL,
    phase_before_loss: bool = False,
) -> FockDensityMatrix:
    """``rho_f = sum_{p,q} U K_{a,p} K_{b,q} B rho_in B^dag K^dag K^dag U^dag``.

    With ``cutoff=None`` the cutoffs are chosen so that the total discarded trace
    stays below ``leak_tol``: an eighth per input mode, a quarter when projecting
    after the beam splitter, a quarter for negligible loss branches and a quarter
    when shrinking the cutoff once loss has removed photons.
    """
    inp = build_fock_input(params, cutoff, leak_tol=leak_tol / 8)
    c_in = inp.cutoff
    mixed = apply_beam_splitter_fock(inp.psi.reshape(c_in + 1, c_in + 1))
    c_out = cutoff if cutoff is not None else _output_cutoff(np.abs(mixed) ** 2, leak_tol / 4, floor=1)
    psi = _project(mixed, c_out)
    leakage = float(1.0 - np.vdot(psi, psi).real)
    rho = FockDensityMatrix.pure(psi.ravel(), c_out, leakage=leakage)
    if phase_before_loss:
        rho = apply_phase_fock(rho, cfg.phi)
    rho = loss_channel(rho, cfg.eta_a, cfg.eta_b, drop_budget=leak_tol / 4)
    if cutoff is None:
        rho = shrink_to_support(rho, leak_tol / 4)
    return rho if phase_before_loss else apply_phase_fock(rho, cfg.phi)


def qfi_spectral(rho: FockDensityMatrix, generator: PhaseGenerator | None = None) -> float:
    """QFI of ``exp(i phi H) rho exp(-i phi H)`` from the eigen-decomposition of ``rho``.

    ``2 sum_{jk} (p_j - p_k)^2 / (p_j + p_k) |H_jk|^2`` over pairs with
    ``p_j + p_k > 1e-12``. The eigenvalue-derivative term vanishes identically for
    unitary encoding and is therefore not evaluated. When ``rho`` is held as a
    factor, pairs with one index outside the support are summed in closed form via
    ``<j|H^2|j> - sum_{k in support} |H_jk|^2``.
    """
    generator = generator or PhaseGenerator(rho.cutoff)
    if generator.cutoff != rho.cutoff:
        raise InvalidParameter("generator and density matrix have different cutoffs")
    h = generator.diagonal
    p, vecs = rho.spectrum
    hv = h[:, None] * vecs
    h_jk = vecs.conj().T @ hv
    num = (p[:, None] - p[None, :]) ** 2
    den = p[:, None] + p[None, :]
    pairs = den > PAIR_TOL
    weights = np.zeros_like(den)
    weights[pairs] = num[pairs] / den[pairs]
    value = 2.0 * float(np.sum(weights * np.abs(h_jk) ** 2))
    if rho.factor is not None:
        outside = np.sum(np.abs(hv) ** 2, axis=0) - np.sum(np.abs(h_jk) ** 2, axis=0)
        value += 4.0 * float(np.sum(p * np.clip(outside, 0.0, None)))
    return value


def uhlmann_fidelity(rho_1: FockDensityMatrix, rho_2: FockDensityMatrix) -> float:
    """``[tr sqrt(sqrt(rho_1) rho_2 sqrt(rho_1))]^2``.

    With factors on both sides this is the squared nuclear norm of
    ``W_1^dag W_2``; otherwise Hermitian square roots are taken with eigenvalues
    below 1e-14 clamped to zero and the same nuclear norm taken.
    """
    if rho_1.cutoff != rho_2.cutoff:
        raise InvalidParameter(f"cutoff mismatch: {rho_1.cutoff} vs {rho_2.cutoff}")
    if rho_1.factor is not None and rho_2.factor is not None:
        s = scipy.linalg.svdvals(rho_1.factor.conj().T @ rho_2.factor)
        return float(np.sum(s)) ** 2
    return _fidelity_dense(rho_1.rho, rho_2.rho)


def _fidelity_dense(r1: np.ndarray, r2: np.ndarray) -> float:
    """Hermitian square roots ``W_i = V_i sqrt(p_i)`` with ``p_i < 1e-14`` set to zero; ``F = ||W_1^dag W_2||_*^2``."""
    roots = []
    for r in (r1, r2):
        p, v = np.linalg.eigh(r)
        roots.append(v * np.sqrt(np.where(p < EIGEN_CLAMP, 0.0, p)))
    return float(np.sum(scipy.linalg.svdvals(roots[0].conj().T @ roots[1]))) ** 2


@lru_cache(maxsize=16)
def _mode_operators(cutoff: int):
    a1 = sp.csr_matrix(annihilation(cutoff))
    eye = sp.identity(cutoff + 1, dtype=complex, format="csr")
    return sp.kron(a1, eye, format="csr"), sp.kron(eye, a1, format="csr")


def moment_operator(which: str, cutoff: int) -> sp.csr_matrix:
    a, b = _mode_operators(cutoff)
    ops = {
        "a": lambda: a,
        "a2": lambda: a @ a,
        "ada": lambda: a.conj().T @ a,
        "b": lambda: b,
        "b2": lambda: b @ b,
        "bdb": lambda: b.conj().T @ b,
        "ab": lambda: a @ b,
        "abd": lambda: a @ b.conj().T,
    }
    if which not in ops:
        raise InvalidParameter(f"unknown operator {which!r}; expected one of {sorted(ops)}")
    return ops[which]()


def moment(rho: FockDensityMatrix, which: str) -> complex:
    """``tr(rho O)`` for ``O`` in {a, a2, ada, b, b2, bdb, ab, abd} built from truncated ladder matrices."""
    op = moment_operator(which, rho.cutoff)
    if rho.factor is not None:
        return complex(np.sum(rho.factor.conj() * (op @ rho.factor)))
    return complex((op @ rho.rho).trace())


def generator_variance(psi: np.ndarray, generator: PhaseGenerator) -> float:
    """``<H^2> - <H>^2`` of a pure state vector."""
    prob = np.abs(psi) ** 2
    norm = prob.sum()
    mean = np.dot(prob, generator.diagonal) / norm
    return float(np.dot(prob, generator.diagonal**2) / norm - mean**2)
