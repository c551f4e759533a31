"""Rate operators, jump channels, fixed-post-jump shifts, and the
Haar-averaged positive-dissipator construction.

Two rate operators drive the jump unravelings:

* ``W_psi = (1 - P_psi) L_t(P_psi) (1 - P_psi)`` — representation independent,
  vanishing on psi itself;
* ``R_psi = J_t(P_psi)`` — representation dependent; its positivity over the
  reachable states is what makes a representation unravelable.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionNotTwo,
    NegativeCoefficient,
    NegativeRate,
    NotPDivisible,
    CondTwoViolated,
)
from .generator import (
    GeneratorRepresentation,
    ShiftOperator,
    apply_dissipator,
    gamma_operator,
    generator_apply,
    generator_dual_apply,
    effective_hamiltonian,
    shift_representation,
)
from .linalg import (
    PSD_TOL,
    SpectralDecomposition,
    dag,
    hermitian_eig,
    projector,
    require_hermitian,
    haar_unitaries,
    weyl_unitaries,
)


@dataclass
class RateOperator:
    """A Hermitian jump-rate matrix built at (t, psi)."""

    kind: str  # "W" or "R"
    matrix: np.ndarray
    state: np.ndarray
    time: float
    preferred_basis: np.ndarray | None = None
    _spectrum: SpectralDecomposition | None = field(default=None, repr=False)

    @property
    def spectrum(self) -> SpectralDecomposition:
        if self._spectrum is None:
            self._spectrum = hermitian_eig(self.matrix, preferred=self.preferred_basis)
        return self._spectrum


@dataclass(frozen=True)
class JumpChannel:
    """One resolvable jump: its rate (1/time) and the post-jump state."""

    rate: float
    post_state: np.ndarray


def _fixed_basis_of(rep: GeneratorRepresentation) -> np.ndarray | None:
    """The fixed post-jump eigenbasis promised by a shift in this
    representation's chain, if any."""
    while rep is not None:
        shift = rep.meta.get("shift")
        if isinstance(shift, ShiftOperator) and shift.fixed_basis is not None:
            return shift.fixed_basis
        rep = rep.meta.get("base")
    return None


def rate_operator_W(rep: GeneratorRepresentation, t: float, psi: np.ndarray) -> RateOperator:
    """W_psi = (1 - P_psi) L_t(P_psi) (1 - P_psi); representation independent."""
    psi = np.asarray(psi, dtype=complex)
    p = projector(psi)
    q = np.eye(rep.dim) - p
    w = q @ generator_apply(rep, t, p) @ q
    w = (w + dag(w)) / 2  # scrub roundoff asymmetry
    return RateOperator(kind="W", matrix=w, state=psi, time=t,
                        preferred_basis=_fixed_basis_of(rep))


def rate_operator_W_sum(rep: GeneratorRepresentation, t: float, psi: np.ndarray) -> RateOperator:
    """W_psi as the explicit channel sum sum_a c_a v_a v_a^dag with
    v_a = (L_a - <L_a>) psi; equals the projector construction."""
    rep.require_explicit("rate_operator_W_sum")
    psi = np.asarray(psi, dtype=complex)
    w = np.zeros((rep.dim, rep.dim), dtype=complex)
    for ch in rep.channels:
        l = np.asarray(ch.lindblad(t), dtype=complex)
        v = l @ psi
        v = v - (psi.conj() @ v) * psi
        w += ch.rate(t) * np.outer(v, v.conj())
    return RateOperator(kind="W", matrix=w, state=psi, time=t,
                        preferred_basis=_fixed_basis_of(rep))


def rate_operator_R(rep: GeneratorRepresentation, t: float, psi: np.ndarray) -> RateOperator:
    """R_psi = J_t(P_psi) in this (possibly shifted) representation."""
    psi = np.asarray(psi, dtype=complex)
    r = apply_dissipator(rep, t, projector(psi))
    r = (r + dag(r)) / 2
    return RateOperator(kind="R", matrix=r, state=psi, time=t,
                        preferred_basis=_fixed_basis_of(rep))


def jump_channels(rate_op: RateOperator, psd_tol: float = PSD_TOL) -> list[JumpChannel]:
    """Spectral jump channels (r_k, |phi_k>) of a rate operator.

    Channels with |r_k| <= psd_tol are dropped; an eigenvalue below -psd_tol
    means the unraveling is invalid at this (t, psi).
    """
    spec = rate_op.spectrum
    if spec.eigenvalues[-1] < -psd_tol:
        raise NegativeRate(float(spec.eigenvalues[-1]), t=rate_op.time, state=rate_op.state)
    return [
        JumpChannel(rate=float(r), post_state=spec.eigenvectors[:, k].copy())
        for k, r in enumerate(spec.eigenvalues)
        if abs(r) > psd_tol
    ]


def total_jump_rate(rate_op: RateOperator) -> float:
    """Tr R, the total jump probability per unit time at (t, psi)."""
    return float(np.trace(rate_op.matrix).real)


# -- fixed post-jump states (qubit) -------------------------------------------

def choi_coefficients(rep: GeneratorRepresentation, t: float,
                      basis: np.ndarray | None = None) -> np.ndarray:
    """The 16 numbers J^{kl}_{ij} = <i| J_t[|k><l|] |j> of a qubit dissipator,
    returned as an array indexed [k, l, i, j]."""
    if rep.dim != 2:
        raise DimensionNotTwo(f"Choi coefficients need N=2, got N={rep.dim}")
    if basis is None:
        basis = np.eye(2, dtype=complex)
    b0, b1 = basis[:, 0], basis[:, 1]
    vecs = (b0, b1)
    out = np.empty((2, 2, 2, 2), dtype=complex)
    for k in range(2):
        for l in range(2):
            jm = apply_dissipator(rep, t, np.outer(vecs[k], vecs[l].conj()))
            for i in range(2):
                for j in range(2):
                    out[k, l, i, j] = vecs[i].conj() @ jm @ vecs[j]
    return out


def fixed_postjump_shift(coeffs, x, y, basis: np.ndarray | None = None,
                         check_times=(0.0, 0.5, 1.0)) -> ShiftOperator:
    """The shift C(t) making every R_psi share the fixed eigenvectors
    (|phi_1> +/- |phi_2>)/sqrt(2).

    ``coeffs`` maps t to the [k, l, i, j] Choi-coefficient array expressed in
    ``basis`` (default: standard basis); the coefficients must be real in that
    basis. ``x`` and ``y`` are real time functions; x only retunes the
    Hamiltonian part, y moves along the family of valid shifts.
    """
    if basis is None:
        basis = np.eye(2, dtype=complex)
    v = np.asarray(basis, dtype=complex)

    def c_in_basis(t):
        j = np.asarray(coeffs(t), dtype=complex)
        if np.max(np.abs(j.imag)) > 1e-9:
            raise CondTwoViolated(
                f"Choi coefficients not real in the supplied basis at t={t} "
                f"(max imag {np.max(np.abs(j.imag)):.3e})"
            )
        xt, yt = float(x(t)), float(y(t))
        return np.array([
            [j[0, 0, 1, 1].real - j[0, 0, 0, 0].real + 1j * xt, yt],
            [yt + 2 * (j[0, 1, 0, 0].real - j[0, 1, 1, 1].real),
             j[1, 1, 0, 0].real - j[1, 1, 1, 1].real + 1j * xt],
        ], dtype=complex)

    for tc in check_times:
        c_in_basis(tc)

    fixed = np.stack([(v[:, 0] + v[:, 1]) / np.sqrt(2.0),
                      (v[:, 0] - v[:, 1]) / np.sqrt(2.0)], axis=1)
    return ShiftOperator(value=lambda t: v @ c_in_basis(t) @ dag(v), fixed_basis=fixed)


def y_bound(gamma1: float, gamma2: float, gamma3: float) -> float:
    """Largest admissible y for the Pauli-diagonal fixed-post-jump family:
    0 <= y <= gamma1 + gamma2/2 - gamma3/2."""
    if gamma1 + gamma3 < 0 or gamma2 + gamma3 < 0:
        raise NotPDivisible(
            f"need gamma_i + gamma_3 >= 0, got ({gamma1}, {gamma2}, {gamma3})"
        )
    return gamma1 + 0.5 * gamma2 - 0.5 * gamma3


# -- Haar-averaged positive dissipator ----------------------------------------

def haar_average_K(rep: GeneratorRepresentation, t: float, method: str = "design",
                   samples: int = 10000, rng: np.random.Generator | None = None) -> np.ndarray:
    """K_avg(t) = integral over U(N) of L_t^dag(U^dag) U dU.

    The integrand is degree (1, 1) in U, so averaging over the N^2
    shift/clock unitaries (a unitary 1-design) is exact; ``monte_carlo``
    averages over Haar samples instead.
    """
    n = rep.dim
    if method == "design":
        us = weyl_unitaries(n)
    elif method == "monte_carlo":
        rng = np.random.default_rng(0) if rng is None else rng
        us = haar_unitaries(rng, n, samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    duals = generator_dual_apply(rep, t, us.conj().transpose(0, 2, 1))
    return np.mean(duals @ us, axis=0)


def positive_dissipator_representation(rep: GeneratorRepresentation,
                                       t_grid=None) -> GeneratorRepresentation:
    """Re-represent the generator with the dissipator
    J'_t(rho) with dual L_t^dag(X) - (K_avg X + X K_avg^dag).

    If the generator is dissipative, the new dissipator is a positive map, so
    every R_psi is PSD. Implemented as the shift C(t) = -2iH - Gamma - 2 K_avg^dag.
    """
    if t_grid is not None:
        from .divisibility import check_dissipativity

        report = check_dissipativity(rep, t_grid)
        if not report.holds:
            warnings.warn(
                "generator is not dissipative on the supplied grid; the "
                "constructed dissipator may not be positive",
                stacklevel=2,
            )

    def c_of(t):
        h = rep.hamiltonian_at(t)
        g = gamma_operator(rep, t)
        k_avg = haar_average_K(rep, t, method="design")
        return -2j * h - g - 2 * dag(k_avg)

    out = shift_representation(rep, ShiftOperator(value=c_of))
    out.meta["positive_dissipator"] = True
    return out


# -- conventional unravelings over an explicit representation -----------------

def mcwf_channels(rep: GeneratorRepresentation, t: float, psi: np.ndarray,
                  psd_tol: float = PSD_TOL) -> list[JumpChannel]:
    """Per-channel jumps (c_a ||L_a psi||^2, L_a psi / ||.||); requires all
    coefficients nonnegative."""
    rep.require_explicit("mcwf_channels")
    psi = np.asarray(psi, dtype=complex)
    out = []
    for alpha, ch in enumerate(rep.channels):
        c = ch.rate(t)
        if c < -1e-12:
            raise NegativeCoefficient(alpha, t, c)
        v = np.asarray(ch.lindblad(t), dtype=complex) @ psi
        rate = c * float(np.vdot(v, v).real)
        if rate > psd_tol:
            out.append(JumpChannel(rate=rate, post_state=v / np.linalg.norm(v)))
    return out


def wroqj_deterministic_generator(rep: GeneratorRepresentation, t: float,
                                  psi: np.ndarray) -> np.ndarray:
    """K_psi = K + (i/2) sum_a c_a (2 L_a <L_a>^* - |<L_a>|^2); the nonlinear
    drift whose norm-loss rate equals Tr W_psi."""
    rep.require_explicit("wroqj_deterministic_generator")
    psi = np.asarray(psi, dtype=complex)
    k = effective_hamiltonian(rep, t)
    n = rep.dim
    delta = np.zeros((n, n), dtype=complex)
    for ch in rep.channels:
        l = np.asarray(ch.lindblad(t), dtype=complex)
        ell = complex(psi.conj() @ l @ psi)
        delta += ch.rate(t) * (2 * l * ell.conjugate() - abs(ell) ** 2 * np.eye(n))
    return k + 0.5j * delta
