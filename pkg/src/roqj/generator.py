"""Time-local generators in GKLS form and their representation freedom.

A generator L_t(rho) = -i[H, rho] + J_t(rho) - (1/2){Gamma, rho} can be
re-represented by shifting an arbitrary operator C(t) between the dissipator
and the Hamiltonian/Gamma parts without changing L_t. Shifted representations
carry the dissipator as an explicit map closure, since the shifted map is
generally not re-expressible in (L_alpha, c_alpha) form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, ExplicitFormRequired
from .linalg import require_hermitian, require_square

TimeFn = Callable[[float], np.ndarray]
RateFn = Callable[[float], float]


@dataclass(frozen=True)
class Channel:
    """One dissipation channel: jump operator L_alpha(t) and coefficient
    c_alpha(t); c_alpha may be negative."""

    lindblad: TimeFn
    rate: RateFn


@dataclass(frozen=True)
class GeneratorRepresentation:
    """A specific (H, {L_alpha, c_alpha}) presentation of a time-local
    generator. Immutable; safe to share across workers.

    When ``explicit_channels`` is False the dissipator/its dual/Gamma are
    given by the stored closures instead of the channel list.
    """

    dim: int
    hamiltonian: TimeFn
    channels: tuple[Channel, ...] = ()
    dissipator_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    dissipator_dual_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    gamma_fn: TimeFn | None = None
    explicit_channels: bool = True
    meta: dict = field(default_factory=dict)

    def require_explicit(self, op: str) -> None:
        if not self.explicit_channels:
            raise ExplicitFormRequired(
                f"{op} needs explicit (L_alpha, c_alpha) channels; this "
                "representation carries a shifted dissipator closure"
            )

    def hamiltonian_at(self, t: float) -> np.ndarray:
        h = np.asarray(self.hamiltonian(t), dtype=complex)
        require_square(h, self.dim)
        require_hermitian(h, what=f"H({t})")
        return h


@dataclass(frozen=True)
class ShiftOperator:
    """The operator C(t) = A(t) + iB(t) moving terms between the dissipator
    and the Hamiltonian/Gamma parts.

    ``fixed_basis`` (optional, qubit only) carries the post-jump eigenbasis
    guaranteed by a fixed-post-jump construction; it is used to resolve
    degenerate rate-operator spectra.
    """

    value: TimeFn
    fixed_basis: np.ndarray | None = None

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.value(t), dtype=complex)

    def hermitian_part(self, t: float) -> np.ndarray:
        c = self.at(t)
        return (c + c.conj().T) / 2

    def antihermitian_coefficient(self, t: float) -> np.ndarray:
        c = self.at(t)
        return (c - c.conj().T) / 2j


def apply_dissipator(rep: GeneratorRepresentation, t: float, rho: np.ndarray) -> np.ndarray:
    """J_t(rho) for this representation."""
    rho = np.asarray(rho, dtype=complex)
    require_square(rho, rep.dim)
    if rep.dissipator_fn is not None:
        return rep.dissipator_fn(t, rho)
    out = np.zeros_like(rho)
    for ch in rep.channels:
        l = np.asarray(ch.lindblad(t), dtype=complex)
        out += ch.rate(t) * (l @ rho @ l.conj().T)
    return out


def apply_dissipator_dual(rep: GeneratorRepresentation, t: float, x: np.ndarray) -> np.ndarray:
    """J_t^dag(X), the Heisenberg-picture dual of the dissipator. Supports
    stacked X with shape (..., N, N)."""
    x = np.asarray(x, dtype=complex)
    if rep.dissipator_dual_fn is not None:
        return rep.dissipator_dual_fn(t, x)
    out = np.zeros_like(x)
    for ch in rep.channels:
        l = np.asarray(ch.lindblad(t), dtype=complex)
        out += ch.rate(t) * (l.conj().T @ x @ l)
    return out


def gamma_operator(rep: GeneratorRepresentation, t: float) -> np.ndarray:
    """Gamma(t) = J_t^dag(identity) = sum_alpha c_alpha L_alpha^dag L_alpha."""
    if rep.gamma_fn is not None:
        return np.asarray(rep.gamma_fn(t), dtype=complex)
    out = np.zeros((rep.dim, rep.dim), dtype=complex)
    for ch in rep.channels:
        l = np.asarray(ch.lindblad(t), dtype=complex)
        out += ch.rate(t) * (l.conj().T @ l)
    return out


def generator_apply(rep: GeneratorRepresentation, t: float, rho: np.ndarray) -> np.ndarray:
    """L_t(rho) = -i[H, rho] + J_t(rho) - (1/2){Gamma, rho}."""
    rho = np.asarray(rho, dtype=complex)
    require_square(rho, rep.dim)
    h = rep.hamiltonian_at(t)
    g = gamma_operator(rep, t)
    return (
        -1j * (h @ rho - rho @ h)
        + apply_dissipator(rep, t, rho)
        - 0.5 * (g @ rho + rho @ g)
    )


def generator_dual_apply(rep: GeneratorRepresentation, t: float, x: np.ndarray) -> np.ndarray:
    """L_t^dag(X) = +i[H, X] + J_t^dag(X) - (1/2){Gamma, X}. Supports stacked
    X with shape (..., N, N)."""
    x = np.asarray(x, dtype=complex)
    if x.shape[-2:] != (rep.dim, rep.dim):
        raise DimensionMismatch(f"expected trailing shape {(rep.dim, rep.dim)}, got {x.shape}")
    h = rep.hamiltonian_at(t)
    g = gamma_operator(rep, t)
    return (
        1j * (h @ x - x @ h)
        + apply_dissipator_dual(rep, t, x)
        - 0.5 * (g @ x + x @ g)
    )


def effective_hamiltonian(rep: GeneratorRepresentation, t: float) -> np.ndarray:
    """K(t) = H(t) - (i/2) Gamma(t), the no-jump generator. Its norm-loss
    rate equals the total jump probability per unit time."""
    return rep.hamiltonian_at(t) - 0.5j * gamma_operator(rep, t)


def shift_representation(rep: GeneratorRepresentation, shift: ShiftOperator) -> GeneratorRepresentation:
    """Re-represent the same generator with J'(rho) = J(rho) + (C rho + rho C^dag)/2,
    H' = H + B/2, Gamma' = Gamma + A, where C = A + iB."""

    def hamiltonian(t, _rep=rep, _s=shift):
        return _rep.hamiltonian_at(t) + 0.5 * _s.antihermitian_coefficient(t)

    def dissipator(t, rho, _rep=rep, _s=shift):
        c = _s.at(t)
        return apply_dissipator(_rep, t, rho) + 0.5 * (c @ rho + rho @ c.conj().T)

    def dissipator_dual(t, x, _rep=rep, _s=shift):
        c = _s.at(t)
        return apply_dissipator_dual(_rep, t, x) + 0.5 * (c.conj().T @ x + x @ c)

    def gamma(t, _rep=rep, _s=shift):
        return gamma_operator(_rep, t) + _s.hermitian_part(t)

    meta = dict(rep.meta)
    meta["base"] = rep
    meta["shift"] = shift
    return GeneratorRepresentation(
        dim=rep.dim,
        hamiltonian=hamiltonian,
        channels=(),
        dissipator_fn=dissipator,
        dissipator_dual_fn=dissipator_dual,
        gamma_fn=gamma,
        explicit_channels=False,
        meta=meta,
    )


def base_representation(rep: GeneratorRepresentation) -> GeneratorRepresentation:
    """The original explicit-channel representation behind a chain of shifts."""
    while not rep.explicit_channels and "base" in rep.meta:
        rep = rep.meta["base"]
    return rep
