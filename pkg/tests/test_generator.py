import numpy as np
import pytest

from roqj.errors import ExplicitFormRequired, NonHermitianInput
from roqj.generator import (
    Channel,
    GeneratorRepresentation,
    ShiftOperator,
    apply_dissipator,
    apply_dissipator_dual,
    base_representation,
    effective_hamiltonian,
    gamma_operator,
    generator_apply,
    generator_dual_apply,
    shift_representation,
)
from roqj.linalg import dag, random_ginibre, random_hermitian

RNG = np.random.default_rng(77)


def random_representation(rng, dim=2, n_channels=3):
    hs = random_hermitian(rng, dim)
    ops = [random_ginibre(rng, dim) for _ in range(n_channels)]
    rates = rng.uniform(-1.0, 2.0, size=n_channels)
    channels = tuple(
        Channel(lindblad=lambda t, _o=o: _o, rate=lambda t, _c=c: float(_c))
        for o, c in zip(ops, rates)
    )
    return GeneratorRepresentation(dim=dim, hamiltonian=lambda t, _h=hs: _h,
                                   channels=channels)


def random_shift(rng, dim=2):
    c = random_ginibre(rng, dim)
    return ShiftOperator(value=lambda t, _c=c: _c)


def test_gamma_operator_is_dual_of_identity():
    rep = random_representation(RNG)
    g = gamma_operator(rep, 0.0)
    assert np.max(np.abs(g - apply_dissipator_dual(rep, 0.0, np.eye(2)))) < 1e-12
    assert np.max(np.abs(g - dag(g))) < 1e-12


def test_generator_is_trace_annihilating():
    rep = random_representation(RNG)
    rho = random_hermitian(RNG, 2)
    assert abs(np.trace(generator_apply(rep, 0.3, rho))) < 1e-12


def test_dual_is_unital_and_trace_dual():
    rep = random_representation(RNG)
    assert np.max(np.abs(generator_dual_apply(rep, 0.1, np.eye(2)))) < 1e-12
    for _ in range(20):
        x = random_ginibre(RNG, 2)
        rho = random_hermitian(RNG, 2)
        lhs = np.trace(x @ generator_apply(rep, 0.1, rho))
        rhs = np.trace(generator_dual_apply(rep, 0.1, x) @ rho)
        assert abs(lhs - rhs) < 1e-10


def test_dual_supports_stacked_input():
    rep = random_representation(RNG)
    xs = np.stack([random_ginibre(RNG, 2) for _ in range(5)])
    stacked = generator_dual_apply(rep, 0.2, xs)
    for k in range(5):
        assert np.max(np.abs(stacked[k] - generator_dual_apply(rep, 0.2, xs[k]))) < 1e-12


def test_shift_preserves_generator():
    for _ in range(25):
        rep = random_representation(RNG)
        shifted = shift_representation(rep, random_shift(RNG))
        rho = random_hermitian(RNG, 2)
        a = generator_apply(rep, 0.7, rho)
        b = generator_apply(shifted, 0.7, rho)
        assert np.max(np.abs(a - b)) < 1e-10
        x = random_ginibre(RNG, 2)
        assert np.max(np.abs(generator_dual_apply(rep, 0.7, x)
                             - generator_dual_apply(shifted, 0.7, x))) < 1e-10


def test_shift_moves_hermitian_part_into_gamma():
    rep = random_representation(RNG)
    c = random_ginibre(RNG, 2)
    shifted = shift_representation(rep, ShiftOperator(value=lambda t: c))
    g0 = gamma_operator(rep, 0.0)
    g1 = gamma_operator(shifted, 0.0)
    assert np.max(np.abs(g1 - g0 - (c + dag(c)) / 2)) < 1e-12
    h0 = rep.hamiltonian_at(0.0)
    h1 = shifted.hamiltonian_at(0.0)
    assert np.max(np.abs(h1 - h0 - (c - dag(c)) / 4j)) < 1e-12


def test_shifted_representation_rejects_channel_operations():
    rep = random_representation(RNG)
    shifted = shift_representation(rep, random_shift(RNG))
    assert not shifted.explicit_channels
    with pytest.raises(ExplicitFormRequired):
        shifted.require_explicit("test")
    assert base_representation(shifted) is rep


def test_effective_hamiltonian_matches_definition():
    rep = random_representation(RNG)
    k = effective_hamiltonian(rep, 0.4)
    expected = rep.hamiltonian_at(0.4) - 0.5j * gamma_operator(rep, 0.4)
    assert np.max(np.abs(k - expected)) < 1e-12


def test_nonhermitian_hamiltonian_rejected():
    rep = GeneratorRepresentation(
        dim=2, hamiltonian=lambda t: np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NonHermitianInput):
        rep.hamiltonian_at(0.0)


def test_dissipator_of_projector_matches_manual_sum():
    rep = random_representation(RNG, n_channels=2)
    rho = random_hermitian(RNG, 2)
    out = np.zeros((2, 2), dtype=complex)
    for ch in rep.channels:
        l = ch.lindblad(0.0)
        out += ch.rate(0.0) * (l @ rho @ dag(l))
    assert np.max(np.abs(apply_dissipator(rep, 0.0, rho) - out)) < 1e-12
