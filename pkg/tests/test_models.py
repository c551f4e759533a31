import json

import numpy as np
import pytest
from scipy.special import ndtr

from roqj.errors import NonPauliModel, NormalizationError, SchemaError, StepInstability
from roqj.generator import gamma_operator, generator_apply
from roqj.linalg import ID2, PAULI_Z, projector
from roqj.models import (
    PRESET_NAMES,
    enm_analytic_solution,
    enm_model,
    gaussian_driving,
    integrate_master_equation,
    load_model_spec,
    load_preset,
    make_driving,
    make_rate,
    pauli_rates,
    resolve_model,
)

NEG_TANH = make_rate("neg_tanh")
NEG_HALF_TANH = make_rate("neg_half_tanh")


def base_doc():
    return {
        "name": "custom",
        "dim": 2,
        "channels": [
            {"lindblad": "pauli_x", "rate": {"preset": "constant", "params": {"value": 1.0}}},
            {"lindblad": "pauli_y", "rate": {"preset": "constant", "params": {"value": 1.0}}},
            {"lindblad": "pauli_z", "rate": {"preset": "neg_tanh"}},
        ],
        "initial_state": [[1.0, 0.0], [0.0, 0.0]],
        "rate_convention": "pauli_half",
    }


def test_presets_load_and_are_pauli():
    for name in PRESET_NAMES:
        spec = load_preset(name)
        assert spec.dim == 2
        assert pauli_rates(spec.representation) is not None
        assert abs(np.linalg.norm(spec.initial_state) - 1.0) < 1e-12


def test_undriven_preset_rates_and_state():
    spec = load_preset("enm_undriven")
    g1, g2, g3 = pauli_rates(spec.representation)
    assert g1(0.7) == pytest.approx(1.0)
    assert g2(3.1) == pytest.approx(1.0)
    assert g3(1.0) == pytest.approx(-np.tanh(1.0))
    assert spec.initial_state[0] == pytest.approx(np.sqrt(0.1))
    assert spec.initial_state[1] == pytest.approx(np.sqrt(0.9))


def test_rate_integrals_match_quadrature():
    from scipy.integrate import quad

    for tf in (NEG_TANH, NEG_HALF_TANH, make_rate("tanh", {"scale": 0.4})):
        for t in (0.5, 2.0, 6.0):
            ref, _ = quad(tf, 0.0, t)
            assert tf.integral(t) == pytest.approx(ref, abs=1e-10)


def test_table_rate_exact_piecewise_integral():
    tf = make_rate("table", {"times": [0.0, 1.0, 3.0], "values": [0.0, 2.0, 2.0]})
    assert tf(0.5) == pytest.approx(1.0)
    assert tf(2.0) == pytest.approx(2.0)
    assert tf(5.0) == pytest.approx(2.0)  # constant extrapolation
    assert tf.integral(1.0) == pytest.approx(1.0)
    assert tf.integral(3.0) == pytest.approx(5.0)
    assert tf.integral(5.0) == pytest.approx(9.0)


def test_gaussian_driving_values():
    assert gaussian_driving(0.0, 1.0, 0.25) == pytest.approx(ndtr(-4.0))
    assert gaussian_driving(1.0, 1.0, 0.25) == pytest.approx(0.5)
    assert gaussian_driving(1.0 + 2.5, 1.0, 0.25) == pytest.approx(1.0, abs=1e-12)


def test_gaussian_driving_integral_matches_quadrature():
    from scipy.integrate import quad

    tf = make_driving("gaussian_integral", {"mu": 1.0, "sigma": 0.25})
    for t in (0.3, 1.0, 4.0):
        ref, _ = quad(tf, 0.0, t)
        assert tf.integral(t) == pytest.approx(ref, abs=1e-10)


def test_enm_model_structure():
    rep = enm_model(1.0, 1.0, NEG_TANH, driving=1.0)
    assert rep.dim == 2
    assert np.max(np.abs(rep.hamiltonian_at(0.0) + 0.5 * PAULI_Z)) < 1e-15
    # Gamma = sum gamma_k/2 * identity for Pauli channels
    g = gamma_operator(rep, 1.0)
    total = 0.5 * (1.0 + 1.0 - np.tanh(1.0))
    assert np.max(np.abs(g - total * ID2)) < 1e-12


def test_rk4_matches_analytic_undriven():
    spec = load_preset("enm_undriven")
    rep = spec.representation
    t = np.linspace(0.0, 3.0, 1501)
    rho0 = projector(spec.initial_state)
    num = integrate_master_equation(rep, rho0, t)
    ana = enm_analytic_solution(rho0, t, rep)
    assert np.max(np.abs(num - ana)) < 1e-7


def test_rk4_matches_analytic_driven():
    spec = load_preset("enm_driven")
    rep = spec.representation
    t = np.linspace(0.0, 3.0, 1501)
    rho0 = projector(spec.initial_state)
    num = integrate_master_equation(rep, rho0, t)
    ana = enm_analytic_solution(rho0, t, rep)
    assert np.max(np.abs(num - ana)) < 1e-7


def test_evolution_is_unital():
    rep = load_preset("enm_undriven").representation
    t = np.linspace(0.0, 2.0, 401)
    out = integrate_master_equation(rep, ID2 / 2, t)
    assert np.max(np.abs(out - ID2 / 2)) < 1e-12


def test_analytic_decay_factors():
    # gamma1=gamma2=1, gamma3=-tanh t: Lambda_z = e^{-2t}, Lambda_x = e^{-t} cosh t
    rho0 = np.array([[0.9, 0.3], [0.3, 0.1]], dtype=complex)
    t = np.array([0.0, 0.5, 1.7])
    out = enm_analytic_solution(rho0, t, (1.0, 1.0, NEG_TANH))
    assert np.allclose(out[:, 0, 1].real, 0.3 * np.exp(-t) * np.cosh(t))
    z = (out[:, 0, 0] - out[:, 1, 1]).real
    assert np.allclose(z, 0.8 * np.exp(-2.0 * t))


def test_driven_analytic_requires_equal_xy_rates():
    rho0 = projector(np.array([1.0, 1.0]) / np.sqrt(2))
    with pytest.raises(NonPauliModel):
        enm_analytic_solution(rho0, 1.0, (1.0, 0.5, 0.0), driving=1.0)


def test_analytic_rejects_non_pauli_representation():
    doc = base_doc()
    doc["channels"][0]["lindblad"] = {"matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}
    doc["rate_convention"] = "gkls"
    spec = load_model_spec(doc)
    with pytest.raises(NonPauliModel):
        enm_analytic_solution(ID2 / 2, 1.0, spec.representation)


def test_gkls_vs_pauli_half_convention():
    doc = base_doc()
    rep_half = load_model_spec(doc).representation
    doc2 = base_doc()
    doc2["rate_convention"] = "gkls"
    for ch in doc2["channels"]:
        if ch["rate"]["preset"] == "constant":
            ch["rate"]["params"]["value"] = 0.5
        else:
            ch["rate"] = {"preset": "tanh", "params": {"scale": -0.5}}
    rep_gkls = load_model_spec(doc2).representation
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    for t in (0.0, 0.8, 2.3):
        assert np.max(np.abs(generator_apply(rep_half, t, rho)
                             - generator_apply(rep_gkls, t, rho))) < 1e-12


def test_schema_rejects_unknown_keys():
    doc = base_doc()
    doc["bogus"] = 1
    with pytest.raises(SchemaError):
        load_model_spec(doc)


def test_schema_rejects_bad_channel():
    doc = base_doc()
    doc["channels"][0]["lindblad"] = "pauli_q"
    with pytest.raises(SchemaError):
        load_model_spec(doc)


def test_schema_rejects_bad_rate_preset():
    doc = base_doc()
    doc["channels"][0]["rate"] = {"preset": "quadratic"}
    with pytest.raises(SchemaError):
        load_model_spec(doc)


def test_schema_rejects_pauli_half_without_paulis():
    doc = base_doc()
    doc["channels"][0]["lindblad"] = {"matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}
    with pytest.raises(SchemaError):
        load_model_spec(doc)


def test_initial_state_normalization():
    doc = base_doc()
    doc["initial_state"] = [[2.0, 0.0], [0.0, 0.0]]
    with pytest.warns(UserWarning):
        spec = load_model_spec(doc)
    assert np.linalg.norm(spec.initial_state) == pytest.approx(1.0)
    doc["initial_state"] = [[0.0, 0.0], [0.0, 0.0]]
    with pytest.raises(NormalizationError):
        load_model_spec(doc)


def test_load_from_json_string_and_path(tmp_path):
    text = json.dumps(base_doc())
    spec = load_model_spec(text)
    assert spec.name == "custom"
    p = tmp_path / "model.json"
    p.write_text(text)
    spec2 = resolve_model(str(p))
    assert spec2.name == "custom"
    with pytest.raises(SchemaError):
        resolve_model("no_such_model")


def test_rk4_trace_guard():
    # wildly too-large steps blow the trace; the integrator must say so
    rep = enm_model(50.0, 50.0, 50.0)
    with pytest.raises(StepInstability):
        integrate_master_equation(rep, projector(np.array([1.0, 0.0])),
                                  np.linspace(0.0, 5.0, 6))
