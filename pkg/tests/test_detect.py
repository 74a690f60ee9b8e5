from pathlib import Path

import numpy as np
import pytest

from varqec.ansatz import bind, load_circuit
from varqec.codes import BUILTIN, LogicalTarget, five_qubit_code, steane_code, target_state
from varqec.detect import (VARIANTS, UnsupportedTarget, evaluate, evaluate_variant,
                           full_stabilizer_gadget, logical_postselect_gadget, measurement_gates,
                           stabilizer_average, stabilizer_gadget)
from varqec.pauli import PauliString
from varqec.qsim import Gate, NoiseModel, StateVector, ZeroProbabilityError

DATA = Path(__file__).parent / "data"

PAULI_TARGETS = ["zero", "one", "plus", "minus", "plus_i", "minus_i"]


def _all_gadgets(code, target):
    gadgets = [None, full_stabilizer_gadget(code), full_stabilizer_gadget(code, flagged=True)]
    for k in range(len(code.generators)):
        gadgets += [stabilizer_gadget(code, k), stabilizer_gadget(code, k, flagged=True)]
    if target in PAULI_TARGETS:
        t = LogicalTarget.named(target)
        gadgets += [logical_postselect_gadget(code, t), logical_postselect_gadget(code, t, True)]
    return gadgets


@pytest.mark.parametrize("name", sorted(BUILTIN))
@pytest.mark.parametrize("target", ["zero", "minus", "plus_i", "magic"])
def test_gadget_transparency(name, target):
    code = BUILTIN[name]()
    ts = target_state(code, LogicalTarget.named(target))
    for gadget in _all_gadgets(code, target):
        ev = evaluate([], gadget, NoiseModel(0.0), ts, initial=ts.to_density())
        assert ev.fidelity == pytest.approx(1, abs=1e-10)
        assert ev.accept_prob == pytest.approx(1, abs=1e-10)


def test_measurement_circuit_shapes():
    p = PauliString("XZZXI")
    plain = measurement_gates(p, 5, flagged=False)
    assert [g.kind for g in plain] == ["H", "CNOT", "CZ", "CZ", "CNOT"]
    assert all(g.qubits[0] == 5 for g in plain if g.is_two_qubit)
    flagged = measurement_gates(p, 5, flagged=True)
    kinds = [(g.kind, g.qubits) for g in flagged]
    assert kinds == [("H", (5,)), ("CNOT", (5, 0)), ("CNOT", (5, 6)), ("CZ", (5, 1)),
                     ("CZ", (5, 2)), ("CNOT", (5, 6)), ("CNOT", (5, 3))]
    y = measurement_gates(PauliString("YI"), 2, flagged=False)
    assert [g.kind for g in y] == ["H", "Sdg", "CNOT", "S"]


def test_logical_gadget_is_weight_three():
    five = five_qubit_code()
    g = logical_postselect_gadget(five, LogicalTarget.named("minus"))
    assert g.measured_ops[0].weight == 3
    assert g.two_qubit_count == 3
    # X_L ~ -IIZXZ, so |-> (X_L = -1) reads + on the unsigned operator
    assert g.accept == ("+",)
    with pytest.raises(UnsupportedTarget):
        logical_postselect_gadget(five, LogicalTarget.named("magic"))


def test_gadget_counts():
    steane = steane_code()
    full = full_stabilizer_gadget(steane, flagged=True)
    assert full.ancilla_count == 2
    assert full.two_qubit_count == 6 * (4 + 2)
    assert len(full.rounds(7)) == 6
    with pytest.raises(IndexError):
        stabilizer_gadget(steane, 6)


def test_wrong_logical_state_is_rejected():
    code = five_qubit_code()
    plus = target_state(code, LogicalTarget.named("plus"))
    minus = target_state(code, LogicalTarget.named("minus"))
    gadget = logical_postselect_gadget(code, LogicalTarget.named("minus"))
    with pytest.raises(ZeroProbabilityError):
        evaluate([], gadget, NoiseModel(0.0), minus, initial=plus.to_density())


def test_prep_ancilla_is_postselected():
    # Ry(pi/2) then CNOT onto a prep ancilla: keeping ancilla = 0 leaves |0>
    prep = [Gate("Ry", (0,), param=np.pi / 2), Gate("CNOT", (0, 1))]
    ev = evaluate(prep, None, NoiseModel(0.0), StateVector.zero(1), n_prep=2)
    assert ev.accept_prob == pytest.approx(0.5)
    assert ev.fidelity == pytest.approx(1)


@pytest.fixture(scope="module")
def minus_setup():
    code = five_qubit_code()
    t = LogicalTarget.named("minus")
    circuit, theta = load_circuit(DATA / "five_minus_cz5.json")
    return code, t, target_state(code, t), bind(circuit, theta)


def test_reference_encoder_is_accurate(minus_setup):
    code, t, ts, prep = minus_setup
    ev = evaluate(prep, None, NoiseModel(0.0), ts)
    assert ev.fidelity > 1 - 5e-4


def test_small_noise_detection_helps(minus_setup):
    code, t, ts, prep = minus_setup
    noise = NoiseModel(0.01)
    base = evaluate(prep, None, noise, ts)
    logical = evaluate(prep, logical_postselect_gadget(code, t), noise, ts)
    assert logical.fidelity > base.fidelity
    assert base.accept_prob == 1.0


def test_deep_decoherence(minus_setup):
    code, t, ts, prep = minus_setup
    assert evaluate(prep, None, NoiseModel(0.5), ts).fidelity < 0.5


def test_stabilizer_average_exposes_each_generator(minus_setup):
    code, t, ts, prep = minus_setup
    per, mean = stabilizer_average(prep, code, NoiseModel(0.01), ts)
    assert len(per) == 4
    assert mean.fidelity == pytest.approx(np.mean([e.fidelity for e in per]))
    assert mean.accept_prob == pytest.approx(np.mean([e.accept_prob for e in per]))
    single = evaluate(prep, stabilizer_gadget(code, 2), NoiseModel(0.01), ts)
    assert per[2].fidelity == single.fidelity


@pytest.fixture(scope="module")
def steane_magic_setup():
    code = steane_code()
    t = LogicalTarget.named("magic")
    circuit, theta = load_circuit(DATA / "steane_magic_cnot10.json")
    return code, t, target_state(code, t), bind(circuit, theta)


@pytest.mark.parametrize("r", [0.001, 0.005, 0.01])
def test_full_set_beats_baseline_at_small_noise(minus_setup, steane_magic_setup, r):
    for code, t, ts, prep in (minus_setup, steane_magic_setup):
        noise = NoiseModel(r)
        base = evaluate_variant("baseline", prep, code, t, ts, noise)
        full = evaluate_variant("full-set", prep, code, t, ts, noise)
        assert full.fidelity >= base.fidelity


def test_variant_names_and_errors(minus_setup):
    code, t, ts, _ = minus_setup
    assert len(VARIANTS) == 7
    with pytest.raises(ValueError):
        evaluate_variant("nope", [], code, t, ts, NoiseModel(0.0))
    with pytest.raises(UnsupportedTarget):
        evaluate_variant("logical-op", [], code, LogicalTarget.named("magic"), ts,
                         NoiseModel(0.0))


def test_full_set_accept_prob_decreases_with_noise(minus_setup):
    code, t, ts, prep = minus_setup
    gadget = full_stabilizer_gadget(code, flagged=True)
    probs = [evaluate(prep, gadget, NoiseModel(r), ts).accept_prob for r in np.linspace(0, 0.1, 6)]
    assert all(b <= a + 1e-9 for a, b in zip(probs, probs[1:]))
