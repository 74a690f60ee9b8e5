import numpy as np
import pytest

from varqec.codes import BUILTIN, LogicalTarget, five_qubit_code, steane_code, target_state
from varqec.hamiltonian import (SpectrumError, build, energy, energy_by_terms,
                                fidelity_lower_bound, ground_state_exact, spectrum)
from varqec.qsim import DensityMatrix, StateVector, fidelity

from conftest import random_density, random_state

TARGETS = ["zero", "one", "plus", "minus", "plus_i", "magic"]


def test_five_qubit_spectrum():
    h = build(five_qubit_code(), LogicalTarget.named("zero"))
    vals = spectrum(h)
    assert vals[0] == pytest.approx(-1, abs=1e-9)
    assert vals[1] == pytest.approx(-0.6, abs=1e-9)
    assert vals[1] - vals[0] > 0.1
    assert h.e0 == pytest.approx(-1) and h.e1 == pytest.approx(-0.6)
    assert len(h.terms) == 5


def test_steane_spectrum():
    h = build(steane_code(), LogicalTarget.named("zero"))
    vals = spectrum(h)
    assert vals[0] == pytest.approx(-1, abs=1e-9)
    assert vals[1] == pytest.approx(-5 / 7, abs=1e-9)


def test_magic_has_two_logical_terms():
    h = build(five_qubit_code(), LogicalTarget.named("magic"))
    assert len(h.terms) == 6
    assert spectrum(h)[1] == pytest.approx(-0.6, abs=1e-9)


@pytest.mark.parametrize("name", sorted(BUILTIN))
@pytest.mark.parametrize("target", TARGETS)
def test_ground_state_is_target(name, target):
    code = BUILTIN[name]()
    t = LogicalTarget.named(target)
    h = build(code, t)
    g, e0 = ground_state_exact(h)
    assert e0 == pytest.approx(-1, abs=1e-9)
    assert abs(np.vdot(g.amps, target_state(code, t).amps)) == pytest.approx(1, abs=1e-10)


def test_custom_coefficients():
    h = build(five_qubit_code(), LogicalTarget.named("zero"), coeffs=[1, 2, 1, 1, 0.5])
    vals = spectrum(h)
    assert h.e0 == pytest.approx(-5.5) and vals[0] == pytest.approx(-5.5)
    assert h.e1 == pytest.approx(-4.5) and vals[1] == pytest.approx(-4.5)
    with pytest.raises(ValueError):
        build(five_qubit_code(), LogicalTarget.named("zero"), coeffs=[1, 1, 1, 1, 0])
    with pytest.raises(ValueError):
        build(five_qubit_code(), LogicalTarget.named("zero"), coeffs=[1, 1])


def test_ancilla_term():
    h = build(five_qubit_code(), LogicalTarget.named("minus"), n_ancilla=1)
    assert h.n_qubits == 6 and len(h.terms) == 6
    vals = spectrum(h)
    assert vals[0] == pytest.approx(-1) and vals[1] == pytest.approx(h.e1)
    g, _ = ground_state_exact(h)
    anc_one = g.amps.reshape(32, 2)[:, 1]
    assert np.linalg.norm(anc_one) < 1e-10


def test_degenerate_spectrum_is_rejected():
    h = build(five_qubit_code(), LogicalTarget.named("zero"))
    # drop the logical term: the code space is two-fold degenerate
    object.__setattr__(h, "terms", h.terms[:4])
    h.__dict__.pop("matrix", None)
    with pytest.raises(SpectrumError):
        ground_state_exact(h)


def test_energy_examples(rng):
    h = build(five_qubit_code(), LogicalTarget.named("minus"))
    # every term of this H flips some bit, so |00000> has zero energy
    assert energy(StateVector.zero(5), h) == pytest.approx(0, abs=1e-12)
    psi = StateVector(5, random_state(rng, 5))
    assert energy(psi, h) == pytest.approx(energy_by_terms(psi, h), abs=1e-12)
    rho = DensityMatrix(5, random_density(rng, 5))
    assert energy(rho, h) == pytest.approx(energy_by_terms(rho, h), abs=1e-12)
    assert energy(target_state(five_qubit_code(), LogicalTarget.named("minus")), h) == \
        pytest.approx(-1, abs=1e-12)
    with pytest.raises(ValueError):
        energy(StateVector.zero(4), h)


def test_fidelity_bound_examples():
    h = build(five_qubit_code(), LogicalTarget.named("zero"))
    assert fidelity_lower_bound(-1.0, h) == 1.0
    assert fidelity_lower_bound(-0.9999, h) == pytest.approx(0.99975)
    assert fidelity_lower_bound(-0.6, h) == 0.0
    assert fidelity_lower_bound(-0.3, h) == 0.0
    with pytest.raises(ValueError):
        fidelity_lower_bound(-1.1, h)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_fidelity_bound_soundness(name, rng):
    code = BUILTIN[name]()
    h = build(code, LogicalTarget.named("zero"))
    vals, vecs = np.linalg.eigh(h.matrix)
    g = vecs[:, 0]
    excited = vecs[:, np.abs(vals - h.e1) < 1e-9]
    checked = 0
    while checked < 200:
        if rng.uniform() < 0.5:
            # first excited manifold only: the bound is tight here
            other = excited @ (rng.normal(size=excited.shape[1]) + 0j)
        else:
            other = random_state(rng, code.n_qubits)
        other = other - np.vdot(g, other) * g
        other /= np.linalg.norm(other)
        eps = rng.uniform(0, 0.6)
        psi = StateVector(code.n_qubits, np.sqrt(1 - eps) * g
                          + np.sqrt(eps) * np.exp(1j * rng.uniform(0, 6.3)) * other)
        e = energy(psi, h)
        if not h.e0 <= e <= h.e1:
            continue
        assert fidelity(psi.to_density(), StateVector(code.n_qubits, g)) >= \
            fidelity_lower_bound(e, h) - 1e-9
        checked += 1
