"""Pauli Hamiltonians whose unique ground state is a logical target."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .codes import LogicalTarget, StabilizerCode, fix_phase, logical_operator, require_valid
from .pauli import PauliString
from .qsim import State, StateVector, expectation


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class PauliHamiltonian:
    """H = sum_k coeff_k P_k.

    Stabilizer terms commute with everything; the logical terms together
    form one observable with eigenvalues +-1. ``e0`` and ``e1`` are the analytic ground and first-excited energies,
    ``gap`` is c = e1 - e0.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]
    e0: float
    e1: float

    @property
    def gap(self) -> float:
        return self.e1 - self.e0

    @cached_property
    def matrix(self) -> np.ndarray:
        d = 2**self.n_qubits
        mat = np.zeros((d, d), dtype=complex)
        for c, p in self.terms:
            mat += c * p.to_matrix()
        return mat

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        """H acting on the last axis of ``vecs``."""
        return vecs @ self.matrix.T

    def extended(self, n_total: int) -> "PauliHamiltonian":
        """Pad every term with identities on extra trailing qubits."""
        pad = "I" * (n_total - self.n_qubits)
        terms = tuple((c, PauliString(p.letters + pad, p.phase)) for c, p in self.terms)
        return PauliHamiltonian(n_total, terms, self.e0, self.e1)


def build(code: StabilizerCode, target: LogicalTarget,
          coeffs: Optional[Sequence[float]] = None,
          n_ancilla: int = 0) -> PauliHamiltonian:
    """H = -sum_i c_i g_i - c_o O_L.

    With ``coeffs=None`` every coefficient is 1/n_terms so that E0 = -1.
    Otherwise ``coeffs`` lists one positive weight per generator followed
    by the logical weight c_o. An ancilla (``n_ancilla=1``) appends the
    term -c_a Z_anc pinning it to |0>; in uniform mode it counts as one
    more term.
    """
    require_valid(code)
    gens = list(code.generators)
    n_terms = len(gens) + 1 + n_ancilla
    if coeffs is None:
        cs = [1.0 / n_terms] * n_terms
    else:
        cs = [float(c) for c in coeffs]
        if len(cs) != n_terms:
            raise ValueError(f"expected {n_terms} coefficients, got {len(cs)}")
        if any(c <= 0 for c in cs):
            raise ValueError("Hamiltonian coefficients must be positive")
    n = code.n_qubits + n_ancilla
    pad = "I" * n_ancilla
    c_o = cs[len(gens)]
    terms = [(-c, PauliString(g.letters + pad)) for c, g in zip(cs, gens)]
    for w, p in logical_operator(code, target):
        sign = p.sign
        terms.append((-c_o * w * sign, PauliString(p.letters + pad)))
    if n_ancilla:
        terms.append((-cs[-1], PauliString("I" * code.n_qubits + "Z")))
    e0 = -sum(cs)
    e1 = e0 + 2 * min(cs)
    return PauliHamiltonian(n, tuple(terms), e0, e1)


def energy(state: State, h: PauliHamiltonian) -> float:
    if state.n_qubits != h.n_qubits:
        raise ValueError("state and Hamiltonian act on different qubit counts")
    if isinstance(state, StateVector):
        return float(np.real(np.vdot(state.amps, h.apply(state.amps))))
    return float(np.real(np.sum(state.rho * h.matrix.T)))


def energy_by_terms(state: State, h: PauliHamiltonian) -> float:
    return sum(c * expectation(state, p) for c, p in h.terms)


def fidelity_lower_bound(e: float, h: PauliHamiltonian) -> float:
    """1 - (E - E0)/c, clamped to 0 above E1.

    Raises ValueError for energies below the ground energy, which can
    only come from a simulation bug.
    """
    if e < h.e0 - 1e-9:
        raise ValueError(f"energy {e} lies below the ground energy {h.e0}")
    if e >= h.e1:
        return 0.0
    return min(1.0, 1.0 - (e - h.e0) / h.gap)


def ground_state_exact(h: PauliHamiltonian) -> tuple[StateVector, float]:
    """Full diagonalization; checks E0 and ground-space uniqueness."""
    vals, vecs = np.linalg.eigh(h.matrix)
    if vals[1] - vals[0] < 1e-9:
        raise SpectrumError(f"ground space is degenerate (E0={vals[0]}, next={vals[1]})")
    if abs(vals[0] - h.e0) > 1e-9:
        raise SpectrumError(f"diagonalized E0={vals[0]} differs from analytic {h.e0}")
    return StateVector(h.n_qubits, fix_phase(vecs[:, 0])), float(vals[0])


def spectrum(h: PauliHamiltonian) -> np.ndarray:
    return np.linalg.eigvalsh(h.matrix)
