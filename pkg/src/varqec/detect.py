"""Error-detection gadgets and post-selected fidelity under depolarizing noise.

A gadget measures one or more Pauli operators through a syndrome ancilla
prepared in |+> (optionally guarded by a flag ancilla in |0>) and keeps
only runs with the expected outcomes. Ancillae are appended after the
data qubits and reused between sequential measurements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codes import LogicalTarget, StabilizerCode, min_weight_logical
from .pauli import PauliString
from .qsim import (DensityMatrix, Gate, NoiseModel, StateVector, fidelity,
                   project_ancilla, run_circuit)

VARIANTS = ("baseline", "stab-mean", "stab-mean-flagged", "logical-op",
            "logical-op-flagged", "full-set", "full-set-flagged")


class UnsupportedTarget(ValueError):
    pass


@dataclass(frozen=True)
class DetectionGadget:
    """Sequential measurements of ``measured_ops``; ``accept[k]`` is '+' or '-'.

    Flagged gadgets additionally require every flag ancilla to read 0.
    """

    kind: str
    measured_ops: tuple[PauliString, ...]
    accept: tuple[str, ...]
    flagged: bool = False

    @property
    def ancilla_count(self) -> int:
        return 2 if self.flagged else 1

    def rounds(self, n_data: int) -> list[list[Gate]]:
        """Gate list for each measurement; syndrome ancilla n_data, flag n_data+1."""
        return [measurement_gates(p, n_data, self.flagged) for p in self.measured_ops]

    @property
    def two_qubit_count(self) -> int:
        return sum(g.is_two_qubit for r in self.rounds(self.measured_ops[0].n_qubits)
                   for g in r)


def _controlled(letter: str, anc: int, q: int) -> list[Gate]:
    if letter == "X":
        return [Gate("CNOT", (anc, q))]
    if letter == "Z":
        return [Gate("CZ", (anc, q))]
    return [Gate("Sdg", (q,)), Gate("CNOT", (anc, q)), Gate("S", (q,))]


def measurement_gates(p: PauliString, n_data: int, flagged: bool) -> list[Gate]:
    anc, flag = n_data, n_data + 1
    support = p.support
    gates = [Gate("H", (anc,))]
    for k, q in enumerate(support):
        if flagged and k == len(support) - 1:
            gates.append(Gate("CNOT", (anc, flag)))
        gates += _controlled(p.letters[q], anc, q)
        if flagged and k == 0:
            gates.append(Gate("CNOT", (anc, flag)))
    return gates


def stabilizer_gadget(code: StabilizerCode, which: int, flagged: bool = False) -> DetectionGadget:
    if not 0 <= which < len(code.generators):
        raise IndexError(f"generator index {which} out of range")
    g = code.generators[which]
    return DetectionGadget("stabilizer-flagged" if flagged else "stabilizer", (g,), ("+",), flagged)


def full_stabilizer_gadget(code: StabilizerCode, flagged: bool = False) -> DetectionGadget:
    gens = tuple(code.generators)
    return DetectionGadget("full-stabilizer-set", gens, ("+",) * len(gens), flagged)


def logical_postselect_gadget(code: StabilizerCode, target: LogicalTarget,
                              flagged: bool = False, tol: float = 1e-9) -> DetectionGadget:
    """Measure the minimum-weight form of the logical Pauli stabilizing ``target``."""
    coeffs = target.bloch()
    axis = [k for k, c in enumerate(coeffs) if abs(abs(c) - 1) < tol]
    if len(axis) != 1:
        raise UnsupportedTarget(
            "target is not an eigenstate of a logical Pauli; use stabilizer gadgets instead")
    k = axis[0]
    logical = (code.logical_x, code.logical_y, code.logical_z)[k]
    rep = min_weight_logical(code, logical)
    eigen = int(np.sign(coeffs[k])) * rep.sign
    return DetectionGadget("logical-op", (rep.unsigned(),), ("+" if eigen > 0 else "-",), flagged)


@dataclass
class Evaluation:
    fidelity: float
    accept_prob: float


def evaluate(prep: Sequence[Gate], gadget: Optional[DetectionGadget], noise: NoiseModel,
             target: StateVector, n_prep: Optional[int] = None,
             initial: Optional[DensityMatrix] = None) -> Evaluation:
    """Noisy density-matrix run of ``prep`` followed by ``gadget``, post-selected.

    ``prep`` starts from |0...0> unless ``initial`` is given. Qubits of
    ``prep`` beyond the target's data qubits are treated as preparation
    ancillae: they are measured in the Z basis and must read 0.
    """
    n_data = target.n_qubits
    if initial is not None:
        n_prep = initial.n_qubits
    n_prep = n_data if n_prep is None else n_prep
    if initial is None:
        initial = DensityMatrix.zero(n_prep)
    rho = run_circuit(initial, prep, noise)
    accept = 1.0
    for q in reversed(range(n_data, n_prep)):
        rho, p = project_ancilla(rho, q, "Z", "0", noise.meas_error)
        accept *= p
    if gadget is not None:
        fresh = DensityMatrix.zero(gadget.ancilla_count)
        for gates, outcome in zip(gadget.rounds(n_data), gadget.accept):
            rho = run_circuit(rho.tensor(fresh), gates, noise)
            if gadget.flagged:
                rho, p = project_ancilla(rho, n_data + 1, "Z", "0", noise.meas_error)
                accept *= p
            rho, p = project_ancilla(rho, n_data, "X", outcome, noise.meas_error)
            accept *= p
    return Evaluation(fidelity(rho, target), accept)


def stabilizer_average(prep, code: StabilizerCode, noise: NoiseModel, target: StateVector,
                       flagged: bool = False, n_prep=None) -> tuple[list[Evaluation], Evaluation]:
    """Per-generator single-stabilizer evaluations and their mean."""
    per = [evaluate(prep, stabilizer_gadget(code, k, flagged), noise, target, n_prep)
           for k in range(len(code.generators))]
    mean = Evaluation(float(np.mean([e.fidelity for e in per])),
                      float(np.mean([e.accept_prob for e in per])))
    return per, mean


def evaluate_variant(variant: str, prep, code: StabilizerCode, target: LogicalTarget,
                     target_state: StateVector, noise: NoiseModel, n_prep=None) -> Evaluation:
    """One noise-sweep point. Raises UnsupportedTarget for logical-op on non-Pauli targets."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    flagged = variant.endswith("-flagged")
    if variant == "baseline":
        gadget = None
    elif variant.startswith("stab-mean"):
        return stabilizer_average(prep, code, noise, target_state, flagged, n_prep)[1]
    elif variant.startswith("logical-op"):
        gadget = logical_postselect_gadget(code, target, flagged)
    else:
        gadget = full_stabilizer_gadget(code, flagged)
    return evaluate(prep, gadget, noise, target_state, n_prep)

