"""Parameterized circuits: random block ansatz, binding, derivatives, pruning.

Every rotation gate owns one parameter slot; slots are numbered in
circuit order, so ``theta[k]`` always belongs to the k-th rotation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .pauli import SINGLE
from .qsim import TWO_QUBIT, Gate, rotation_matrix, StateVector, apply_matrix, apply_gate_vecs

INIT_WIDTH = 0.05
PRUNE_THRESHOLD = 1e-2


@dataclass(frozen=True)
class ConstraintSet:
    """Hardware constraints for ansatz generation.

    ``coupling=None`` means all-to-all. ``n_ancilla`` extra qubits are
    appended after the data qubits and take part in blocks like any
    other qubit.
    """

    allowed_two_qubit: tuple[str, ...] = ("CZ",)
    coupling: Optional[tuple[tuple[int, int], ...]] = None
    max_two_qubit: int = 5
    n_ancilla: int = 0

    def __post_init__(self):
        object.__setattr__(self, "allowed_two_qubit", tuple(self.allowed_two_qubit))
        bad = set(self.allowed_two_qubit) - TWO_QUBIT
        if bad:
            raise ValueError(f"not two-qubit gate kinds: {sorted(bad)}")
        if self.coupling is not None:
            object.__setattr__(self, "coupling",
                               tuple((int(a), int(b)) for a, b in self.coupling))
        if self.max_two_qubit < 0:
            raise ValueError("max_two_qubit must be >= 0")
        if self.n_ancilla not in (0, 1):
            raise ValueError("n_ancilla must be 0 or 1")

    def pairs(self, n_qubits: int) -> list[tuple[int, int]]:
        if self.coupling is None:
            return [(a, b) for a in range(n_qubits) for b in range(a + 1, n_qubits)]
        for a, b in self.coupling:
            if not (0 <= a < n_qubits and 0 <= b < n_qubits) or a == b:
                raise ValueError(f"coupling pair {(a, b)} invalid for {n_qubits} qubits")
        return list(self.coupling)

    def allows(self, circuit: "ParamCircuit") -> bool:
        pairs = {frozenset(p) for p in self.pairs(circuit.n_qubits)}
        two = [g for g in circuit.gates if g.is_two_qubit]
        return (len(two) <= self.max_two_qubit
                and all(g.kind in self.allowed_two_qubit for g in two)
                and all(frozenset(g.qubits) in pairs for g in two))


def nearest_neighbour_line(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((q, q + 1) for q in range(n - 1))


@dataclass(frozen=True)
class ParamCircuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_ancilla: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        slots = [g.slot for g in self.gates if g.is_rotation]
        if slots != list(range(len(slots))):
            raise ValueError("rotation slots must be numbered 0..m-1 in circuit order")
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} out of range for {self.n_qubits} qubits")

    @property
    def n_params(self) -> int:
        return sum(g.is_rotation for g in self.gates)

    @property
    def two_qubit_count(self) -> int:
        return sum(g.is_two_qubit for g in self.gates)

    @property
    def n_data(self) -> int:
        return self.n_qubits - self.n_ancilla

    @classmethod
    def from_gates(cls, n_qubits: int, gates: Sequence[Gate], n_ancilla: int = 0):
        """Build a circuit, (re)numbering rotation slots in order."""
        out, k = [], 0
        for g in gates:
            if g.is_rotation:
                g = replace(g, slot=k, param=None)
                k += 1
            out.append(g)
        return cls(n_qubits, tuple(out), n_ancilla)

    def without(self, index: int) -> "ParamCircuit":
        gates = self.gates[:index] + self.gates[index + 1:]
        return ParamCircuit.from_gates(self.n_qubits, gates, self.n_ancilla)


def _rzyz(q: int) -> list[Gate]:
    return [Gate("Rz", (q,)), Gate("Ry", (q,)), Gate("Rz", (q,))]


def generate(constraints: ConstraintSet, n_data: int, k_blocks: int,
             seed=None) -> ParamCircuit:
    """Random ansatz: an Rz-Ry-Rz layer on every qubit, then ``k_blocks`` blocks.

    Each block is one two-qubit gate on a uniformly chosen allowed pair
    with a uniformly chosen allowed kind, followed by Rz-Ry-Rz on both
    qubits it touched.
    """
    if k_blocks > constraints.max_two_qubit:
        raise ValueError(f"k_blocks={k_blocks} exceeds budget {constraints.max_two_qubit}")
    n = n_data + constraints.n_ancilla
    pairs = constraints.pairs(n)
    if k_blocks and not constraints.allowed_two_qubit:
        raise ValueError("no two-qubit gate kinds allowed")
    if k_blocks and not pairs:
        raise ValueError("coupling graph is empty")
    rng = np.random.default_rng(seed)
    gates: list[Gate] = []
    for q in range(n):
        gates += _rzyz(q)
    for _ in range(k_blocks):
        a, b = pairs[rng.integers(len(pairs))]
        kind = constraints.allowed_two_qubit[rng.integers(len(constraints.allowed_two_qubit))]
        gates.append(Gate(kind, (a, b)))
        gates += _rzyz(a) + _rzyz(b)
    return ParamCircuit.from_gates(n, gates, constraints.n_ancilla)


def initial_params(circuit: ParamCircuit, rng, width: float = INIT_WIDTH) -> np.ndarray:
    return np.random.default_rng(rng).uniform(-width, width, circuit.n_params)


def bind(circuit: ParamCircuit, theta) -> tuple[Gate, ...]:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {theta.shape}")
    return tuple(g.bound(theta[g.slot]) if g.is_rotation else g for g in circuit.gates)


def simulate(circuit: ParamCircuit, theta) -> StateVector:
    n = circuit.n_qubits
    vec = StateVector.zero(n).amps[None]
    for g in bind(circuit, theta):
        vec = apply_gate_vecs(vec, g, n)
    return StateVector(n, vec[0])


@dataclass(frozen=True)
class DerivativeFactor:
    index: int
    letter: str
    qubit: int
    factor: complex = -0.5j


def derivative_state(circuit: ParamCircuit, theta, i: int) -> tuple[StateVector, DerivativeFactor]:
    """|phi_i> with the generator of rotation ``i`` inserted after it.

    d|psi>/d theta_i = factor * |phi_i>.
    """
    if not 0 <= i < circuit.n_params:
        raise IndexError(f"parameter index {i} out of range")
    n = circuit.n_qubits
    vec = StateVector.zero(n).amps[None]
    info = None
    for g in bind(circuit, theta):
        vec = apply_gate_vecs(vec, g, n)
        if g.is_rotation and g.slot == i:
            info = DerivativeFactor(i, g.generator, g.qubits[0])
            vec = apply_matrix(vec, SINGLE[info.letter], g.qubits, n)
    return StateVector(n, vec[0]), info


def wrapped(theta) -> np.ndarray:
    """Angles mapped to (-pi, pi]."""
    return -np.remainder(-np.asarray(theta) + np.pi, 2 * np.pi) + np.pi


# reoptimize(circuit, theta) -> (theta, energy)
Reoptimizer = Callable[[ParamCircuit, np.ndarray], tuple[np.ndarray, float]]


@dataclass
class PruneLog:
    removed_rotations: int = 0
    removed_two_qubit: int = 0
    trials: int = 0


def prune(circuit: ParamCircuit, theta, success_energy: float,
          reoptimize: Reoptimizer, threshold: float = PRUNE_THRESHOLD,
          two_qubit: bool = True, log: Optional[PruneLog] = None):
    """Remove gates while the re-optimized energy stays at or below ``success_energy``.

    Rotations closest to zero go first, one at a time; the first removal
    that fails is reverted and ends that phase. Two-qubit gates are then
    tried one by one (last first); any success restarts rotation pruning.
    """
    log = log if log is not None else PruneLog()
    theta = np.asarray(theta, dtype=float)
    while True:
        circuit, theta = _prune_rotations(circuit, theta, success_energy,
                                          reoptimize, threshold, log)
        if not two_qubit:
            return circuit, theta
        for idx in reversed([k for k, g in enumerate(circuit.gates) if g.is_two_qubit]):
            cand = circuit.without(idx)
            log.trials += 1
            new_theta, e = reoptimize(cand, theta.copy())
            if e <= success_energy:
                circuit, theta = cand, new_theta
                log.removed_two_qubit += 1
                break
        else:
            return circuit, theta


def _prune_rotations(circuit, theta, success_energy, reoptimize, threshold, log):
    while True:
        dist = np.abs(wrapped(theta))
        order = [k for k in np.argsort(dist, kind="stable") if dist[k] < threshold]
        if not order:
            return circuit, theta
        slot = int(order[0])
        idx = next(k for k, g in enumerate(circuit.gates) if g.is_rotation and g.slot == slot)
        cand = circuit.without(idx)
        log.trials += 1
        new_theta, e = reoptimize(cand, np.delete(theta, slot))
        if e > success_energy:
            return circuit, theta
        circuit, theta = cand, new_theta
        log.removed_rotations += 1


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(a, b, c) with u = phase * Rz(a) @ Ry(b) @ Rz(c)."""
    u = u / np.sqrt(complex(np.linalg.det(u)))
    b = 2 * np.arctan2(abs(u[1, 0]), abs(u[0, 0]))
    plus = 2 * np.angle(u[1, 1]) if abs(u[1, 1]) > 1e-12 else 0.0
    minus = 2 * np.angle(u[1, 0]) if abs(u[1, 0]) > 1e-12 else 0.0
    if abs(u[1, 1]) <= 1e-12:
        # b = pi: only a - c is defined
        return minus, float(b), 0.0
    if abs(u[1, 0]) <= 1e-12:
        return plus, float(b), 0.0
    return (plus + minus) / 2, float(b), (plus - minus) / 2


# single-qubit rotation axis that commutes with each two-qubit gate, per operand
_COMMUTING_AXIS = {"CZ": ("Z", "Z"), "CNOT": ("Z", "X"), "MS": ("X", "X")}
_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def simplify(circuit: ParamCircuit, theta, tol: float = 1e-9):
    """Exact single-qubit cleanup; returns an equivalent (circuit, theta) up to global phase.

    Consecutive one-qubit gates on a qubit are fused and re-emitted as at
    most three rotations with identity angles dropped. A qubit still in
    |0> needs at most two. The last rotation is carried through a
    two-qubit gate when it commutes with it (Rz through CZ and CNOT
    controls, Rx through CNOT targets and MS). Two-qubit gates are kept.
    """
    n = circuit.n_qubits
    pending = [np.eye(2, dtype=complex) for _ in range(n)]
    fresh = [True] * n
    out: list[tuple[Gate, Optional[float]]] = []

    def emit(q, letter, angle):
        if abs(wrapped(angle)) > tol:
            out.append((Gate(f"R{letter.lower()}", (q,)), float(angle)))

    def nonzero(*angles):
        return sum(abs(wrapped(a)) > tol for a in angles)

    def decompose(q, frame):
        """(first, mid, last) with pending = R_frame(last) Ry(mid) R_frame(first)."""
        u = pending[q]
        if fresh[q]:
            first, mid, last = _prep_angles(u[:, 0], frame)
            if frame == "Z" and abs(wrapped(mid)) <= tol:
                last = 0.0  # Rz on |0> is a phase
            return first, mid, last
        last, mid, first = zyz_angles(u if frame == "Z" else _H @ u @ _H)
        if abs(wrapped(mid)) <= tol:
            return 0.0, 0.0, last + first
        return first, (mid if frame == "Z" else -mid), last

    def flush(q, axis: Optional[str]):
        full = min((nonzero(*decompose(q, f)), f != (axis or "Z"), f) for f in ("Z", "X"))
        if axis is not None:
            first, mid, last = decompose(q, axis)
            if nonzero(first, mid) + nonzero(last) <= full[0]:
                emit(q, axis, first)
                emit(q, "Y", mid)
                pending[q] = rotation_matrix(axis, last)
                return
        frame = full[2]
        first, mid, last = decompose(q, frame)
        emit(q, frame, first)
        emit(q, "Y", mid)
        emit(q, frame, last)
        pending[q] = np.eye(2, dtype=complex)

    for g, angle in zip(circuit.gates, _angles(circuit, theta)):
        if not g.is_two_qubit:
            q = g.qubits[0]
            m = g.bound(angle).matrix() if g.is_rotation else g.matrix()
            pending[q] = m @ pending[q]
            continue
        axes = _COMMUTING_AXIS.get(g.kind, (None, None))
        for q, axis in zip(g.qubits, axes):
            flush(q, axis)
            fresh[q] = False
        out.append((g, None))
    for q in range(n):
        flush(q, None)
    gates = [g for g, _ in out]
    new = ParamCircuit.from_gates(n, gates, circuit.n_ancilla)
    return new, np.array([a for g, a in out if g.is_rotation], dtype=float)


def _prep_angles(v: np.ndarray, axis: str) -> tuple[float, float, float]:
    """(0, b, a) with v = phase * R_axis(a) Ry(b) |0>."""
    x = 2 * np.real(np.conj(v[0]) * v[1])
    y = 2 * np.imag(np.conj(v[0]) * v[1])
    z = abs(v[0]) ** 2 - abs(v[1]) ** 2
    if axis == "Z":
        return 0.0, float(np.arccos(np.clip(z, -1, 1))), float(np.arctan2(y, x))
    return 0.0, float(np.arctan2(x, np.hypot(y, z))), float(np.arctan2(-y, z))


def _angles(circuit: ParamCircuit, theta):
    theta = np.asarray(theta, dtype=float)
    return [theta[g.slot] if g.is_rotation else None for g in circuit.gates]


# ---------------------------------------------------------------- JSON

def circuit_to_json(circuit: ParamCircuit, theta=None) -> str:
    """One gate per line; bound angles are written with 17 significant digits."""
    gates = circuit.gates if theta is None else bind(circuit, theta)
    lines = []
    for g in gates:
        head = f'{{"kind": "{g.kind}", "qubits": {json.dumps(list(g.qubits))}'
        if g.is_rotation:
            if theta is None:
                head += f', "param_slot": {g.slot}'
            else:
                head += f', "angle": {g.param:.17g}'
        lines.append(head + "}")
    body = ",\n    ".join(lines)
    extra = f', "n_ancilla": {circuit.n_ancilla}' if circuit.n_ancilla else ""
    return (f'{{"n_qubits": {circuit.n_qubits}{extra}, "gates": [\n    {body}\n]}}\n'
            if lines else f'{{"n_qubits": {circuit.n_qubits}{extra}, "gates": []}}\n')


def circuit_from_json(text: str) -> tuple[ParamCircuit, Optional[np.ndarray]]:
    """Parse circuit JSON; returns theta when every rotation carries an angle."""
    doc = json.loads(text)
    if not isinstance(doc, dict) or "n_qubits" not in doc or "gates" not in doc:
        raise ValueError("circuit JSON needs 'n_qubits' and 'gates'")
    gates, angles = [], []
    n_bound = n_slots = 0
    for k, item in enumerate(doc["gates"]):
        kind, qubits = item.get("kind"), item.get("qubits")
        if kind is None or qubits is None:
            raise ValueError(f"gates[{k}]: needs 'kind' and 'qubits'")
        g = Gate(kind, tuple(qubits))
        if g.is_rotation:
            if "angle" in item:
                angles.append(float(item["angle"]))
                n_bound += 1
            elif "param_slot" in item:
                n_slots += 1
            else:
                raise ValueError(f"gates[{k}]: rotation needs 'angle' or 'param_slot'")
        gates.append(g)
    if n_bound and n_slots:
        raise ValueError("circuit mixes bound angles and parameter slots")
    circuit = ParamCircuit.from_gates(int(doc["n_qubits"]), gates, int(doc.get("n_ancilla", 0)))
    theta = np.array(angles) if n_bound or not circuit.n_params else None
    return circuit, theta


def save_circuit(path, circuit: ParamCircuit, theta=None):
    Path(path).write_text(circuit_to_json(circuit, theta))


def load_circuit(path):
    return circuit_from_json(Path(path).read_text())


def gate_listing(circuit: ParamCircuit, theta) -> str:
    rows = []
    for k, g in enumerate(bind(circuit, theta)):
        qs = ",".join(f"q{q}" for q in g.qubits)
        name = f"{g.kind}({g.param:+.6f})" if g.is_rotation else g.kind
        rows.append(f"{k:4d}  {name:<18s} {qs}")
    return "\n".join(rows) + "\n"
