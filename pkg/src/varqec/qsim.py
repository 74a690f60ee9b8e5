"""Dense statevector and density-matrix simulation.

States are plain numpy arrays wrapped in light containers. The batched
kernels (``apply_matrix``, ``apply_gate_vecs``, ``apply_gate_rhos``,
``depolarize_rhos``) act on a leading batch axis and are what the
variational solver uses to propagate many derivative states at once.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .pauli import SINGLE, PauliString

MAX_QUBITS = 10

ROTATIONS = {"Rx": "X", "Ry": "Y", "Rz": "Z"}
ONE_QUBIT_FIXED = {"H", "X", "Y", "Z", "S", "Sdg"}
TWO_QUBIT = {"CNOT", "CZ", "SqrtSwap", "MS"}
GATE_KINDS = set(ROTATIONS) | ONE_QUBIT_FIXED | TWO_QUBIT


class ZeroProbabilityError(ValueError):
    """Raised when a post-selected branch has (numerically) zero weight."""

    def __init__(self, prob: float):
        super().__init__(f"post-selection branch has probability {prob:.3e}")
        self.prob = prob


@dataclass(frozen=True)
class Gate:
    """A gate on one or two qubits.

    Rotation gates carry either a bound angle ``param`` or a parameter
    ``slot`` into a parameter vector (see :mod:`varqec.ansatz`).
    """

    kind: str
    qubits: tuple[int, ...]
    param: Optional[float] = None
    slot: Optional[int] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.kind} needs two distinct qubits")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in TWO_QUBIT

    @property
    def generator(self) -> str:
        return ROTATIONS[self.kind]

    def bound(self, angle: float) -> "Gate":
        return replace(self, param=float(angle))

    def matrix(self) -> np.ndarray:
        if self.is_rotation:
            if self.param is None:
                raise ValueError(f"rotation {self.kind} on {self.qubits} has no bound angle")
            return rotation_matrix(self.generator, self.param)
        return _fixed_matrix(self.kind)


def rotation_matrix(letter: str, theta: float) -> np.ndarray:
    """exp(-i theta P / 2)."""
    return np.cos(theta / 2) * SINGLE["I"] - 1j * np.sin(theta / 2) * SINGLE[letter]


@lru_cache(maxsize=None)
def _fixed_matrix(kind: str) -> np.ndarray:
    s2 = 1 / np.sqrt(2)
    if kind == "H":
        m = s2 * np.array([[1, 1], [1, -1]], dtype=complex)
    elif kind in ("X", "Y", "Z"):
        m = SINGLE[kind].copy()
    elif kind == "S":
        m = np.diag([1, 1j]).astype(complex)
    elif kind == "Sdg":
        m = np.diag([1, -1j]).astype(complex)
    elif kind == "CNOT":
        m = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    elif kind == "CZ":
        m = np.diag([1, 1, 1, -1]).astype(complex)
    elif kind == "SqrtSwap":
        a, b = (1 + 1j) / 2, (1 - 1j) / 2
        m = np.array([[1, 0, 0, 0], [0, a, b, 0], [0, b, a, 0], [0, 0, 0, 1]], dtype=complex)
    elif kind == "MS":
        xx = np.kron(SINGLE["X"], SINGLE["X"])
        m = np.cos(np.pi / 4) * np.eye(4) - 1j * np.sin(np.pi / 4) * xx
    else:  # pragma: no cover - guarded by Gate.__post_init__
        raise ValueError(kind)
    m.setflags(write=False)
    return m


# ---------------------------------------------------------------- kernels

def apply_matrix(vecs: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a 1- or 2-qubit matrix to a batch of vectors of shape (B, 2**n)."""
    b = vecs.shape[0]
    if len(qubits) == 1:
        q = qubits[0]
        t = vecs.reshape(b * 2**q, 2, 2 ** (n - q - 1))
        return np.matmul(u, t).reshape(b, -1)
    q0, q1 = qubits
    t = vecs.reshape((b,) + (2,) * n)
    t = np.moveaxis(t, (q0 + 1, q1 + 1), (1, 2))
    shape = t.shape
    t = np.matmul(u, t.reshape(b, 4, -1)).reshape(shape)
    return np.moveaxis(t, (1, 2), (q0 + 1, q1 + 1)).reshape(b, -1)


@lru_cache(maxsize=None)
def _cz_signs(q0: int, q1: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    both = ((idx >> (n - 1 - q0)) & 1) & ((idx >> (n - 1 - q1)) & 1)
    return 1.0 - 2.0 * both


def apply_rotation_vecs(vecs: np.ndarray, letter: str, qubit: int, theta: float,
                        n: int) -> np.ndarray:
    if letter == "Z":
        b = vecs.shape[0]
        ph = np.exp(-0.5j * theta)
        t = vecs.reshape(b * 2**qubit, 2, 2 ** (n - qubit - 1))
        return (t * np.array([ph, ph.conjugate()])[:, None]).reshape(b, -1)
    return apply_matrix(vecs, rotation_matrix(letter, theta), (qubit,), n)


def apply_gate_vecs(vecs: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    if gate.is_rotation and gate.param is not None:
        return apply_rotation_vecs(vecs, gate.generator, gate.qubits[0], gate.param, n)
    if gate.kind == "CZ":
        return vecs * _cz_signs(*gate.qubits, n)
    return apply_matrix(vecs, gate.matrix(), gate.qubits, n)


def apply_gate_rhos(rhos: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """U rho U^dagger on a batch of density matrices of shape (B, d, d)."""
    b, d, _ = rhos.shape
    flat = rhos.reshape(b, d * d)
    if gate.kind == "CZ":
        s = _cz_signs(*gate.qubits, n)
        return rhos * s[:, None] * s[None, :]
    u = gate.matrix()
    flat = apply_matrix(flat, u, gate.qubits, 2 * n)
    flat = apply_matrix(flat, u.conj(), tuple(q + n for q in gate.qubits), 2 * n)
    return flat.reshape(b, d, d)


def apply_pauli_commutator(rhos: np.ndarray, letter: str, qubit: int, n: int) -> np.ndarray:
    """(-i/2)[sigma, rho] for a single-qubit Pauli sigma, batched."""
    b, d, _ = rhos.shape
    sig = SINGLE[letter]
    left = apply_matrix(rhos.reshape(b, d * d), sig, (qubit,), 2 * n)
    right = apply_matrix(rhos.reshape(b, d * d), sig.T, (qubit + n,), 2 * n)
    return (-0.5j * (left - right)).reshape(b, d, d)


def depolarize_rhos(rhos: np.ndarray, qubit: int, r: float, n: int) -> np.ndarray:
    """(1-r) rho + r/3 (X rho X + Y rho Y + Z rho Z) on one qubit, batched."""
    if r == 0:
        return rhos
    b, d, _ = rhos.shape
    a, c = 2**qubit, 2 ** (n - qubit - 1)
    t = rhos.reshape(b, a, 2, c, a, 2, c)
    tr = t[:, :, 0, :, :, 0, :] + t[:, :, 1, :, :, 1, :]
    out = (1 - 4 * r / 3) * t
    out[:, :, 0, :, :, 0, :] += (2 * r / 3) * tr
    out[:, :, 1, :, :, 1, :] += (2 * r / 3) * tr
    return out.reshape(b, d, d)


# ---------------------------------------------------------------- states

@dataclass
class StateVector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 0..{MAX_QUBITS}")
        self.amps = np.asarray(self.amps, dtype=complex).reshape(2**self.n_qubits)

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1
        return cls(n, amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2) if bits else 0] = 1
        return cls(len(bits), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amps, self.amps.conj()))


@dataclass
class DensityMatrix:
    n_qubits: int
    rho: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 0..{MAX_QUBITS}")
        d = 2**self.n_qubits
        self.rho = np.asarray(self.rho, dtype=complex).reshape(d, d)

    @classmethod
    def zero(cls, n: int) -> "DensityMatrix":
        return StateVector.zero(n).to_density()

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        d = 2**n
        return cls(n, np.eye(d, dtype=complex) / d)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        """self (low qubit indices) tensor other (appended after)."""
        return DensityMatrix(self.n_qubits + other.n_qubits, np.kron(self.rho, other.rho))


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing noise after every gate on every qubit it acts on."""

    gate_error: float = 0.0
    meas_error: Optional[float] = None

    def __post_init__(self):
        if self.meas_error is None:
            object.__setattr__(self, "meas_error", self.gate_error)
        for name in ("gate_error", "meas_error"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _check_qubits(gate: Gate, n: int):
    for q in gate.qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")


def apply_gate(state: State, gate: Gate) -> State:
    """Return ``U|psi>`` or ``U rho U^dagger`` as a new state."""
    n = state.n_qubits
    _check_qubits(gate, n)
    if isinstance(state, StateVector):
        return StateVector(n, apply_gate_vecs(state.amps[None], gate, n)[0])
    return DensityMatrix(n, apply_gate_rhos(state.rho[None], gate, n)[0])


def apply_depolarizing(state: DensityMatrix, qubit: int, r: float) -> DensityMatrix:
    if not 0 <= r <= 1:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {r}")
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit state")
    return DensityMatrix(n, depolarize_rhos(state.rho[None], qubit, r, n)[0])


def run_circuit(state: State, gates, noise: Optional[NoiseModel] = None) -> State:
    """Apply bound gates in order; with ``noise``, ``state`` must be a density matrix."""
    r = noise.gate_error if noise is not None else 0.0
    if r and isinstance(state, StateVector):
        raise TypeError("noisy simulation needs a DensityMatrix")
    for g in gates:
        state = apply_gate(state, g)
        if r:
            for q in g.qubits:
                state = apply_depolarizing(state, q, r)
    return state


def expectation(state: State, p: PauliString) -> float:
    if p.n_qubits != state.n_qubits:
        raise ValueError("Pauli string and state act on different qubit counts")
    if isinstance(state, StateVector):
        val = np.vdot(state.amps, p.apply(state.amps))
    else:
        perm, coeff = p._action
        k = np.arange(len(perm))
        val = np.sum(state.rho[k, perm] * coeff)
    return float(np.real(val))


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.n_qubits != b.n_qubits:
        raise ValueError("states have different qubit counts")
    return complex(np.vdot(a.amps, b.amps))


def fidelity(rho: State, target: StateVector) -> float:
    """<target| rho |target> (or |<target|psi>|^2 for a pure state)."""
    if rho.n_qubits != target.n_qubits:
        raise ValueError("state and target have different qubit counts")
    if isinstance(rho, StateVector):
        return float(abs(np.vdot(target.amps, rho.amps)) ** 2)
    t = target.amps
    return float(np.real(np.vdot(t, rho.rho @ t)))


_BASIS_VECTORS = {
    ("Z", "0"): np.array([1, 0], dtype=complex),
    ("Z", "1"): np.array([0, 1], dtype=complex),
    ("X", "+"): np.array([1, 1], dtype=complex) / np.sqrt(2),
    ("X", "-"): np.array([1, -1], dtype=complex) / np.sqrt(2),
}


def project_ancilla(rho: DensityMatrix, qubit: int, basis: str, outcome: str,
                    meas_error: float = 0.0) -> tuple[DensityMatrix, float]:
    """Measure ``qubit`` and keep the branch with the given outcome.

    The measured qubit is first depolarized with ``meas_error``. Returns
    the normalized state on the remaining qubits and the branch
    probability. Raises :class:`ZeroProbabilityError` below 1e-12.
    """
    key = (basis.upper(), str(outcome))
    if key not in _BASIS_VECTORS:
        raise ValueError(f"outcome {outcome!r} is not valid for basis {basis!r}")
    n = rho.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit state")
    if meas_error:
        rho = apply_depolarizing(rho, qubit, meas_error)
    v = _BASIS_VECTORS[key]
    a, c = 2**qubit, 2 ** (n - qubit - 1)
    t = rho.rho.reshape(a, 2, c, a, 2, c)
    reduced = np.einsum("i,aibcjd,j->abcd", v.conj(), t, v).reshape(a * c, a * c)
    prob = float(np.real(np.trace(reduced)))
    if prob < 1e-12:
        raise ZeroProbabilityError(prob)
    return DensityMatrix(n - 1, reduced / prob), prob
