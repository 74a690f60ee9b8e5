"""Signed Pauli strings with exact phase tracking.

Qubit 0 is the leftmost letter and the most significant bit of a
basis-state index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

_LETTERS = "IXYZ"

# single-site products: (a, b) -> (letter, power of i)
_MUL = {
    ("I", "I"): ("I", 0), ("I", "X"): ("X", 0), ("I", "Y"): ("Y", 0), ("I", "Z"): ("Z", 0),
    ("X", "I"): ("X", 0), ("X", "X"): ("I", 0), ("X", "Y"): ("Z", 1), ("X", "Z"): ("Y", 3),
    ("Y", "I"): ("Y", 0), ("Y", "X"): ("Z", 3), ("Y", "Y"): ("I", 0), ("Y", "Z"): ("X", 1),
    ("Z", "I"): ("Z", 0), ("Z", "X"): ("Y", 1), ("Z", "Y"): ("X", 3), ("Z", "Z"): ("I", 0),
}

_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-qubit Paulis times a phase ``1j**phase``."""

    letters: str
    phase: int = 0

    def __post_init__(self):
        letters = self.letters.upper()
        if any(c not in _LETTERS for c in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse strings like ``"XZZXI"``, ``"-XX"`` or ``"+iZ"``."""
        text = text.strip()
        phase = 0
        if text[:1] in "+-":
            phase = 0 if text[0] == "+" else 2
            text = text[1:]
        if text[:1] in ("i", "j"):
            phase += 1
            text = text[1:]
        return cls(text, phase)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        letters = ["I"] * n
        letters[qubit] = letter
        return cls("".join(letters))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def support(self) -> list[int]:
        return [q for q, c in enumerate(self.letters) if c != "I"]

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    @property
    def sign(self) -> int:
        """Real sign of a Hermitian string."""
        if not self.is_hermitian:
            raise ValueError(f"{self} is not Hermitian")
        return 1 if self.phase == 0 else -1

    def unsigned(self) -> "PauliString":
        return PauliString(self.letters)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if not isinstance(other, PauliString):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise ValueError("Pauli strings act on different qubit counts")
        phase = self.phase + other.phase
        out = []
        for a, b in zip(self.letters, other.letters):
            c, p = _MUL[a, b]
            out.append(c)
            phase += p
        return PauliString("".join(out), phase)

    def __neg__(self) -> "PauliString":
        return PauliString(self.letters, self.phase + 2)

    def times_i(self, k: int = 1) -> "PauliString":
        return PauliString(self.letters, self.phase + k)

    def commutes(self, other: "PauliString") -> bool:
        anti = sum(
            a != "I" and b != "I" and a != b
            for a, b in zip(self.letters, other.letters)
        )
        return anti % 2 == 0

    def __str__(self) -> str:
        return _PHASE_PREFIX[self.phase] + self.letters

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"

    @cached_property
    def _action(self) -> tuple[np.ndarray, np.ndarray]:
        # P|k> = coeff[k] |k ^ xmask>
        n = self.n_qubits
        xmask = zmask = 0
        n_y = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                xmask |= bit
            if c in "YZ":
                zmask |= bit
            n_y += c == "Y"
        idx = np.arange(2**n)
        parity = np.zeros(2**n, dtype=np.int64)
        z = idx & zmask
        while np.any(z):
            parity ^= z & 1
            z >>= 1
        coeff = (1j ** ((self.phase + n_y) % 4)) * (1 - 2 * parity)
        return idx ^ xmask, coeff.astype(complex)

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        """Apply to a vector or a batch of vectors along the last axis."""
        perm, coeff = self._action
        out = np.empty_like(vecs, dtype=complex)
        out[..., perm] = vecs * coeff
        return out

    def to_matrix(self) -> np.ndarray:
        perm, coeff = self._action
        d = len(perm)
        mat = np.zeros((d, d), dtype=complex)
        mat[perm, np.arange(d)] = coeff
        return mat


def kron_matrix(p: PauliString) -> np.ndarray:
    """Dense matrix by explicit Kronecker products (test oracle)."""
    mat = np.ones((1, 1), dtype=complex)
    for c in p.letters:
        mat = np.kron(mat, SINGLE[c])
    return (1j**p.phase) * mat
