"""Stabilizer codes encoding one logical qubit.

Built-in five-qubit and Steane codes, logical observables for arbitrary
target states, exact logical basis states and minimum-weight logical
representatives.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .pauli import PauliString
from .qsim import StateVector


class CodeError(ValueError):
    pass


@dataclass(frozen=True)
class StabilizerCode:
    n_qubits: int
    generators: tuple[PauliString, ...]
    logical_x: PauliString
    logical_z: PauliString
    name: str = ""

    @property
    def logical_y(self) -> PauliString:
        return (self.logical_x * self.logical_z).times_i()

    @classmethod
    def from_strings(cls, generators, logical_x, logical_z, name=""):
        gens = tuple(PauliString(g) for g in generators)
        return cls(len(logical_z), gens,
                   PauliString(logical_x), PauliString(logical_z), name)


def five_qubit_code() -> StabilizerCode:
    return StabilizerCode.from_strings(
        ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"], "XXXXX", "ZZZZZ", "five-qubit")


def steane_code() -> StabilizerCode:
    return StabilizerCode.from_strings(
        ["IIIXXXX", "XXIIXXI", "XIXIXIX", "IIIZZZZ", "ZZIIZZI", "ZIZIZIZ"],
        "XXXXXXX", "ZZZZZZZ", "steane")


BUILTIN = {"five-qubit": five_qubit_code, "steane": steane_code}


def load_code(path) -> StabilizerCode:
    """Load a code from the JSON schema ``{n, generators, logical_x, logical_z, name}``."""
    doc = json.loads(Path(path).read_text())
    return code_from_dict(doc)


def code_from_dict(doc: dict) -> StabilizerCode:
    required = {"n", "generators", "logical_x", "logical_z"}
    missing = required - set(doc)
    if missing:
        raise CodeError(f"code document missing keys: {sorted(missing)}")
    unknown = set(doc) - required - {"name"}
    if unknown:
        raise CodeError(f"code document has unknown keys: {sorted(unknown)}")
    n = int(doc["n"])

    def letters(s, field):
        if not isinstance(s, str) or s[:1] in "+-" or len(s) != n:
            raise CodeError(f"{field}: expected {n} Pauli letters without phase, got {s!r}")
        try:
            return PauliString(s)
        except ValueError as exc:
            raise CodeError(f"{field}: {exc}") from None

    gens = tuple(letters(g, f"generators[{i}]") for i, g in enumerate(doc["generators"]))
    return StabilizerCode(n, gens, letters(doc["logical_x"], "logical_x"),
                          letters(doc["logical_z"], "logical_z"), doc.get("name", ""))


def code_to_dict(code: StabilizerCode) -> dict:
    return {
        "n": code.n_qubits,
        "generators": [g.letters for g in code.generators],
        "logical_x": code.logical_x.letters,
        "logical_z": code.logical_z.letters,
        "name": code.name,
    }


# ------------------------------------------------------------- validation

def _gf2_rank(rows: list[PauliString]) -> int:
    if not rows:
        return 0
    m = np.array([[c in "XY" for c in p.letters] + [c in "YZ" for c in p.letters]
                  for p in rows], dtype=np.uint8)
    rank = 0
    for col in range(m.shape[1]):
        pivot = next((r for r in range(rank, len(m)) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(len(m)):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def validate(code: StabilizerCode) -> Optional[str]:
    """Return ``None`` if the code is valid, otherwise the first violation found."""
    n = code.n_qubits
    ops = list(code.generators) + [code.logical_x, code.logical_z]
    if any(p.n_qubits != n for p in ops):
        return "operator length does not match n"
    for i, g in enumerate(code.generators):
        if g.phase != 0:
            return f"generator {i} must have phase +1"
    for (i, a), (j, b) in itertools.combinations(enumerate(code.generators), 2):
        if not a.commutes(b):
            return f"generators anticommute ({i}, {j})"
    l = len(code.generators)
    if _gf2_rank(list(code.generators)) < l:
        return "generators are not independent"
    if n - l != 1:
        return f"code must encode exactly one logical qubit (n - l = {n - l})"
    for name, p in (("logical_x", code.logical_x), ("logical_z", code.logical_z)):
        for i, g in enumerate(code.generators):
            if not p.commutes(g):
                return f"{name} anticommutes with generator {i}"
        if _gf2_rank(list(code.generators) + [p]) == l:
            return f"logical operator in stabilizer ({name})"
    if code.logical_x.commutes(code.logical_z):
        return "logical_x and logical_z commute"
    return None


def require_valid(code: StabilizerCode):
    err = validate(code)
    if err:
        raise CodeError(err)


# ------------------------------------------------------------- targets

@dataclass(frozen=True)
class LogicalTarget:
    """The logical state alpha|0>_L + beta|1>_L."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"target is not normalized (|a|^2+|b|^2 = {norm})")

    @classmethod
    def named(cls, name: str) -> "LogicalTarget":
        s = 1 / np.sqrt(2)
        table = {
            "zero": (1, 0),
            "one": (0, 1),
            "plus": (s, s),
            "minus": (s, -s),
            "plus_i": (s, 1j * s),
            "minus_i": (s, -1j * s),
            "magic": (s, np.exp(1j * np.pi / 4) * s),
        }
        if name not in table:
            raise ValueError(f"unknown target {name!r}; choose from {sorted(table)}")
        a, b = table[name]
        return cls(complex(a), complex(b))

    def bloch(self) -> tuple[float, float, float]:
        """Coefficients of X_L, Y_L, Z_L in the stabilizing logical observable."""
        a, b = self.alpha, self.beta
        cx = a * b.conjugate() + a.conjugate() * b
        cy = -1j * (a.conjugate() * b - a * b.conjugate())
        cz = -(b * b.conjugate() - a * a.conjugate())
        return float(cx.real), float(cy.real), float(cz.real)


def logical_operator(code: StabilizerCode, target: LogicalTarget,
                     tol: float = 1e-14) -> list[tuple[float, PauliString]]:
    """Weighted Pauli sum whose +1 eigenstate in the code space is ``target``."""
    terms = []
    for c, p in zip(target.bloch(), (code.logical_x, code.logical_y, code.logical_z)):
        if abs(c) > tol:
            terms.append((c, p))
    return terms


def logical_basis_states(code: StabilizerCode) -> tuple[StateVector, StateVector]:
    require_valid(code)
    n = code.n_qubits
    d = 2**n
    proj = np.eye(d, dtype=complex)
    for g in code.generators:
        proj = 0.5 * (proj + g.apply(proj.T).T)
    rank = int(round(np.real(np.trace(proj))))
    if rank != 2:
        raise CodeError(f"code projector has rank {rank}, expected 2")
    proj0 = 0.5 * (proj + code.logical_z.apply(proj.T).T)
    col = int(np.argmax(np.linalg.norm(proj0, axis=0)))
    v = proj0[:, col]
    v = v / np.linalg.norm(v)
    zero = fix_phase(v)
    one = code.logical_x.apply(zero)
    return StateVector(n, zero), StateVector(n, one)


def fix_phase(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Rotate the global phase so the first non-negligible amplitude is real positive."""
    k = int(np.argmax(np.abs(v) > tol))
    return v * (abs(v[k]) / v[k])


def target_state(code: StabilizerCode, target: LogicalTarget) -> StateVector:
    zero, one = logical_basis_states(code)
    return StateVector(code.n_qubits, target.alpha * zero.amps + target.beta * one.amps)


def min_weight_logical(code: StabilizerCode, p: PauliString) -> PauliString:
    """Lowest-weight element of the stabilizer coset of ``p`` (ties: lexicographic)."""
    for i, g in enumerate(code.generators):
        if not p.commutes(g):
            raise CodeError(f"{p} anticommutes with generator {i}")
    best = None
    for mask in itertools.product((0, 1), repeat=len(code.generators)):
        q = p
        for bit, g in zip(mask, code.generators):
            if bit:
                q = q * g
        key = (q.weight, q.letters)
        if best is None or key < best[0]:
            best = (key, q)
    return best[1]
