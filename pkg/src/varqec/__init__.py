"""Variational compilation of stabilizer-code encoders with noise-aware error detection."""
from .ansatz import ConstraintSet, ParamCircuit, generate, load_circuit, save_circuit, simulate
from .codes import (BUILTIN, LogicalTarget, StabilizerCode, five_qubit_code, load_code,
                    steane_code, target_state)
from .detect import VARIANTS, evaluate, evaluate_variant
from .hamiltonian import build, energy, fidelity_lower_bound, ground_state_exact
from .pauli import PauliString
from .qsim import DensityMatrix, Gate, NoiseModel, StateVector
from .varqite import CompilationResult, RunOptions, compile, run

__all__ = [
    "BUILTIN", "CompilationResult", "ConstraintSet", "DensityMatrix", "Gate", "LogicalTarget",
    "NoiseModel", "ParamCircuit", "PauliString", "RunOptions", "StabilizerCode", "StateVector",
    "VARIANTS", "build", "compile", "energy", "evaluate", "evaluate_variant", "fidelity_lower_bound",
    "five_qubit_code", "generate", "ground_state_exact", "load_circuit", "load_code", "run",
    "save_circuit", "simulate", "steane_code", "target_state",
]
