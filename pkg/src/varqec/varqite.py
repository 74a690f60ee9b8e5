"""Variational imaginary-time evolution and the restart-driven compiler.

All inner products are computed exactly by propagating the state and
every parameter-derivative state through the circuit in one batched
pass.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .ansatz import (ConstraintSet, ParamCircuit, PruneLog, generate, initial_params,
                     prune, simplify, PRUNE_THRESHOLD)
from .codes import LogicalTarget, StabilizerCode
from .hamiltonian import PauliHamiltonian, build, fidelity_lower_bound
from .pauli import SINGLE
from .qsim import (NoiseModel, apply_gate_rhos, apply_gate_vecs, apply_matrix,
                   apply_pauli_commutator, apply_rotation_vecs, depolarize_rhos)

log = logging.getLogger(__name__)

CONVERGED = "converged"
LOCAL_MINIMUM = "local-minimum"
BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass
class ItePure:
    A: np.ndarray
    B: np.ndarray
    energy: float


@dataclass
class IteMixed:
    C: np.ndarray
    D: np.ndarray
    energy: float


@dataclass
class RunOptions:
    dtau: float = 0.05
    max_steps: int = 4000
    reg_lambda: float = 1e-6
    success_energy: Optional[float] = None  # defaults to E0 + 1e-4
    plateau_window: int = 200
    plateau_eps: float = 1e-7
    max_restarts: int = 100
    polish_tol: Optional[float] = 1e-7  # fidelity-bound deficit sought after success

    def __post_init__(self):
        if self.dtau <= 0:
            raise ValueError("dtau must be positive")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.max_steps < 1 or self.plateau_window < 1 or self.max_restarts < 1:
            raise ValueError("max_steps, plateau_window and max_restarts must be >= 1")
        if self.polish_tol is not None and not 0 < self.polish_tol < 1:
            raise ValueError("polish_tol must lie in (0, 1) or be null")

    def target_energy(self, h: PauliHamiltonian) -> float:
        return h.e0 + 1e-4 if self.success_energy is None else self.success_energy


# ------------------------------------------------------------ assembly

def _bound_params(circuit: ParamCircuit, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {theta.shape}")
    return theta


def pure_pass(circuit: ParamCircuit, theta):
    """Return |psi> and the matrix whose rows are d|psi>/d theta_i."""
    theta = _bound_params(circuit, theta)
    n = circuit.n_qubits
    m = circuit.n_params
    buf = np.zeros((m + 1, 2**n), dtype=complex)
    buf[0, 0] = 1.0
    k = 1
    for g in circuit.gates:
        if g.is_rotation:
            letter, q = g.generator, g.qubits[0]
            buf[:k] = apply_rotation_vecs(buf[:k], letter, q, theta[g.slot], n)
            buf[k] = -0.5j * apply_matrix(buf[:1], SINGLE[letter], g.qubits, n)[0]
            k += 1
        else:
            buf[:k] = apply_gate_vecs(buf[:k], g, n)
    return buf[0], buf[1:]


def assemble_pure(circuit: ParamCircuit, theta, h: PauliHamiltonian) -> ItePure:
    psi, dpsi = pure_pass(circuit, theta)
    hpsi = h.apply(psi)
    ov = dpsi.conj() @ psi
    a = np.real(dpsi.conj() @ dpsi.T + np.outer(ov, ov))
    b = np.real(dpsi.conj() @ hpsi)
    e = float(np.real(np.vdot(psi, hpsi)))
    return ItePure(0.5 * (a + a.T), b, e)


def mixed_pass(circuit: ParamCircuit, theta, noise: Optional[NoiseModel]):
    """Return rho and the stack of d rho / d theta_i under per-gate depolarizing noise."""
    theta = _bound_params(circuit, theta)
    n = circuit.n_qubits
    m = circuit.n_params
    d = 2**n
    r = noise.gate_error if noise is not None else 0.0
    buf = np.zeros((m + 1, d, d), dtype=complex)
    buf[0, 0, 0] = 1.0
    k = 1
    for g in circuit.gates:
        if g.is_rotation:
            g = g.bound(theta[g.slot])
        buf[:k] = apply_gate_rhos(buf[:k], g, n)
        if g.is_rotation:
            buf[k] = apply_pauli_commutator(buf[:1], g.generator, g.qubits[0], n)[0]
            k += 1
        if r:
            for q in g.qubits:
                buf[:k] = depolarize_rhos(buf[:k], q, r, n)
    return buf[0], buf[1:]


def assemble_mixed(circuit: ParamCircuit, theta, h: PauliHamiltonian,
                   noise: Optional[NoiseModel] = None) -> IteMixed:
    rho, drho = mixed_pass(circuit, theta, noise)
    m = drho.shape[0]
    hm = h.matrix
    anti = hm @ rho + rho @ hm
    flat = drho.reshape(m, -1)
    c = np.real(flat @ flat.conj().T)
    dvec = np.real(flat @ anti.reshape(-1).conj())
    e = float(np.real(np.sum(rho * hm.T)))
    return IteMixed(0.5 * (c + c.T), dvec, e)


def solve_update(system, reg_lambda: float = 1e-6) -> np.ndarray:
    """theta_dot solving (M + lambda I) theta_dot = -v.

    Falls back to a truncated eigendecomposition (eigenvalues < 1e-10
    dropped) when the regularized solve fails or leaves a residual above
    1e-6 |v|.
    """
    if isinstance(system, ItePure):
        mat, vec = system.A, system.B
    elif isinstance(system, IteMixed):
        mat, vec = system.C, system.D
    else:
        mat, vec = system
    mat = np.asarray(mat, dtype=float)
    vec = np.asarray(vec, dtype=float)
    vnorm = np.linalg.norm(vec)
    if vnorm == 0:
        return np.zeros_like(vec)
    reg = mat + reg_lambda * np.eye(len(vec))
    try:
        x = scipy.linalg.solve(reg, -vec, assume_a="sym", check_finite=False)
        if np.all(np.isfinite(x)) and np.linalg.norm(reg @ x + vec) <= 1e-6 * vnorm:
            return x
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    w, v = np.linalg.eigh(mat)
    keep = w >= 1e-10
    return -(v[:, keep] / w[keep]) @ (v[:, keep].T @ vec)


# ------------------------------------------------------------ evolution

@dataclass
class RunResult:
    theta: np.ndarray
    energy: float
    status: str
    trajectory: list[tuple[int, float]]

    @property
    def steps(self) -> int:
        return len(self.trajectory)


class NumericalBlowUp(FloatingPointError):
    pass


def run(circuit: ParamCircuit, h: PauliHamiltonian, opts: RunOptions, theta0,
        noise: Optional[NoiseModel] = None, mixed: bool = False) -> RunResult:
    """Euler-integrate theta_dot until convergence, a plateau, or max_steps.

    ``mixed=True`` (implied by ``noise``) uses density-matrix assembly.
    ``reg_lambda`` is scaled to the pure-state metric A; since C = 2A for
    pure states, mixed mode regularizes with 2 * reg_lambda so that both
    modes take identical steps at zero noise.
    """
    mixed = mixed or noise is not None
    lam = opts.reg_lambda * (2.0 if mixed else 1.0)
    theta = np.array(theta0, dtype=float)
    target = opts.target_energy(h)
    traj: list[tuple[int, float]] = []
    best_hist: list[float] = []
    best = np.inf
    best_theta, best_e = theta.copy(), np.inf
    for step in range(opts.max_steps):
        system = (assemble_mixed(circuit, theta, h, noise) if mixed
                  else assemble_pure(circuit, theta, h))
        e = system.energy
        if not np.isfinite(e):
            raise NumericalBlowUp(f"non-finite energy at step {step}")
        traj.append((step, e))
        if e < best_e:
            best_e, best_theta = e, theta.copy()
        best = min(best, e)
        best_hist.append(best)
        if e <= target:
            return RunResult(theta, e, CONVERGED, traj)
        w = opts.plateau_window
        if step >= w and best_hist[step - w] - best < opts.plateau_eps:
            return RunResult(best_theta, best_e, LOCAL_MINIMUM, traj)
        theta = theta + opts.dtau * solve_update(system, lam)
    return RunResult(best_theta, best_e, BUDGET_EXHAUSTED, traj)


# ------------------------------------------------------------ compiler

@dataclass
class CompilationResult:
    circuit: ParamCircuit
    theta: np.ndarray
    e_min: float
    fidelity_bound: float
    trajectory: list[tuple[int, float]]
    restarts_used: int
    status: str
    seed: Optional[int] = None
    history: list[dict] = field(default_factory=list)

    @property
    def two_qubit_count(self) -> int:
        return self.circuit.two_qubit_count


@dataclass
class _Attempt:
    seed: int
    circuit: ParamCircuit
    theta: np.ndarray
    energy: float
    status: str
    trajectory: list
    prune_log: Optional[PruneLog] = None

    def key(self):
        if self.status == CONVERGED:
            return (0, self.circuit.two_qubit_count, self.energy)
        return (1, self.energy, self.circuit.two_qubit_count)


@dataclass(frozen=True)
class _Job:
    h: PauliHamiltonian
    constraints: ConstraintSet
    n_data: int
    k_blocks: int
    opts: RunOptions
    noise: Optional[NoiseModel]
    do_prune: bool
    prune_threshold: float


def run_attempt(job: _Job, seed: int) -> _Attempt:
    """One restart: fresh ansatz and parameters from ``seed``, evolve, prune."""
    rng = np.random.default_rng(seed)
    circuit = generate(job.constraints, job.n_data, job.k_blocks, rng)
    theta0 = initial_params(circuit, rng)
    try:
        res = run(circuit, job.h, job.opts, theta0, job.noise)
    except NumericalBlowUp as exc:
        log.warning("attempt %d aborted: %s", seed, exc)
        return _Attempt(seed, circuit, theta0, np.inf, LOCAL_MINIMUM, [])
    traj = list(res.trajectory)
    attempt = _Attempt(seed, circuit, res.theta, res.energy, res.status, traj)
    if res.status != CONVERGED or not job.do_prune:
        return attempt

    target = job.opts.target_energy(job.h)

    def reoptimize(circ, theta):
        try:
            r = run(circ, job.h, job.opts, theta, job.noise)
        except NumericalBlowUp:
            return theta, np.inf
        if r.status == CONVERGED:
            offset = traj[-1][0] + 1
            traj.extend((offset + s, e) for s, e in r.trajectory)
            return r.theta, r.energy
        return r.theta, np.inf

    # gate fusion is exact only without noise
    exact = job.noise is None or job.noise.gate_error == 0
    tidy = simplify if exact else (lambda c, t: (c, t))
    plog = PruneLog()
    circuit, theta = tidy(circuit, res.theta)
    circuit, theta = prune(circuit, theta, target, reoptimize,
                           threshold=job.prune_threshold, log=plog)
    circuit, theta = tidy(circuit, theta)
    energy = traj[-1][1]
    return _Attempt(seed, circuit, theta, energy, CONVERGED, traj, plog)


def polish(att: _Attempt, h: PauliHamiltonian, opts: RunOptions) -> _Attempt:
    """Keep evolving a converged circuit until 1 - bound <= ``polish_tol``.

    The success threshold only certifies the fidelity to about 1e-4;
    tightening it on the final, pruned circuit is cheap because the
    energy error decays geometrically near the ground state. Stops at a
    plateau and keeps whichever parameters have the lower energy.
    """
    tight = h.e0 + opts.polish_tol * h.gap
    if att.energy <= tight:
        return att
    try:
        r = run(att.circuit, h, replace(opts, success_energy=tight), att.theta)
    except NumericalBlowUp:
        return att
    if r.energy >= att.energy:
        return att
    offset = att.trajectory[-1][0] + 1 if att.trajectory else 0
    traj = att.trajectory + [(offset + s, e) for s, e in r.trajectory[1:]]
    circuit, theta = simplify(att.circuit, r.theta)
    return replace(att, circuit=circuit, theta=theta, energy=r.energy, trajectory=traj)


def compile(code: StabilizerCode, target: LogicalTarget, constraints: ConstraintSet,
            opts: Optional[RunOptions] = None, noise: Optional[NoiseModel] = None,
            base_seed: int = 0, k_blocks: Optional[int] = None,
            goal_two_qubit: Optional[int] = None, prune_gates: bool = True,
            prune_threshold: float = PRUNE_THRESHOLD, workers: int = 1,
            h: Optional[PauliHamiltonian] = None) -> CompilationResult:
    """Search random ansatze (seed = base_seed + attempt) for an encoder.

    The best attempt is the converged one with the fewest two-qubit gates
    (then lowest energy); without any convergence the lowest-energy
    attempt is returned with status ``budget-exhausted``. The search
    stops early once a converged circuit meets ``goal_two_qubit``.
    Parallel runs consume attempts in seed order, so results equal the
    serial schedule.
    """
    opts = opts or RunOptions()
    if h is None:
        h = build(code, target, n_ancilla=constraints.n_ancilla)
    k = constraints.max_two_qubit if k_blocks is None else k_blocks
    job = _Job(h, constraints, code.n_qubits, k, opts, noise, prune_gates, prune_threshold)
    best: Optional[_Attempt] = None
    history = []
    used = 0
    seeds = [base_seed + a for a in range(opts.max_restarts)]

    def consider(att: _Attempt) -> bool:
        nonlocal best, used
        used += 1
        history.append({"seed": att.seed, "status": att.status, "energy": att.energy,
                        "two_qubit_count": att.circuit.two_qubit_count,
                        "steps": len(att.trajectory)})
        log.info("attempt seed=%d status=%s E=%.8f 2q=%d", att.seed, att.status,
                 att.energy, att.circuit.two_qubit_count)
        if best is None or att.key() < best.key():
            best = att
        return (goal_two_qubit is not None and best.status == CONVERGED
                and best.circuit.two_qubit_count <= goal_two_qubit)

    if workers <= 1:
        for s in seeds:
            if consider(run_attempt(job, s)):
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start in range(0, len(seeds), workers):
                chunk = seeds[start:start + workers]
                done = False
                for att in pool.map(run_attempt, [job] * len(chunk), chunk):
                    if consider(att):
                        done = True
                        break
                if done:
                    break

    status = CONVERGED if best.status == CONVERGED else BUDGET_EXHAUSTED
    if status == CONVERGED and noise is None and opts.polish_tol is not None:
        best = polish(best, h, opts)
    e = best.energy
    bound = fidelity_lower_bound(e, h) if np.isfinite(e) and e <= h.e1 else 0.0
    return CompilationResult(best.circuit, best.theta, e, bound, best.trajectory,
                             used, status, best.seed, history)
