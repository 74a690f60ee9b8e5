"""Command-line entry point: compile, verify, noise-sweep and code utilities.

Every command is driven by one JSON experiment config. Flags override
the config, and ``VARQEC_<FLAG>`` environment variables sit between the
two (flag > env > config).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ansatz import ConstraintSet, bind, gate_listing, load_circuit, save_circuit, simulate
from .codes import (BUILTIN, CodeError, LogicalTarget, StabilizerCode, load_code,
                    min_weight_logical, target_state, validate)
from .detect import VARIANTS, UnsupportedTarget, evaluate_variant
from .hamiltonian import build, energy, fidelity_lower_bound
from .qsim import NoiseModel, StateVector, expectation, fidelity
from .varqite import CONVERGED, RunOptions, compile

log = logging.getLogger("varqec")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3
DEFAULT_GRID = (0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15)
VERIFY_TOL = 1e-6


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""


@dataclass(frozen=True)
class SearchOptions:
    """Ansatz size and early stopping for the restart search.

    ``k_blocks=None`` uses the two-qubit budget as the block count.
    """

    k_blocks: Optional[int] = None
    goal_two_qubit: Optional[int] = None
    prune: bool = True


@dataclass(frozen=True)
class SweepOptions:
    circuit: Optional[str] = None
    variants: tuple[str, ...] = VARIANTS
    r_grid: tuple[float, ...] = DEFAULT_GRID


@dataclass(frozen=True)
class ExperimentConfig:
    code: str = "five-qubit"
    target: object = "zero"
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    run: RunOptions = field(default_factory=RunOptions)
    noise: NoiseModel = field(default_factory=NoiseModel)
    search: SearchOptions = field(default_factory=SearchOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)
    base_seed: int = 0
    output_dir: str = "out"

    def load_code(self) -> StabilizerCode:
        return resolve_code(self.code)

    def logical_target(self) -> LogicalTarget:
        return parse_target(self.target)


# ------------------------------------------------------------------ parsing

def resolve_code(spec: str) -> StabilizerCode:
    if spec in BUILTIN:
        return BUILTIN[spec]()
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"code: {spec!r} is neither a built-in code "
                          f"({', '.join(sorted(BUILTIN))}) nor a file")
    try:
        code = load_code(path)
    except (CodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"code: {path}: {exc}") from None
    problem = validate(code)
    if problem:
        raise ConfigError(f"code: {path}: {problem}")
    return code


def _complex(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"{where}: expected a number or [re, im]")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {x!r}")


def parse_target(spec) -> LogicalTarget:
    """A named target or an (alpha, beta) pair, normalized."""
    if isinstance(spec, str):
        try:
            return LogicalTarget.named(spec)
        except ValueError as exc:
            raise ConfigError(f"target: {exc}") from None
    if isinstance(spec, (list, tuple)) and len(spec) == 2:
        a, b = _complex(spec[0], "target[0]"), _complex(spec[1], "target[1]")
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if norm == 0:
            raise ConfigError("target: alpha and beta are both zero")
        return LogicalTarget(a / norm, b / norm)
    raise ConfigError(f"target: expected a name or [alpha, beta], got {spec!r}")


_SECTIONS = {"constraints": ConstraintSet, "run": RunOptions, "noise": NoiseModel,
             "search": SearchOptions, "sweep": SweepOptions}
_TUPLE_FIELDS = {"allowed_two_qubit", "variants", "r_grid"}


def _section(name: str, cls, doc) -> object:
    if not isinstance(doc, dict):
        raise ConfigError(f"{name}: expected an object, got {type(doc).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key (allowed: {', '.join(sorted(known))})")
    kwargs = {}
    for key, value in doc.items():
        if key in _TUPLE_FIELDS:
            if not isinstance(value, list):
                raise ConfigError(f"{name}.{key}: expected a list")
            value = tuple(value)
        if key == "coupling" and value is not None:
            if not isinstance(value, list) or not all(
                    isinstance(p, list) and len(p) == 2 for p in value):
                raise ConfigError(f"{name}.{key}: expected a list of [a, b] pairs or null")
        if key in _SCALARS:
            _check_scalar(f"{name}.{key}", _SCALARS[key], value)
        kwargs[key] = value
    try:
        out = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    _check_types(name, out)
    return out


_SCALARS = {"max_two_qubit": int, "n_ancilla": int, "dtau": float, "max_steps": int,
            "reg_lambda": float, "success_energy": float, "plateau_window": int,
            "plateau_eps": float, "max_restarts": int, "gate_error": float,
            "meas_error": float, "k_blocks": int, "goal_two_qubit": int, "prune": bool,
            "circuit": str}


def _check_scalar(where: str, kind, v):
    if v is None:
        return
    if kind is bool:
        ok = isinstance(v, bool)
    elif kind is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    elif kind is float:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    else:
        ok = isinstance(v, kind)
    if not ok:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {v!r}")


def _check_types(name: str, obj):
    for f in dataclasses.fields(obj):
        if f.name in _SCALARS:
            _check_scalar(f"{name}.{f.name}", _SCALARS[f.name], getattr(obj, f.name))
    if isinstance(obj, SweepOptions):
        bad = [v for v in obj.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"{name}.variants: unknown {bad} (allowed: {', '.join(VARIANTS)})")
        for r in obj.r_grid:
            if isinstance(r, bool) or not isinstance(r, (int, float)) or not 0 <= r <= 1:
                raise ConfigError(f"{name}.r_grid: entries must lie in [0, 1], got {r!r}")


def config_from_dict(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown key (allowed: {', '.join(sorted(known))})")
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            kwargs[key] = _section(key, _SECTIONS[key], value)
        elif key == "base_seed":
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"base_seed: expected a non-negative integer, got {value!r}")
            kwargs[key] = value
        elif key in ("code", "output_dir"):
            if not isinstance(value, str):
                raise ConfigError(f"{key}: expected a string, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs)
    # resolve early so errors surface before any computation
    code = cfg.load_code()
    cfg.logical_target()
    k = cfg.search.k_blocks
    if k is not None and k > cfg.constraints.max_two_qubit:
        raise ConfigError(f"search.k_blocks: {k} exceeds constraints.max_two_qubit "
                          f"({cfg.constraints.max_two_qubit})")
    try:
        cfg.constraints.pairs(code.n_qubits + cfg.constraints.n_ancilla)
    except ValueError as exc:
        raise ConfigError(f"constraints.coupling: {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    t = cfg.target
    if not isinstance(t, str):
        doc["target"] = [[complex(z).real, complex(z).imag] for z in
                         (cfg.logical_target().alpha, cfg.logical_target().beta)]
    for sec in ("constraints", "sweep"):
        doc[sec] = {k: list(v) if isinstance(v, tuple) else v for k, v in doc[sec].items()}
    if doc["constraints"]["coupling"] is not None:
        doc["constraints"]["coupling"] = [list(p) for p in doc["constraints"]["coupling"]]
    return doc


# ------------------------------------------------------------------ commands

def _noise_or_none(noise: NoiseModel) -> Optional[NoiseModel]:
    return None if noise.gate_error == 0 and noise.meas_error == 0 else noise


def cmd_compile(cfg: ExperimentConfig, workers: int = 1) -> int:
    code, target = cfg.load_code(), cfg.logical_target()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = build(code, target, n_ancilla=cfg.constraints.n_ancilla)
    res = compile(code, target, cfg.constraints, cfg.run, _noise_or_none(cfg.noise),
                  base_seed=cfg.base_seed, k_blocks=cfg.search.k_blocks,
                  goal_two_qubit=cfg.search.goal_two_qubit, prune_gates=cfg.search.prune,
                  workers=workers, h=h)
    save_circuit(out / "circuit.json", res.circuit, res.theta)
    (out / "circuit.txt").write_text(gate_listing(res.circuit, res.theta))
    meta = {
        "code": code.name or cfg.code,
        "target": config_to_dict(cfg)["target"],
        "status": res.status,
        "e_min": res.e_min,
        "e0": h.e0,
        "e1": h.e1,
        "fidelity_bound": res.fidelity_bound,
        "two_qubit_count": res.two_qubit_count,
        "gate_count": len(res.circuit.gates),
        "restarts_used": res.restarts_used,
        "seed": res.seed,
        "config": config_to_dict(cfg),
    }
    (out / "result.json").write_text(json.dumps(meta, indent=2) + "\n")
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "energy"])
        for step, e in res.trajectory:
            w.writerow([step, f"{e:.12g}"])
    print(f"status={res.status} E_min={res.e_min:.10f} bound={res.fidelity_bound:.6f} "
          f"two_qubit={res.two_qubit_count} restarts={res.restarts_used} -> {out}")
    return EXIT_OK if res.status == CONVERGED else EXIT_BUDGET


@dataclass
class VerifyReport:
    energy: float
    fidelity: float
    bound: Optional[float]
    stabilizers: list[tuple[str, float]]

    @property
    def passed(self) -> bool:
        return self.fidelity >= 1 - VERIFY_TOL


def verify_circuit(circuit_file, code: StabilizerCode, target: LogicalTarget) -> VerifyReport:
    """Noiseless check of a bound circuit against the exact target state."""
    circuit, theta = load_circuit(circuit_file)
    if theta is None:
        raise ValueError(f"{circuit_file}: circuit has unbound parameter slots")
    n_anc = circuit.n_qubits - code.n_qubits
    if n_anc not in (0, 1):
        raise ValueError(f"{circuit_file}: {circuit.n_qubits} qubits do not fit "
                         f"{code.name or 'the code'} ({code.n_qubits} qubits, at most 1 ancilla)")
    h = build(code, target, n_ancilla=n_anc)
    ts = target_state(code, target)
    if n_anc:
        ts = StateVector(h.n_qubits, np.kron(ts.amps, [1.0, 0.0]))
    psi = simulate(circuit, theta)
    e = energy(psi, h)
    bound = fidelity_lower_bound(e, h) if e < h.e1 else None
    pad = "I" * n_anc
    stabs = []
    for g in code.generators:
        p = type(g)(g.letters + pad, g.phase)
        stabs.append((str(g), expectation(psi, p)))
    return VerifyReport(e, fidelity(psi, ts), bound, stabs)


def cmd_verify(circuit_file, code: StabilizerCode, target: LogicalTarget) -> int:
    rep = verify_circuit(circuit_file, code, target)
    print(f"energy          {rep.energy:+.12f}")
    print(f"fidelity        {rep.fidelity:.12f}")
    if rep.bound is None:
        print("fidelity bound  n/a (E > E1)")
    else:
        print(f"fidelity bound  {rep.bound:.12f}")
    for name, v in rep.stabilizers:
        print(f"<{name}>  {v:+.12f}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _sweep_point(args):
    variant, r, prep, n_prep, code, target = args
    ts = target_state(code, target)
    try:
        ev = evaluate_variant(variant, prep, code, target, ts, NoiseModel(r), n_prep)
    except UnsupportedTarget as exc:
        return variant, r, None, str(exc)
    return variant, r, (ev.fidelity, ev.accept_prob), None


def noise_sweep(prep, n_prep: int, code: StabilizerCode, target: LogicalTarget,
                variants: Sequence[str], r_grid: Sequence[float], workers: int = 1):
    """Rows (r, variant, fidelity, accept_prob); unsupported variants give nan rows."""
    jobs = [(v, float(r), tuple(prep), n_prep, code, target) for r in r_grid for v in variants]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows, warned = [], set()
    for variant, r, vals, err in results:
        if vals is None:
            if variant not in warned:
                log.warning("skipping %s: %s", variant, err)
                warned.add(variant)
            vals = (math.nan, math.nan)
        rows.append((r, variant) + vals)
    return rows


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "variant", "fidelity", "accept_prob"])
        for r, variant, f, p in rows:
            w.writerow([f"{r:.12g}", variant, f"{f:.12g}", f"{p:.12g}"])


def cmd_noise_sweep(cfg: ExperimentConfig, workers: int = 1,
                    circuit_file: Optional[str] = None) -> int:
    code, target = cfg.load_code(), cfg.logical_target()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    circuit_file = circuit_file or cfg.sweep.circuit
    if circuit_file is None:
        log.info("no circuit given; compiling one first")
        status = cmd_compile(cfg, workers)
        if status != EXIT_OK:
            log.error("inline compilation did not converge")
            return status
        circuit_file = out / "circuit.json"
    circuit, theta = load_circuit(circuit_file)
    if theta is None:
        raise ValueError(f"{circuit_file}: circuit has unbound parameter slots")
    if circuit.n_qubits - code.n_qubits not in (0, 1):
        raise ValueError(f"{circuit_file}: {circuit.n_qubits} qubits do not fit the code")
    rows = noise_sweep(bind(circuit, theta), circuit.n_qubits, code, target,
                       cfg.sweep.variants, cfg.sweep.r_grid, workers)
    write_sweep_csv(out / "sweep.csv", rows)
    for r, variant, f, p in rows:
        print(f"{r:<8g} {variant:<20s} {f:.8f} {p:.8f}")
    return EXIT_OK


def cmd_codes_list() -> int:
    for name, make in sorted(BUILTIN.items()):
        code = make()
        print(f"{name}: n={code.n_qubits}")
        for g in code.generators:
            print(f"  S  {g}")
        for label, p in (("X_L", code.logical_x), ("Z_L", code.logical_z)):
            print(f"  {label} {p}  (min weight {min_weight_logical(code, p)})")
    return EXIT_OK


def cmd_codes_validate(path) -> int:
    try:
        code = load_code(path)
    except (CodeError, json.JSONDecodeError, OSError) as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problem = validate(code)
    if problem:
        print(f"{path}: invalid: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{path}: valid [[{code.n_qubits},1]] code with {len(code.generators)} generators")
    return EXIT_OK


# ------------------------------------------------------------------ argv

def _env_default(name: str, cast=str):
    raw = os.environ.get(f"VARQEC_{name.upper()}")
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"VARQEC_{name.upper()}: cannot parse {raw!r}") from None


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(text)
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=_nonneg_int, help="base seed (overrides config)")
    common.add_argument("--workers", type=_nonneg_int,
                        help="process pool size (default: available cores)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--code", help="built-in code name or code JSON (overrides config)")
    common.add_argument("--target", help="named target (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true", help="log every restart")

    p = argparse.ArgumentParser(prog="varqec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("compile", parents=[common], help="search for an encoding circuit")
    v = sub.add_parser("verify", parents=[common], help="check a circuit against its target")
    v.add_argument("circuit", help="bound circuit JSON")
    s = sub.add_parser("noise-sweep", parents=[common], help="fidelity vs gate error rate")
    s.add_argument("--circuit", help="bound circuit JSON (default: compile inline)")
    s.add_argument("--variants", help="comma-separated subset of " + ",".join(VARIANTS))
    s.add_argument("--r-grid", help="comma-separated error rates")
    c = sub.add_parser("codes", help="built-in and user-supplied codes")
    csub = c.add_subparsers(dest="codes_command", required=True)
    csub.add_parser("list", help="print the built-in codes")
    cv = csub.add_parser("validate", help="check a code JSON file")
    cv.add_argument("file")
    return p


def resolve_config(args) -> tuple[ExperimentConfig, int]:
    """Merge config file, environment and flags; returns (config, workers)."""
    path = args.config or _env_default("config")
    cfg = load_config(path) if path else config_from_dict({})
    seed = args.seed if args.seed is not None else _env_default("seed", _nonneg_int)
    out = args.out or _env_default("out")
    workers = args.workers if args.workers is not None else _env_default("workers", _nonneg_int)
    changes = {}
    if seed is not None:
        changes["base_seed"] = seed
    if out is not None:
        changes["output_dir"] = out
    if getattr(args, "code", None):
        changes["code"] = args.code
    if getattr(args, "target", None):
        changes["target"] = args.target
    sweep = {}
    if getattr(args, "variants", None):
        sweep["variants"] = tuple(v.strip() for v in args.variants.split(","))
    if getattr(args, "r_grid", None):
        try:
            sweep["r_grid"] = tuple(float(r) for r in args.r_grid.split(","))
        except ValueError:
            raise ConfigError(f"--r-grid: cannot parse {args.r_grid!r}") from None
    if sweep:
        changes["sweep"] = dataclasses.replace(cfg.sweep, **sweep)
        _check_types("sweep", changes["sweep"])
    cfg = dataclasses.replace(cfg, **changes)
    cfg.load_code()
    cfg.logical_target()
    if not workers:
        workers = os.cpu_count() or 1
    return cfg, workers


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "codes":
            if args.codes_command == "list":
                return cmd_codes_list()
            return cmd_codes_validate(args.file)
        cfg, workers = resolve_config(args)
        if args.command == "compile":
            return cmd_compile(cfg, workers)
        if args.command == "verify":
            return cmd_verify(args.circuit, cfg.load_code(), cfg.logical_target())
        return cmd_noise_sweep(cfg, workers, args.circuit)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
