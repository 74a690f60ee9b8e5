"""Fidelity and acceptance versus gate error rate for a compiled encoder.

    python3 scripts/noise_curves.py                       # both frozen test circuits
    python3 scripts/noise_curves.py --circuit results/five_minus_cz/circuit.json \\
        --code five-qubit --target minus

Writes one CSV per circuit (same schema as ``varqec noise-sweep``) on a
finer grid than the CLI default, and prints the first error rate at
which each post-selected variant falls below the undetected baseline.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from varqec.ansatz import bind, load_circuit
from varqec.cli import noise_sweep, write_sweep_csv
from varqec.codes import BUILTIN, LogicalTarget
from varqec.detect import VARIANTS

DATA = Path(__file__).parent.parent / "tests" / "data"
DEFAULT_RUNS = [
    (DATA / "five_minus_cz5.json", "five-qubit", "minus"),
    (DATA / "steane_magic_cnot10.json", "steane", "magic"),
]
GRID = np.round(np.concatenate([[0, 0.001, 0.002, 0.005], np.arange(0.01, 0.2001, 0.005)]), 6)


def crossovers(rows):
    """First r where each variant's fidelity drops below the baseline."""
    table = {}
    for r, variant, f, _ in rows:
        table.setdefault(variant, {})[r] = f
    base = table["baseline"]
    out = {}
    for variant, curve in table.items():
        if variant == "baseline" or all(np.isnan(v) for v in curve.values()):
            continue
        below = [r for r in sorted(curve) if r > 0 and curve[r] < base[r]]
        out[variant] = below[0] if below else None
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--circuit")
    p.add_argument("--code", default="five-qubit")
    p.add_argument("--target", default="minus")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results/noise")
    args = p.parse_args(argv)

    runs = [(Path(args.circuit), args.code, args.target)] if args.circuit else DEFAULT_RUNS
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path, code_name, target in runs:
        code, t = BUILTIN[code_name](), LogicalTarget.named(target)
        circuit, theta = load_circuit(path)
        rows = noise_sweep(bind(circuit, theta), circuit.n_qubits, code, t, VARIANTS, GRID,
                           args.workers)
        csv_path = out / f"{code_name}_{target}.csv"
        write_sweep_csv(csv_path, rows)
        print(f"== {code_name} |{target}>_L from {path.name} "
              f"({circuit.two_qubit_count} two-qubit gates) -> {csv_path}")
        for variant, r in crossovers(rows).items():
            if r is None:
                print(f"   {variant:<20s} stays above baseline on this grid")
            else:
                print(f"   {variant:<20s} below baseline from r = {r:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
