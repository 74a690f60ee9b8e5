"""Compile and verify the encoders described by the configs in scripts/configs/.

    python3 scripts/compile_encoders.py                 # every config
    python3 scripts/compile_encoders.py five_minus_cz   # a subset by name

Each run writes circuit.json, circuit.txt, result.json and
trajectory.csv under results/<name>/, then re-simulates the circuit and
prints the verify report. A summary table closes the run.
"""
import argparse
import json
import sys
import time
from pathlib import Path

from varqec.cli import cmd_compile, load_config, verify_circuit

CONFIGS = Path(__file__).parent / "configs"


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="config names without .json (default: all)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--results", default="results", help="root directory for outputs")
    args = p.parse_args(argv)

    names = args.names or sorted(f.stem for f in CONFIGS.glob("*.json"))
    rows = []
    for name in names:
        cfg = load_config(CONFIGS / f"{name}.json")
        out = Path(args.results) / name
        cfg = type(cfg)(**{**cfg.__dict__, "output_dir": str(out)})
        print(f"== {name}", flush=True)
        t0 = time.time()
        status = cmd_compile(cfg, args.workers)
        meta = json.loads((out / "result.json").read_text())
        rep = verify_circuit(out / "circuit.json", cfg.load_code(), cfg.logical_target())
        rows.append((name, meta["status"], meta["two_qubit_count"], meta["restarts_used"],
                     meta["e_min"], rep.fidelity, time.time() - t0))
        if status != 0:
            print(f"   {name}: search ended with status {meta['status']}")

    print(f"\n{'config':<22s} {'status':<17s} {'2q':>3s} {'restarts':>8s} "
          f"{'E_min':>13s} {'fidelity':>12s} {'time':>7s}")
    for name, status, n2, used, e, f, dt in rows:
        print(f"{name:<22s} {status:<17s} {n2:>3d} {used:>8d} {e:>13.9f} {f:>12.9f} {dt:>6.0f}s")
    return 0 if all(r[1] == "converged" for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
