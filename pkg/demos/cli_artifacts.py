"""
The command-line surface and its on-disk artifacts
==================================================

Every run writes four artifacts into the output directory: the materialized
config, a versioned JSON checkpoint, a convergence table, and a plain-text
summary. Identical configs reproduce identical bytes, and a finished run
can be inspected later with the report subcommand.
"""
import json
import tempfile
from pathlib import Path

from voromc.cli import main

work = Path(tempfile.mkdtemp(prefix="voromc_demo_"))
config = {
    "model": "elliptic1d",
    "posterior": {"data": [0.22, 0.15], "sigma": [0.05, 0.05]},
    "target": "flux_083",
    "adaptive": {"n_initial": 20, "chain_steps": 20_000, "burn_in": 2_000,
                 "n_emulation": 5_000, "max_iterations": 3,
                 "proposal_scale": 0.1, "master_seed": 11},
    "output_dir": str(work / "run"),
}
cfg_path = work / "config.json"
cfg_path.write_text(json.dumps(config, indent=1))

print("=== voromc run ===")
main(["run", "--config", str(cfg_path)])

print()
print("=== artifacts ===")
for name in sorted(p.name for p in (work / "run").iterdir()):
    size = (work / "run" / name).stat().st_size
    print(f"  {name} ({size} bytes)")

print()
print("=== convergence.csv ===")
print((work / "run" / "convergence.csv").read_text(), end="")

# a second run with the same seed reproduces the table byte for byte
main(["run", "--config", str(cfg_path), "--out", str(work / "replay")])
same = ((work / "run" / "convergence.csv").read_bytes()
        == (work / "replay" / "convergence.csv").read_bytes())
print()
print(f"replay with the same seed is byte-identical: {same}")

print()
print("=== voromc report ===")
main(["report", "--config", str(work / "run")])
