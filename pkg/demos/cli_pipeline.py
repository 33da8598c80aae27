"""End-to-end batch pipeline through the command-line interface.

Writes configs into a temporary directory, simulates a dataset, estimates
its order from the CSV, and checks that a rerun reproduces the output byte
for byte.
"""

import json
import tempfile
from pathlib import Path

from semorder.cli import main as cli


def run(argv) -> None:
    code = cli(argv)
    if code != 0:
        raise SystemExit(f"command {argv[0]} exited with {code}")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        sem = {
            "p": 3,
            "order": [1, 2, 3],
            "edges": [
                {"from": 1, "to": 2, "kind": "sine", "params": [2.0, 1.5]},
                {"from": 2, "to": 3, "kind": "sine", "params": [2.0, 1.5]},
            ],
            "noise_sd": [1.0, 0.3, 0.3],
        }
        (root / "sim.json").write_text(json.dumps({"sem": sem, "n": 2000}))
        run(["simulate", "--config", str(root / "sim.json"), "--out", str(root / "sim"), "--seed", "42"])
        print("simulated ->", (root / "sim" / "data.csv").read_text().splitlines()[0], "...")

        order_cfg = {
            "data": str(root / "sim" / "data.csv"),
            "class": {"dictionary": {"family": "cubic-b-spline", "size": 6, "domain": [-5, 5]}},
        }
        (root / "ord.json").write_text(json.dumps(order_cfg))
        run(["order", "--config", str(root / "ord.json"), "--out", str(root / "ord")])
        print()
        print((root / "ord" / "summary.txt").read_text())

        run(["order", "--config", str(root / "ord.json"), "--out", str(root / "ord2")])
        same = (root / "ord" / "order.json").read_bytes() == (root / "ord2" / "order.json").read_bytes()
        print(f"rerun byte-identical: {same}")

        manifest = json.loads((root / "ord" / "manifest.json").read_text())
        print(f"manifest records command={manifest['command']!r}, "
              f"outputs={manifest['outputs']}, version={manifest['version']}")


if __name__ == "__main__":
    main()
