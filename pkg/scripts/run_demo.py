#!/usr/bin/env python3
"""End-to-end demo on a synthetic dataset: segment, gvi, evaluate, benchmark.

Usage: python scripts/run_demo.py [workdir]
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def run(argv):
    print(f"$ {' '.join(argv)}")
    subprocess.run(argv, check=True)


def main():
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "demo_out"
    dataset = work / "dataset"
    run([sys.executable, str(ROOT / "scripts" / "make_synthetic_dataset.py"),
         "--out", str(dataset), "--images", "60"])
    manifest = str(dataset / "manifest.csv")
    run(["greenview", "--workers", "4", "segment",
         "--manifest", manifest, "--out-masks", str(work / "masks")])
    run(["greenview", "--workers", "4", "gvi",
         "--manifest", manifest, "--out", str(work / "gvi.csv")])
    run(["greenview", "--workers", "4", "evaluate",
         "--manifest", manifest, "--out-report", str(work / "report.json")])
    run(["greenview", "benchmark", "--manifest", manifest])
    print(f"\noutputs in {work}")


if __name__ == "__main__":
    main()
