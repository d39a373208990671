#!/usr/bin/env python3
"""Desk-scale cross-labeling experiment on the bundled synthetic fixture.

Generates four ARFF files (all targets / classes only / regressions only /
unlabeled) plus a held-out test set, drops 75% of the remaining labels, and
runs the completion pipeline through the CLI. Results land in the output
directory (completed.arff, assignments.csv, iterations.csv, report.txt).
"""

import argparse
import sys
from pathlib import Path

from xdata.arff import write_arff
from xdata.cli import main as cli_main
from xdata.synthetic import make_corpus


def run(out_root: Path, seed: int, n_train: int, n_test: int) -> int:
    data_dir = out_root / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    corpus = make_corpus(n_train=n_train, n_test=n_test, seed=seed)
    num_targets = {}
    for name, (rel, nt) in corpus.items():
        (data_dir / f"{name}.arff").write_text(write_arff(rel), encoding="utf-8")
        num_targets[name] = nt

    config = "\n".join([
        f"dataset.1.file = {data_dir}/file1.arff",
        f"dataset.1.num_targets = {num_targets['file1']}",
        f"dataset.2.file = {data_dir}/file2.arff",
        f"dataset.2.num_targets = {num_targets['file2']}",
        f"dataset.3.file = {data_dir}/file3.arff",
        f"dataset.3.num_targets = {num_targets['file3']}",
        f"dataset.4.file = {data_dir}/file4.arff",
        f"dataset.4.num_targets = {num_targets['file4']}",
        f"test.file = {data_dir}/test.arff",
        f"output.dir = {out_root}/results",
        "drop.fraction = 0.75",
        f"drop.seed = {seed + 1}",
        "cdlc.select_per_task = 1000",
        "net.shared_layers = 32",
        "net.epochs = 30",
        "net.learning_rate = 0.002",
        "net.dropout = 0.1",
        "net.mc_passes = 10",
        f"net.seed = {seed}",
    ]) + "\n"
    config_path = out_root / "run.conf"
    config_path.write_text(config, encoding="utf-8")

    code = cli_main(["--config", str(config_path)])
    if code == 0:
        print((out_root / "results" / "report.txt").read_text(), end="")
    return code


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="synthetic_run", help="output root directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-train", type=int, default=2500)
    parser.add_argument("--n-test", type=int, default=500)
    args = parser.parse_args()
    sys.exit(run(Path(args.out), args.seed, args.n_train, args.n_test))
