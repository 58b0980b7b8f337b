"""Prepare the Sachs protein-signalling benchmark.

The observational file (853 rows, 11 measured proteins; the CD3/CD28
condition of the original flow-cytometry study) is not redistributed.
Obtain it yourself, e.g. the ``sachs`` dataset shipped with the R package
bnlearn or the ``cd3cd28`` spreadsheet of the original supplement, export
it as comma-separated text with a header row, then run::

    python scripts/sachs.py path/to/sachs.csv --out sachs_subsamples

This writes ``sub00.csv`` ... ``sub09.csv``: ten subsamples of 700 rows
drawn without replacement with seeds 0..9, columns in the canonical order
of ``sachs_graph.json``.  The acceptance suite reads the raw file from the
``SACHS_CSV`` environment variable and uses :func:`subsamples` directly.
"""

from __future__ import annotations

import argparse
import re
from pathlib import Path

import numpy as np

from hostcd.graph import Dag
from hostcd.synth import Dataset

HERE = Path(__file__).resolve().parent
GRAPH_FILE = HERE / "sachs_graph.json"
CANONICAL = ("raf", "mek", "plc", "pip2", "pip3", "erk", "akt", "pka", "pkc", "p38", "jnk")
ALIASES = {
    "praf": "raf", "pmek": "mek", "plcg": "plc", "plcgamma": "plc", "p44/42": "erk",
    "p4442": "erk", "perk": "erk", "pakts473": "akt", "pakt": "akt", "pjnk": "jnk",
    "pp38": "p38",
}
N_SUBSAMPLES, SUBSAMPLE_SIZE = 10, 700


def _canonical(name: str) -> str:
    key = re.sub(r"[^a-z0-9/]", "", name.lower())
    return ALIASES.get(key, ALIASES.get(key.replace("/", ""), key))


def load_sachs(path) -> Dataset:
    """Read the observational file and reorder its columns canonically."""
    ds = Dataset.from_csv(path)
    if ds.d != len(CANONICAL):
        raise ValueError(f"expected {len(CANONICAL)} columns, got {ds.d}")
    if ds.names:
        names = [_canonical(c) for c in ds.names]
        missing = set(CANONICAL) - set(names)
        if missing:
            raise ValueError(f"unrecognised columns; missing {sorted(missing)}")
        cols = [names.index(c) for c in CANONICAL]
    else:
        cols = list(range(len(CANONICAL)))
    return Dataset(ds.values[:, cols], list(CANONICAL))


def truth_graph() -> Dag:
    return Dag.load(GRAPH_FILE)


def subsamples(ds: Dataset, k: int = N_SUBSAMPLES, size: int = SUBSAMPLE_SIZE):
    for seed in range(k):
        rows = np.sort(np.random.default_rng(seed).choice(ds.n, size=size, replace=False))
        yield Dataset(ds.values[rows], ds.names)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("data")
    p.add_argument("--out", default="sachs_subsamples")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, sub in enumerate(subsamples(load_sachs(args.data))):
        sub.to_csv(out / f"sub{i:02d}.csv")
        print(out / f"sub{i:02d}.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
