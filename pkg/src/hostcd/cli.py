"""Command line front end: ``hostcd {generate,order,learn,eval,bench}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .graph import GRAPH_FAMILIES, Dag, random_graph
from .metrics import Scores, auc, f1, order_divergence, pvalues_to_scores, shd
from .natgauss import FitConfig
from .ordering import OrderConfig, Ordering, eqvar_order, host_order, varsort_order
from .recovery import CiConfig, recover_dag
from .synth import Dataset, HcmModel, generate, sample_linear_model, sample_nonlinear_model, standardize

log = logging.getLogger("hostcd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
METHODS = ("host", "varsort", "eqvar")
RESULT_COLUMNS = ("family", "mechanism", "n", "d", "seed", "method", "order_divergence",
                  "shd", "f1", "auc", "wall_time_seconds", "error")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed_for(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def _family_seed(family: str) -> int:
    return list(GRAPH_FAMILIES).index(family)


def simulate(family: str, mechanism: str, d: int, n: int, seed: int, normalize: bool = True):
    """Graph, model and dataset for one benchmark cell, all derived from ``seed``."""
    if mechanism not in ("linear", "nonlinear"):
        raise UsageError(f"unknown mechanism {mechanism!r}")
    g = random_graph(family, d, _seed_for(seed, 0, _family_seed(family), d))
    sampler = sample_linear_model if mechanism == "linear" else sample_nonlinear_model
    model = sampler(g, _seed_for(seed, 1))
    ds = generate(model, n, _seed_for(seed, 2, n), normalize=normalize)
    return g, model, ds


def _fit_config(args) -> FitConfig:
    return FitConfig(lr=args.lr, max_iter=args.iters, hidden=args.hidden, seed=args.seed)


def _order_config(args) -> OrderConfig:
    return OrderConfig(epsilon=args.epsilon, fit=_fit_config(args), seed=args.seed, jobs=args.jobs)


def _ci_config(args) -> CiConfig:
    return CiConfig(alpha=args.alpha, permutations=args.permutations, fit=_fit_config(args),
                    seed=args.seed)


def _order(method: str, ds: Dataset, ocfg: OrderConfig, stats=None) -> Ordering:
    if method == "host":
        return host_order(ds, ocfg, stats=stats)
    if method == "varsort":
        return varsort_order(ds)
    if method == "eqvar":
        return eqvar_order(ds)
    raise UsageError(f"unknown method {method!r}")


def _write_matrix(path: Path, M: np.ndarray) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in M:
        w.writerow("" if np.isnan(v) else repr(float(v)) for v in row)
    path.write_text(buf.getvalue())


def _read_matrix(path) -> np.ndarray:
    rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r]
    try:
        return np.array([[np.nan if v == "" else float(v) for v in r] for r in rows])
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None


def _load_graph(path) -> Dag:
    try:
        return Dag.load(path)
    except (OSError, KeyError, ValueError, TypeError) as e:
        raise DataError(f"{path}: cannot read graph: {e}") from None


def score(g_pred: Dag, g_true: Dag, pi=None, pvalues=None) -> Scores:
    if g_pred.d != g_true.d:
        raise DataError(f"dimension mismatch: predicted d={g_pred.d}, truth d={g_true.d}")
    a = None
    if pvalues is not None:
        try:
            a = auc(pvalues_to_scores(pvalues), g_true)
        except ValueError:
            a = None
    return Scores(
        order_divergence=None if pi is None else order_divergence(pi, g_true),
        shd=shd(g_pred, g_true),
        f1=f1(g_pred, g_true),
        auc=a,
    )


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        g, model, ds = simulate(args.family, args.mechanism, args.d, args.n, args.seed,
                                normalize=not args.raw_scale)
    except ValueError as e:
        raise DataError(str(e)) from None
    paths = {"data": out / "data.csv", "model": out / "model.json", "graph": out / "graph.json"}
    ds.to_csv(paths["data"])
    model.save(paths["model"])
    g.save(paths["graph"])
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_order(args) -> int:
    ds = Dataset.from_csv(args.data)
    order = _order(args.method, ds, _order_config(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    order.save(out / "ordering.json")
    print(out / "ordering.json")
    return EXIT_OK


def cmd_learn(args) -> int:
    ds = Dataset.from_csv(args.data)
    if ds.n < 50:
        raise DataError(f"{args.data}: need at least 50 rows, got {ds.n}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats: dict = {}
    std = standardize(ds)
    order = _order(args.method, std, _order_config(args), stats)
    g, P = recover_dag(std, order, _ci_config(args), stats=stats, return_pvalues=True)
    log.info("fits=%s ci_tests=%d (d(d-1)/2=%d)", stats.get("fits", 0),
             stats["ci_tests"], ds.d * (ds.d - 1) // 2)
    order.save(out / "ordering.json")
    g.save(out / "graph.json")
    _write_matrix(out / "pvalues.csv", P)
    written = [out / "ordering.json", out / "graph.json", out / "pvalues.csv"]
    if args.truth:
        truth = _load_graph(args.truth)
        sc = score(g, truth, order.pi, P)
        (out / "scores.json").write_text(json.dumps(sc.to_dict(), sort_keys=True) + "\n")
        written.append(out / "scores.json")
    for p in written:
        print(p)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = _load_graph(args.pred)
    truth = _load_graph(args.truth)
    pi = Ordering.load(args.pi).pi if args.pi else None
    P = _read_matrix(args.pvalues) if args.pvalues else None
    print(json.dumps(score(pred, truth, pi, P).to_dict(), sort_keys=True))
    return EXIT_OK


@dataclass
class ExperimentConfig:
    families: list = field(default_factory=lambda: ["ER-1"])
    mechanism: str = "linear"
    sample_sizes: list = field(default_factory=lambda: [500])
    dims: list = field(default_factory=lambda: [10])
    seeds: list = field(default_factory=lambda: [0])
    methods: list = field(default_factory=lambda: list(METHODS))
    recover: bool = True
    epsilon: float = 1e-4
    alpha: float = 1e-3
    permutations: int = 1999
    hidden: int = 0
    lr: float = 1e-2
    iters: int = 2000
    out: str = "bench_out"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        for name in ("families", "sample_sizes", "dims", "seeds", "methods"):
            if not getattr(cfg, name):
                raise UsageError(f"config list {name!r} is empty")
        bad = set(cfg.families) - set(GRAPH_FAMILIES)
        if bad:
            raise UsageError(f"unknown graph families {sorted(bad)}")
        bad = set(cfg.methods) - set(METHODS)
        if bad:
            raise UsageError(f"unknown methods {sorted(bad)}")
        if cfg.mechanism not in ("linear", "nonlinear"):
            raise UsageError(f"unknown mechanism {cfg.mechanism!r}")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(doc)

    def cells(self):
        for fam in self.families:
            for n in self.sample_sizes:
                for d in self.dims:
                    for seed in self.seeds:
                        for method in self.methods:
                            yield (fam, self.mechanism, int(n), int(d), int(seed), method)


def run_cell(cell, cfg: ExperimentConfig) -> dict:
    fam, mech, n, d, seed, method = cell
    row = dict(zip(RESULT_COLUMNS, (fam, mech, n, d, seed, method)))
    fcfg = FitConfig(lr=cfg.lr, max_iter=cfg.iters, hidden=cfg.hidden, seed=seed)
    t0 = time.perf_counter()
    try:
        g, _, ds = simulate(fam, mech, d, n, seed)
        std = standardize(ds)
        stats: dict = {}
        order = _order(method, std, OrderConfig(cfg.epsilon, fcfg, seed), stats)
        row["order_divergence"] = order_divergence(order.pi, g)
        if cfg.recover:
            ccfg = CiConfig(cfg.alpha, cfg.permutations, fcfg, seed)
            g_hat, P = recover_dag(std, order, ccfg, stats=stats, return_pvalues=True)
            sc = score(g_hat, g, order.pi, P)
            row.update(shd=sc.shd, f1=sc.f1, auc=sc.auc)
        log.info("%s: fits=%s ci_tests=%s (d(d-1)/2=%d)", cell, stats.get("fits", 0),
                 stats.get("ci_tests", 0), d * (d - 1) // 2)
    except (DataError, NumericError, ValueError) as e:
        row["error"] = f"{type(e).__name__}: {e}"
    row["wall_time_seconds"] = round(time.perf_counter() - t0, 3)
    return row


def _cell_key(row) -> tuple:
    return (row["family"], row["mechanism"], int(row["n"]), int(row["d"]), int(row["seed"]),
            row["method"])


def _write_results(path: Path, rows: dict, order: list) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n", restval="")
    w.writeheader()
    for key in order:
        if key in rows:
            w.writerow({k: ("" if v is None else v) for k, v in rows[key].items()})
    tmp = path.with_suffix(".tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)


def run_bench(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> Path:
    """Run every cell not already present in ``out/results.csv``; returns the table path."""
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    order = list(dict.fromkeys(cfg.cells()))
    rows: dict = {}
    if path.exists():
        with path.open() as fh:
            for r in csv.DictReader(fh):
                if not r.get("error"):
                    rows[_cell_key(r)] = r
    todo = [c for c in order if c not in rows]
    log.info("%d cells, %d cached, %d to run", len(order), len(order) - len(todo), len(todo))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            futures = {ex.submit(run_cell, c, cfg): c for c in todo}
            for fut in futures:
                rows[futures[fut]] = fut.result()
                _write_results(path, rows, order)
    else:
        for c in todo:
            rows[c] = run_cell(c, cfg)
            _write_results(path, rows, order)
    _write_results(path, rows, order)
    return path


def cmd_bench(args) -> int:
    if not args.config:
        raise UsageError("bench requires --config")
    cfg = ExperimentConfig.load(args.config)
    out = Path(args.out if args.out != "." else cfg.out)
    path = run_bench(cfg, out, args.jobs)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--epsilon", type=float, default=1e-4)
    common.add_argument("--alpha", type=float, default=1e-3)
    common.add_argument("--permutations", type=int, default=1999)
    common.add_argument("--hidden", type=int, default=0, help="hidden units (0 = linear heads)")
    common.add_argument("--lr", type=float, default=1e-2)
    common.add_argument("--iters", type=int, default=2000)
    common.add_argument("--config")
    common.add_argument("--out", default=".")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="hostcd", description="Heteroscedastic causal structure learning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="simulate a dataset")
    g.add_argument("--family", default="ER-1", choices=list(GRAPH_FAMILIES))
    g.add_argument("--mechanism", default="linear", choices=["linear", "nonlinear"])
    g.add_argument("-d", "--d", type=int, default=10)
    g.add_argument("-n", "--n", type=int, default=500)
    g.add_argument("--raw-scale", action="store_true",
                   help="do not rescale columns to unit variance during generation")
    g.set_defaults(func=cmd_generate)

    o = sub.add_parser("order", parents=[common], help="compute a causal ordering")
    o.add_argument("data")
    o.add_argument("--method", default="host", choices=METHODS)
    o.set_defaults(func=cmd_order)

    le = sub.add_parser("learn", parents=[common], help="order + DAG recovery")
    le.add_argument("data")
    le.add_argument("--truth", help="ground-truth graph file; writes scores.json")
    le.add_argument("--method", default="host", choices=METHODS)
    le.set_defaults(func=cmd_learn)

    e = sub.add_parser("eval", parents=[common], help="score a predicted graph")
    e.add_argument("pred")
    e.add_argument("truth")
    e.add_argument("--pi", help="ordering file")
    e.add_argument("--pvalues", help="p-value matrix (CSV) for AUC")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark sweep")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"hostcd: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"hostcd {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"hostcd {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"hostcd {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
