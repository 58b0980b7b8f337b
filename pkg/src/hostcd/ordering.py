"""Causal ordering: HOST's normality-driven source search, an oracle, and baselines."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .graph import Dag, _parent_lists
from .natgauss import FitConfig, fit
from .normality import shapiro_wilk_w
from .synth import Dataset, standardize


@dataclass(frozen=True)
class Ordering:
    pi: tuple
    layers: tuple
    w_trace: tuple = ()

    def __post_init__(self):
        pi = tuple(int(v) for v in self.pi)
        layers = tuple(tuple(int(v) for v in layer) for layer in self.layers)
        if sorted(pi) != list(range(len(pi))):
            raise ValueError(f"pi is not a permutation: {pi}")
        if tuple(v for layer in layers for v in layer) != pi:
            raise ValueError("layers do not concatenate to pi")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "layers", layers)

    @classmethod
    def singletons(cls, pi) -> "Ordering":
        return cls(tuple(pi), tuple((v,) for v in pi))

    def to_dict(self) -> dict:
        return {
            "pi": list(self.pi),
            "layers": [list(layer) for layer in self.layers],
            "w_trace": [list(step) for step in self.w_trace],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Ordering":
        layers = doc.get("layers") or [[v] for v in doc["pi"]]
        return cls(tuple(doc["pi"]), tuple(map(tuple, layers)),
                   tuple(tuple(step) for step in doc.get("w_trace", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Ordering":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class OrderConfig:
    epsilon: float = 1e-4
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def _fit_seed(seed: int, step: int, node: int) -> int:
    return int(np.random.SeedSequence([seed, step, node]).generate_state(1)[0])


def _score_candidate(X, placed, i, cfg: OrderConfig, step: int) -> float:
    fcfg = replace(cfg.fit, seed=_fit_seed(cfg.seed, step, i))
    try:
        f = fit(X[:, placed], X[:, i], fcfg)
        u = f.residuals(X[:, placed], X[:, i])
        return shapiro_wilk_w(u, seed=fcfg.seed).w
    except (DataError, NumericError, ValueError) as e:
        raise type(e)(f"node {i} at ordering step {step}: {e}") from e


def host_order(ds: Dataset, cfg: OrderConfig = OrderConfig(), stats: dict | None = None) -> Ordering:
    """Order variables by repeatedly admitting the most conditionally normal ones.

    At each step every unplaced variable is regressed on the placed set,
    the Shapiro-Wilk W of its standardised residuals is computed, and all
    variables within ``epsilon`` of the best W join the order as one layer
    (in decreasing W, ties by index). ``stats['fits']`` counts regressions.
    """
    if not isinstance(ds, Dataset):
        ds = Dataset(ds)
    if ds.n < 10:
        raise DataError(f"need at least 10 samples, got {ds.n}")
    X = standardize(ds).values
    d = ds.d
    placed: list[int] = []
    layers, trace = [], []
    n_fits = 0
    step = 0
    while len(placed) < d:
        remaining = [i for i in range(d) if i not in set(placed)]
        if cfg.jobs > 1 and len(remaining) > 1:
            with ThreadPoolExecutor(cfg.jobs) as ex:
                ws = list(ex.map(lambda i: _score_candidate(X, placed, i, cfg, step), remaining))
        else:
            ws = [_score_candidate(X, placed, i, cfg, step) for i in remaining]
        n_fits += len(remaining)
        w_star = max(ws)
        layer = [i for i, w in zip(remaining, ws) if w_star - w <= cfg.epsilon]
        wmap = dict(zip(remaining, ws))
        layer.sort(key=lambda i: (-wmap[i], i))
        placed.extend(layer)
        layers.append(tuple(layer))
        trace.append(tuple(ws))
        step += 1
    if stats is not None:
        stats["fits"] = stats.get("fits", 0) + n_fits
    return Ordering(tuple(placed), tuple(layers), tuple(trace))


def oracle_order(g: Dag) -> Ordering:
    """Topological levels: each layer is every vertex whose parents are all placed."""
    pa = _parent_lists(g)
    placed: set[int] = set()
    layers = []
    while len(placed) < g.d:
        layer = [i for i in range(g.d) if i not in placed and set(pa[i]) <= placed]
        placed.update(layer)
        layers.append(tuple(layer))
    return Ordering(tuple(v for layer in layers for v in layer), tuple(layers))


def varsort_order(ds: Dataset) -> Ordering:
    X = ds.values if isinstance(ds, Dataset) else np.asarray(ds, float)
    var = X.var(axis=0)
    return Ordering.singletons(sorted(range(X.shape[1]), key=lambda i: (var[i], i)))


def eqvar_order(ds: Dataset, ridge: float = 1e-8) -> Ordering:
    """Greedy minimum residual variance after OLS on the already placed variables."""
    X = ds.values if isinstance(ds, Dataset) else np.asarray(ds, float)
    n, d = X.shape
    if n <= d:
        raise DataError(f"eqvar needs n > d, got n={n}, d={d}")
    placed: list[int] = []
    while len(placed) < d:
        remaining = [i for i in range(d) if i not in set(placed)]
        Z = np.column_stack([np.ones(n), X[:, placed]])
        G = Z.T @ Z + ridge * np.eye(Z.shape[1])
        B = np.linalg.solve(G, Z.T @ X[:, remaining])
        rv = (X[:, remaining] - Z @ B).var(axis=0)
        placed.append(remaining[int(np.argmin(rv))])
    return Ordering.singletons(placed)
