"""Synthetic heteroscedastic causal models and data generation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericError
from .graph import Dag, _parent_lists, topological_order

PRIMITIVES = ("linear", "square", "sin", "log", "sigmoid")
COEF_RANGE = (0.5, 2.0)
LOGPREC_SCALE = 0.5
# safety bound on the log-precision; inactive for typical unit-scale parents
LOGPREC_CLIP = 20.0


def _primitive(tag: str, x: np.ndarray) -> np.ndarray:
    if tag == "linear":
        return x
    if tag == "square":
        return x**2
    if tag == "sin":
        return np.sin(2 * np.pi * x)
    if tag == "log":
        # min taken over the generated column of this dataset
        return np.log(x - x.min() + 1)
    if tag == "sigmoid":
        return expit(x)
    raise ValueError(f"unknown primitive {tag!r}")


@dataclass(frozen=True)
class Term:
    parent: int
    tag: str
    coef: float


@dataclass(frozen=True)
class NodeMechanism:
    eta1: tuple = ()
    logprec: tuple = ()
    eta1_intercept: float = 0.0
    logprec_intercept: float = 0.0


@dataclass(frozen=True)
class HcmModel:
    """Per-node mechanisms for ``eta1`` and ``ln(-2 eta2)`` bound to a graph."""

    g: Dag
    nodes: tuple

    def eta1(self, i: int, X: np.ndarray) -> np.ndarray:
        mech = self.nodes[i]
        out = np.full(X.shape[0], mech.eta1_intercept, dtype=float)
        for t in mech.eta1:
            out += t.coef * _primitive(t.tag, X[:, t.parent])
        return out

    def logprec(self, i: int, X: np.ndarray) -> np.ndarray:
        mech = self.nodes[i]
        out = np.full(X.shape[0], mech.logprec_intercept, dtype=float)
        for t in mech.logprec:
            out += t.coef * _primitive(t.tag, X[:, t.parent])
        return np.clip(out, -LOGPREC_CLIP, LOGPREC_CLIP)

    def eta2(self, i: int, X: np.ndarray) -> np.ndarray:
        return -0.5 * np.exp(self.logprec(i, X))

    def conditional_moments(self, i: int, X: np.ndarray):
        """``(mu, sigma)`` of node ``i`` given the parent columns of ``X``."""
        s = self.logprec(i, X)
        return self.eta1(i, X) * np.exp(-s), np.exp(-0.5 * s)

    def to_dict(self) -> dict:
        return {
            "graph": self.g.to_dict(),
            "nodes": [
                {
                    "eta1": [[t.parent, t.tag, t.coef] for t in m.eta1],
                    "logprec": [[t.parent, t.tag, t.coef] for t in m.logprec],
                    "eta1_intercept": m.eta1_intercept,
                    "logprec_intercept": m.logprec_intercept,
                }
                for m in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HcmModel":
        nodes = tuple(
            NodeMechanism(
                tuple(Term(int(p), t, float(c)) for p, t, c in m["eta1"]),
                tuple(Term(int(p), t, float(c)) for p, t, c in m["logprec"]),
                float(m.get("eta1_intercept", 0.0)),
                float(m.get("logprec_intercept", 0.0)),
            )
            for m in doc["nodes"]
        )
        return cls(Dag.from_dict(doc["graph"]), nodes)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "HcmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _coef(rng: np.random.Generator) -> float:
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(*COEF_RANGE))


def _sample_model(g: Dag, seed: int, nonlinear: bool) -> HcmModel:
    rng = np.random.default_rng(seed)
    nodes = []
    for pa in _parent_lists(g):
        terms = {"eta1": [], "logprec": []}
        for j in pa:
            for key in terms:
                tag = PRIMITIVES[rng.integers(len(PRIMITIVES))] if nonlinear else "linear"
                c = _coef(rng)
                if key == "logprec":
                    c *= LOGPREC_SCALE
                terms[key].append(Term(j, tag, c))
        nodes.append(NodeMechanism(tuple(terms["eta1"]), tuple(terms["logprec"])))
    return HcmModel(g, tuple(nodes))


def sample_linear_model(g: Dag, seed: int) -> HcmModel:
    return _sample_model(g, seed, nonlinear=False)


def sample_nonlinear_model(g: Dag, seed: int) -> HcmModel:
    return _sample_model(g, seed, nonlinear=True)


@dataclass
class Dataset:
    values: np.ndarray
    names: list | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataError(f"dataset must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("dataset contains non-finite entries")
        if self.names is not None and len(self.names) != self.values.shape[1]:
            raise DataError("names length does not match column count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.names:
            w.writerow(self.names)
        for row in self.values:
            w.writerow(repr(float(v)) for v in row)
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Parse a numeric CSV; a first row that is not numeric is taken as header."""
        rows = list(csv.reader(Path(path).read_text().splitlines()))
        rows = [r for r in rows if r]
        if not rows:
            raise DataError(f"{path}: empty file")
        names = None
        start = 0
        try:
            [float(v) for v in rows[0]]
        except ValueError:
            names = [v.strip() for v in rows[0]]
            start = 1
        width = len(rows[start]) if start < len(rows) else len(names or [])
        data = []
        for lineno, r in enumerate(rows[start:], start=start + 1):
            if len(r) != width:
                raise DataError(f"{path}: row {lineno} has {len(r)} fields, expected {width}")
            try:
                data.append([float(v) for v in r])
            except ValueError as e:
                raise DataError(f"{path}: row {lineno}: {e}") from None
        if not data:
            raise DataError(f"{path}: no data rows")
        arr = np.array(data)
        if not np.all(np.isfinite(arr)):
            bad = int(np.nonzero(~np.all(np.isfinite(arr), axis=1))[0][0]) + start + 1
            raise DataError(f"{path}: row {bad} contains non-finite values")
        return cls(arr, names)


def generate(model: HcmModel, n: int, seed: int, return_noise: bool = False,
             normalize: bool = False):
    """Draw ``n`` samples ``X_i = mu_i + sigma_i * E_i`` in topological order.

    With ``normalize`` each column is divided by its sample standard
    deviation as soon as it is generated, so children see unit-scale
    parents. Division by a constant keeps the data an HCM (and keeps linear
    natural-parameter maps linear, up to a log-precision intercept) while
    stopping marginal variances from growing along causal paths.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = model.g
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, g.d))
    X = np.zeros((n, g.d))
    for i in topological_order(g):
        with np.errstate(all="ignore"):
            mu, sigma = model.conditional_moments(i, X)
            X[:, i] = mu + sigma * noise[:, i]
        if not np.all(np.isfinite(X[:, i])):
            raise NumericError(f"non-finite values generated at node {i}")
        if normalize:
            sd = X[:, i].std()
            if sd > 0:
                X[:, i] /= sd
    ds = Dataset(X)
    return (ds, noise) if return_noise else ds


def standardize(ds: Dataset) -> Dataset:
    X = ds.values
    sd = X.std(axis=0)
    const = np.nonzero(~(sd > 0))[0]
    if const.size:
        raise DataError(f"constant column(s) {const.tolist()} cannot be standardized")
    return Dataset((X - X.mean(axis=0)) / sd, ds.names)
