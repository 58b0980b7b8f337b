"""Heteroscedastic Gaussian regression in natural parameters.

The conditional law of ``X_i - a`` given ``X_C`` is modelled as a Gaussian
with natural parameters ``eta1(x_C)`` and ``eta2(x_C) = -exp(s(x_C)) / 2``,
where both ``eta1`` and the log-precision ``s = ln(-2 eta2)`` are small
networks (affine maps by default, or one tanh hidden layer) and ``a`` is a
learned location. The location keeps the model family closed under
translation of the target, which affine ``eta1`` heads alone are not.
Parameters maximise the average log-likelihood by full-batch Adam ascent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, NumericError

log = logging.getLogger(__name__)


def loglik(eta1, eta2, x):
    """Gaussian log-density in natural parameters, without the ``-ln(2 pi)/2`` constant."""
    eta1 = np.asarray(eta1, dtype=float)
    eta2 = np.asarray(eta2, dtype=float)
    if np.any(eta2 >= 0):
        raise ValueError("eta2 must be strictly negative")
    x = np.asarray(x, dtype=float)
    return eta1 * x + eta2 * x**2 + eta1**2 / (4 * eta2) + 0.5 * np.log(-2 * eta2)


def loglik_hessian(eta1: float, eta2: float) -> np.ndarray:
    """Hessian of :func:`loglik` w.r.t. ``(eta1, eta2)``; independent of ``x``."""
    if eta2 >= 0:
        raise ValueError("eta2 must be strictly negative")
    h11 = 1 / (2 * eta2)
    h12 = -eta1 / (2 * eta2**2)
    h22 = eta1**2 / (2 * eta2**3) - 1 / (2 * eta2**2)
    return np.array([[h11, h12], [h12, h22]])


def natural_to_moments(eta1, eta2):
    eta2 = np.asarray(eta2, dtype=float)
    return -np.asarray(eta1) / (2 * eta2), 1 / np.sqrt(-2 * eta2)


def moments_to_natural(mu, sigma):
    var = np.asarray(sigma, dtype=float) ** 2
    return np.asarray(mu) / var, -1 / (2 * var)


@dataclass(frozen=True)
class FitConfig:
    lr: float = 1e-2
    max_iter: int = 2000
    tol: float = 1e-6
    patience: int = 50
    hidden: int = 0
    seed: int = 0
    max_halvings: int = 10

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.hidden < 0:
            raise ValueError("hidden must be >= 0")


class NatParamModel:
    """Two scalar-output heads (``eta1`` and ``ln(-2 eta2)``) over ``input_dim`` inputs.

    ``hidden == 0`` gives affine heads ``b + x @ w``; otherwise each head is
    ``tanh(x @ W.T + c) @ v + b`` with ``hidden`` units. The last parameter
    is the target location ``a``: the heads describe ``y - a``.
    """

    def __init__(self, input_dim: int, hidden: int = 0):
        self.input_dim = int(input_dim)
        self.hidden = int(hidden) if input_dim > 0 else 0
        p, h = self.input_dim, self.hidden
        self.head_size = 1 + p if h == 0 else h * p + h + h + 1
        self.n_params = 2 * self.head_size + 1

    def init_params(self, rng: np.random.Generator, eta1_bias=0.0, s_bias=0.0,
                    location=0.0) -> np.ndarray:
        theta = np.zeros(self.n_params)
        theta[-1] = location
        for k, bias in enumerate((eta1_bias, s_bias)):
            head = theta[k * self.head_size:(k + 1) * self.head_size]
            if self.hidden == 0:
                head[0] = bias
            else:
                p, h = self.input_dim, self.hidden
                head[:h * p] = rng.normal(0.0, 1.0 / np.sqrt(p), h * p)
                head[h * p:h * p + h] = rng.normal(0.0, 0.1, h)
                # output weights start at zero so the initial model is the constant one
                head[-1] = bias
        return theta

    def _unpack(self, head: np.ndarray):
        p, h = self.input_dim, self.hidden
        if h == 0:
            return head[0], head[1:]
        W = head[:h * p].reshape(h, p)
        c = head[h * p:h * p + h]
        v = head[h * p + h:h * p + 2 * h]
        return W, c, v, head[-1]

    def _head_forward(self, head, X):
        if self.hidden == 0:
            b, w = self._unpack(head)
            return b + X @ w, None
        W, c, v, b = self._unpack(head)
        H = np.tanh(X @ W.T + c)
        return H @ v + b, H

    def _head_backward(self, head, X, cache, g):
        """Gradient of ``mean(g * out)`` w.r.t. the head parameters."""
        n = X.shape[0]
        if self.hidden == 0:
            return np.concatenate(([g.sum()], X.T @ g)) / n
        W, c, v, b = self._unpack(head)
        H = cache
        gv = H.T @ g
        gpre = np.outer(g, v) * (1 - H**2)
        gW = gpre.T @ X
        gc = gpre.sum(axis=0)
        return np.concatenate((gW.ravel(), gc, gv, [g.sum()])) / n

    def heads(self, theta, X):
        """Return ``(eta1, s)`` with ``s = ln(-2 eta2)``."""
        X = _as_2d(X)
        hs = self.head_size
        eta1, _ = self._head_forward(theta[:hs], X)
        s, _ = self._head_forward(theta[hs:2 * hs], X)
        return eta1, s

    @staticmethod
    def location(theta) -> float:
        return theta[-1]

    def natural(self, theta, X):
        eta1, s = self.heads(theta, X)
        return eta1, -0.5 * np.exp(s)

    def objective(self, theta, X, y) -> float:
        eta1, s = self.heads(theta, X)
        return float(np.mean(_loglik_s(eta1, s, y - theta[-1])))

    def objective_and_gradient(self, theta, X, y):
        X = _as_2d(X)
        hs = self.head_size
        eta1, c1 = self._head_forward(theta[:hs], X)
        s, c2 = self._head_forward(theta[hs:2 * hs], X)
        y = y - theta[-1]
        half = np.exp(-0.5 * s)
        u = (y - eta1 * half**2) / half
        f = float(np.mean(-0.5 * u**2 + 0.5 * s))
        g1 = u * half
        g2 = 0.5 - 0.5 * u**2 - eta1 * half * u
        grad = np.concatenate((
            self._head_backward(theta[:hs], X, c1, g1),
            self._head_backward(theta[hs:2 * hs], X, c2, g2),
            [np.mean(u / half)],
        ))
        return f, grad

    def gradient(self, theta, X, y) -> np.ndarray:
        return self.objective_and_gradient(theta, X, y)[1]


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def _loglik_s(eta1, s, y):
    # loglik with eta2 = -exp(s)/2 substituted, written as -u^2/2 + s/2 with the
    # standardised residual u; the expanded form cancels badly for large s
    u = (y - eta1 * np.exp(-s)) * np.exp(0.5 * s)
    return -0.5 * u**2 + 0.5 * s


def gradient(model: NatParamModel, theta, x_c, x_i) -> np.ndarray:
    """Analytic gradient of the mean log-likelihood w.r.t. all parameters."""
    return model.gradient(np.asarray(theta, float), x_c, np.asarray(x_i, float))


@dataclass(frozen=True)
class NatParamFit:
    model: NatParamModel
    theta: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    loglik: float
    n_iter: int = 0
    converged: bool = True
    history: tuple = field(default=(), repr=False)

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    def _prep(self, x_c, n=None) -> np.ndarray:
        if x_c is None or (self.input_dim == 0 and np.size(x_c) == 0):
            if n is None:
                raise ValueError("sample count unknown without conditioning columns")
            return np.empty((n, 0))
        x_c = _as_2d(x_c)
        if x_c.shape[1] != self.input_dim:
            raise ValueError(
                f"expected {self.input_dim} conditioning columns, got {x_c.shape[1]}"
            )
        if n is not None and x_c.shape[0] != n:
            raise ValueError(f"row mismatch: {x_c.shape[0]} vs {n}")
        return (x_c - self.x_mean) / self.x_scale

    def mu(self, x_c, n=None) -> np.ndarray:
        eta1, s = self.model.heads(self.theta, self._prep(x_c, n))
        return (self.theta[-1] + eta1 * np.exp(-s)) * self.y_scale + self.y_mean

    def sigma(self, x_c, n=None) -> np.ndarray:
        _, s = self.model.heads(self.theta, self._prep(x_c, n))
        return np.exp(-0.5 * s) * self.y_scale

    def residuals(self, x_c, x_i) -> np.ndarray:
        x_i = np.asarray(x_i, dtype=float).ravel()
        eta1, s = self.model.heads(self.theta, self._prep(x_c, x_i.size))
        y = (x_i - self.y_mean) / self.y_scale - self.theta[-1]
        return (y - eta1 * np.exp(-s)) * np.exp(0.5 * s)


def _as_design(x_c, n: int) -> np.ndarray:
    if x_c is None:
        return np.empty((n, 0))
    x_c = np.asarray(x_c, dtype=float)
    if x_c.size == 0:
        return np.empty((n, 0))
    if x_c.ndim == 1:
        x_c = x_c[:, None]
    if x_c.shape[0] != n:
        raise DataError(f"x_c has {x_c.shape[0]} rows, x_i has {n}")
    return x_c


def fit(x_c, x_i, cfg: FitConfig = FitConfig()) -> NatParamFit:
    """Maximum-likelihood fit of ``x_i | x_c``.

    Conditioning columns and target are centred and scaled; the learned
    location absorbs the target shift. With no conditioning columns the exact
    unconditional MLE is returned without optimisation. Affine heads start
    from the better of two closed-form warm starts (see :func:`_warm_start`).
    """
    y_raw = np.asarray(x_i, dtype=float).ravel()
    n = y_raw.size
    X_raw = _as_design(x_c, n)
    if n < 10:
        raise DataError(f"need at least 10 samples, got {n}")
    if not (np.all(np.isfinite(y_raw)) and np.all(np.isfinite(X_raw))):
        raise DataError("non-finite values in fit inputs")
    y_mean = float(y_raw.mean())
    sd = float(y_raw.std())
    if not sd > 0:
        raise DataError("target column is constant")
    y = (y_raw - y_mean) / sd
    p = X_raw.shape[1]
    x_mean = X_raw.mean(axis=0)
    x_scale = X_raw.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    X = (X_raw - x_mean) / x_scale

    model = NatParamModel(p, cfg.hidden)
    rng = np.random.default_rng(cfg.seed)
    # all-zero heads: the unconditional MLE of the standardised target
    theta = model.init_params(rng)
    if p == 0:
        ll = model.objective(theta, X, y) - np.log(sd)
        return NatParamFit(model, theta, x_mean, x_scale, y_mean, sd, ll)
    if model.hidden == 0:
        theta = _warm_start(model, theta, X, y)

    theta, f, n_iter, converged, history = _adam_ascent(model, theta, X, y, cfg)
    return NatParamFit(model, theta, x_mean, x_scale, y_mean, sd, f - np.log(sd), n_iter,
                       converged, tuple(history))


def _affine_given_s(A, y, s):
    """Best ``(eta1 weights, location)`` for a fixed log-precision ``s``.

    With ``s`` fixed the objective is ``-mean(exp(s) (y - a - eta1 exp(-s))^2) / 2``
    up to terms free of ``a`` and ``eta1``, a weighted least-squares problem.
    """
    F = np.column_stack([A * np.exp(-s)[:, None], np.ones(len(y))])
    sw = np.exp(0.5 * s)
    sol = np.linalg.lstsq(F * sw[:, None], y * sw, rcond=None)[0]
    return sol[:-1], sol[-1]


def _s_block(A, r, eta1, c):
    s = A @ c
    half = np.exp(-0.5 * s)
    u = (r - eta1 * half**2) / half
    return s, half, u, np.mean(-0.5 * u**2 + 0.5 * s)


def _s_given_affine(A, r, eta1, c, steps=25):
    """Newton ascent on the log-precision block for fixed ``eta1`` and location.

    For fixed ``eta1`` the per-sample objective ``-u^2/2 + s/2`` (``u`` the
    standardised residual of the centred target ``r``) is concave in ``s``,
    hence in affine ``s`` weights.
    """
    n = len(r)
    s, half, u, f = _s_block(A, r, eta1, c)
    for _ in range(steps):
        if not np.isfinite(f):
            break
        g = A.T @ (0.5 - 0.5 * u**2 - eta1 * half * u) / n
        curv = 0.5 * ((r / half) ** 2 + (eta1 * half) ** 2)
        H = (A * curv[:, None]).T @ A / n
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
            break
        step = np.linalg.lstsq(H, g, rcond=None)[0]
        # backtrack to keep the block objective non-decreasing
        for _ in range(30):
            cand = _s_block(A, r, eta1, c + step)
            if np.isfinite(cand[3]) and cand[3] >= f:
                break
            step = step / 2
        else:
            break
        improvement = cand[3] - f
        c = c + step
        s, half, u, f = cand
        if improvement < 1e-12 * (1 + abs(f)):
            break
    return c


def _profile_ascent(model: NatParamModel, A, X, y, c, maxiter=500):
    """Maximise over log-precision weights with ``eta1`` and location profiled out.

    Each evaluation solves the weighted least-squares problem for the other
    parameters, so by the envelope theorem the profile gradient is the
    log-precision block of the full gradient. Quasi-Newton steps from scipy.
    """
    hs = A.shape[1]

    def full(c):
        b, a = _affine_given_s(A, y, np.clip(A @ c, -600.0, 600.0))
        return np.concatenate([b, c, [a]])

    def neg(c):
        f, g = model.objective_and_gradient(full(c), X, y)
        if not np.isfinite(f):
            return np.inf, np.zeros_like(c)
        return -f, -g[hs:2 * hs]

    res = minimize(neg, c, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    return full(res.x)


def _alternate(model: NatParamModel, A, X, y, c, rounds=50, tol=1e-9):
    """Alternate the exact ``(eta1, location)`` solve with Newton on the log-precision block."""
    best, best_f = None, -np.inf
    for _ in range(rounds):
        b, a = _affine_given_s(A, y, np.clip(A @ c, -600.0, 600.0))
        c = _s_given_affine(A, y - a, A @ b, c)
        cand = np.concatenate([b, c, [a]])
        f = model.objective(cand, X, y)
        if not np.isfinite(f) or f - best_f < tol:
            if np.isfinite(f) and f > best_f:
                best, best_f = cand, f
            break
        best, best_f = cand, f
    return best


def _warm_start(model: NatParamModel, theta, X, y):
    """Starting point for affine heads.

    The likelihood is not jointly concave in the head weights, and when the
    noise is small relative to the spread of the mean the optimum sits at
    large weights in a narrow basin that a fixed-rate first-order method
    neither finds nor reaches quickly. For fixed log-precision the ``eta1``
    head and location solve a weighted least-squares problem; for fixed
    ``eta1`` and location the log-precision block is concave. From two starts
    -- constant log-precision, and a regression of log squared least-squares
    residuals on the inputs (``E ln chi2_1 = -1.2704``) -- both a profiled
    quasi-Newton ascent and a block alternation are run; the best candidate
    by objective is returned.
    """
    n = len(y)
    A = np.column_stack([np.ones(n), X])
    r = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    floor = 1e-12 * np.mean(r**2) + np.finfo(float).tiny
    c_resid = np.linalg.lstsq(A, -np.log(r**2 + floor) - 1.2704, rcond=None)[0]
    hs = A.shape[1]
    best, best_f = theta, model.objective(theta, X, y)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        for c0 in (np.zeros(hs), c_resid):
            alt = _alternate(model, A, X, y, c0)
            cands = [_profile_ascent(model, A, X, y, c0), alt]
            if alt is not None:
                cands.append(_profile_ascent(model, A, X, y, alt[hs:2 * hs]))
            for cand in cands:
                if cand is None:
                    continue
                f = model.objective(cand, X, y)
                if np.isfinite(f) and f > best_f:
                    best, best_f = cand, f
    return best


def _adam_ascent(model, theta, X, y, cfg: FitConfig, beta1=0.9, beta2=0.999, eps=1e-8):
    """Adam ascent that only accepts non-decreasing steps.

    A rejected step (non-finite or lower objective) halves the learning
    rate and restarts the moment estimates; an accepted step lets the rate recover towards
    ``cfg.lr``. Stops after ``max_halvings`` consecutive rejections or when
    the best objective improves by less than ``tol`` over ``patience``
    accepted iterations.
    """
    f, g = model.objective_and_gradient(theta, X, y)
    if not np.isfinite(f):
        raise NumericError("non-finite objective at iteration 0")
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr = cfg.lr
    t = 0
    halvings = 0
    history = [f]
    last_check = f
    converged = False
    for it in range(1, cfg.max_iter + 1):
        t += 1
        m_new = beta1 * m + (1 - beta1) * g
        v_new = beta2 * v + (1 - beta2) * g * g
        step = lr * (m_new / (1 - beta1**t)) / (np.sqrt(v_new / (1 - beta2**t)) + eps)
        cand = theta + step
        with np.errstate(over="ignore", invalid="ignore"):
            f_new, g_new = model.objective_and_gradient(cand, X, y)
        if not np.isfinite(f_new) or f_new < f:
            halvings += 1
            if halvings > cfg.max_halvings:
                if not np.isfinite(f_new):
                    log.debug("step rejected as non-finite at iteration %d", it)
                converged = True
                break
            # restart the moments: a bare sign(g) step is an ascent direction
            lr *= 0.5
            t = 0
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
            continue
        halvings = 0
        lr = min(cfg.lr, lr * 1.5)
        theta, f, g, m, v = cand, f_new, g_new, m_new, v_new
        history.append(f)
        if len(history) % cfg.patience == 0:
            if f - last_check < cfg.tol:
                converged = True
                break
            last_check = f
    if not np.all(np.isfinite(theta)):
        raise NumericError(f"non-finite parameters at iteration {it}")
    return theta, f, it, converged, history


def residuals(f: NatParamFit, x_c, x_i) -> np.ndarray:
    """Standardised residuals ``(x_i - mu(x_c)) / sigma(x_c)``."""
    return f.residuals(x_c, x_i)
