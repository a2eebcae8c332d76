"""Oracle densities and the population quantities they determine."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DerivativeUnavailable, NonFiniteIntegrand
from .likelihood import ParamVector, exp_moments, newton_maximize
from .linalg import inv_pd, sqrt_pd
from .model import ModelSpec, eval_basis
from .quadrature import design, grid_sup

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _series_exp(g):
    """Power series of ``exp(g)`` for a series ``g`` with ``g[0] == 0``."""
    e = np.zeros_like(g)
    e[0] = 1.0
    for k in range(1, len(g)):
        j = np.arange(1, k + 1)
        e[k] = np.sum(j * g[j] * e[k - j]) / k
    return e


def _series_log(a):
    """Power series of ``log(a)`` for a series with ``a[0] == 1``."""
    out = np.zeros_like(a)
    for k in range(1, len(a)):
        j = np.arange(1, k)
        out[k] = a[k] - np.sum(j * out[j] * a[k - j]) / k
    return out


@dataclass(frozen=True)
class DensityOracle:
    """A known density with log-density derivatives.

    ``uniform`` and ``gaussian`` are products of identical 1-D factors over
    ``dim`` axes; ``gaussian_mixture`` is one-dimensional.  ``params``:

    * uniform: ``(a, b)``
    * gaussian: ``(mu, sigma)``
    * gaussian_mixture: ``(w1, mu1, s1, w2, mu2, s2, ...)``, weights normalised
    """

    kind: str
    params: tuple
    dim: int = 1

    def __post_init__(self):
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise ValueError("uniform needs params a < b")
        elif self.kind == "gaussian":
            if len(p) != 2 or not p[1] > 0:
                raise ValueError("gaussian needs params mu, sigma > 0")
        elif self.kind == "gaussian_mixture":
            if len(p) < 3 or len(p) % 3:
                raise ValueError("mixture needs (weight, mu, sigma) triplets")
            if self.dim != 1:
                raise ValueError("mixtures are one-dimensional")
            w = np.array(p[0::3])
            if np.any(w <= 0) or np.any(np.array(p[2::3]) <= 0):
                raise ValueError("mixture weights and sigmas must be positive")
        else:
            raise ValueError(f"unknown density kind {self.kind!r}")

    @property
    def components(self):
        p = np.array(self.params)
        w = p[0::3]
        return w / w.sum(), p[1::3], p[2::3]

    def _x(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(-1, self.dim)

    def log_pdf(self, x) -> np.ndarray:
        x = self._x(x)
        if self.kind == "uniform":
            a, b = self.params
            inside = np.all((x >= a) & (x <= b), axis=1)
            return np.where(inside, -self.dim * math.log(b - a), -np.inf)
        if self.kind == "gaussian":
            mu, s = self.params
            z = (x - mu) / s
            return np.sum(-0.5 * z * z - math.log(s) - LOG_SQRT_2PI, axis=1)
        w, mu, s = self.components
        z = (x - mu[None, :]) / s[None, :]
        terms = np.log(w) - np.log(s) - LOG_SQRT_2PI - 0.5 * z * z
        top = terms.max(axis=1, keepdims=True)
        return (top + np.log(np.exp(terms - top).sum(axis=1, keepdims=True)))[:, 0]

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def cdf_box(self, lo, hi) -> float:
        """Probability of the axis-aligned box ``[lo, hi]``."""
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,))
        if self.kind == "uniform":
            a, b = self.params
            return float(np.prod(np.clip((np.minimum(hi, b) - np.maximum(lo, a)) / (b - a), 0, 1)))
        if self.kind == "gaussian":
            mu, s = self.params
            return float(np.prod(ndtr((hi - mu) / s) - ndtr((lo - mu) / s)))
        w, mu, s = self.components
        return float(np.sum(w * (ndtr((hi[0] - mu) / s) - ndtr((lo[0] - mu) / s))))

    def taylor_coeffs(self, x0: float, order: int, axis: int = 0) -> np.ndarray:
        """Coefficients ``phi^(k)(x0) / k!`` for ``k <= order`` along one axis.

        The other coordinates do not matter: every oracle is separable.
        """
        c = np.zeros(order + 1)
        if self.kind == "uniform":
            a, b = self.params
            if not a < x0 < b:
                raise DerivativeUnavailable(f"log density not smooth at {x0}")
            c[0] = -math.log(b - a)
            return c
        if self.kind == "gaussian":
            mu, s = self.params
            z = (x0 - mu) / s
            c[0] = -0.5 * z * z - math.log(s) - LOG_SQRT_2PI
            if order >= 1:
                c[1] = -(x0 - mu) / s**2
            if order >= 2:
                c[2] = -0.5 / s**2
            return c
        # mixture: exact series of log(sum_k w_k N_k(x0 + u)) in u
        w, mu, s = self.components
        logs = np.log(w) - np.log(s) - LOG_SQRT_2PI - 0.5 * ((x0 - mu) / s) ** 2
        top = logs.max()
        acc = np.zeros(order + 1)
        for lw, m, sd in zip(logs, mu, s):
            g = np.zeros(order + 1)
            if order >= 1:
                g[1] = -(x0 - m) / sd**2
            if order >= 2:
                g[2] = -0.5 / sd**2
            acc += math.exp(lw - top) * _series_exp(g)
        c = _series_log(acc / acc[0])
        c[0] = top + math.log(acc[0])
        return c

    def log_density_derivs(self, x0, alpha) -> float:
        """``d^alpha phi(x0)`` for a multi-index ``alpha``."""
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (self.dim,))
        alpha = tuple(int(a) for a in np.atleast_1d(alpha))
        nz = [i for i, a in enumerate(alpha) if a > 0]
        if not nz:
            return float(self.log_pdf(x0)[0])
        if len(nz) > 1:
            return 0.0  # separable log density
        i = nz[0]
        k = alpha[i]
        c = self.taylor_coeffs(float(x0[i]), k, axis=i)
        return float(c[k] * math.factorial(k))

    def sample(self, n: int, rng) -> np.ndarray:
        """Draw ``n`` points with a :class:`numpy.random.Generator`.

        Normals come from hand-written Box-Muller on the generator's uniforms.
        """
        from .kernels import box_muller

        if self.kind == "uniform":
            a, b = self.params
            return a + (b - a) * rng.random((n, self.dim))
        if self.kind == "gaussian":
            mu, s = self.params
            return mu + s * _normals(rng, n * self.dim, box_muller).reshape(n, self.dim)
        w, mu, s = self.components
        comp = np.searchsorted(np.cumsum(w), rng.random(n), side="right")
        comp = np.minimum(comp, len(w) - 1)
        z = _normals(rng, n, box_muller)
        return (mu[comp] + s[comp] * z).reshape(n, 1)


def _normals(rng, n, box_muller):
    m = (n + 1) // 2
    u = rng.random((2, m))
    return box_muller(1.0 - u[0], u[1])[:n]


def make_oracle(kind: str, params, dim: int = 1) -> DensityOracle:
    aliases = {"normal": "gaussian", "mixture": "gaussian_mixture"}
    return DensityOracle(aliases.get(kind, kind), tuple(params), dim)


def _check_dim(oracle, model):
    if oracle.dim != model.d:
        raise ValueError(f"oracle dimension {oracle.dim} does not match model {model.d}")


def _f_nodes(oracle, model, quad_order=None):
    D = design(model, quad_order)
    f = oracle.pdf(model.x0_array + model.h * D.rule.nodes)
    if not np.all(np.isfinite(f)):
        raise NonFiniteIntegrand("density not finite on the window")
    return D, f


def f0_of(oracle, model) -> float:
    return float(oracle.pdf(model.x0_array)[0])


def theta_circ(oracle, model) -> ParamVector:
    th = np.zeros(model.p)
    th[0] = float(oracle.log_pdf(model.x0_array)[0])
    if not math.isfinite(th[0]):
        raise NonFiniteIntegrand("density vanishes at x0")
    return ParamVector(th, "auxiliary")


def score_mean(oracle, model) -> np.ndarray:
    """``u = int K Psi f(x0 + t h) dt``."""
    D, f = _f_nodes(oracle, model)
    return D.vec(f)


def expected_likelihood(theta, oracle, model: ModelSpec, n) -> float:
    th = theta.theta if isinstance(theta, ParamVector) else np.asarray(theta, float)
    u = score_mean(oracle, model)
    I0, _, _, _ = exp_moments(th, model, order=0)
    return float(n * model.hd * (u @ th - I0))


def expected_gradient(theta, oracle, model: ModelSpec, n=None) -> np.ndarray:
    """Gradient of ``E L``; with ``n=None`` the per-``n h^d`` version ``grad g``."""
    th = theta.theta if isinstance(theta, ParamVector) else np.asarray(theta, float)
    _, I1, _, _ = exp_moments(th, model, order=1)
    g = score_mean(oracle, model) - I1
    return g if n is None else n * model.hd * g


def theta_star(oracle, model: ModelSpec, tol: float = 1e-12, max_iter: int = 100) -> ParamVector:
    """Maximizer of ``E L``; solved per unit ``n h^d`` so it does not depend on n."""
    _check_dim(oracle, model)
    u = score_mean(oracle, model)

    def fun(th):
        I0, I1, I2, clamped = exp_moments(th, model)
        return float(u @ th - I0), u - I1, I2, clamped

    th0 = theta_circ(oracle, model).theta
    theta, *_ = newton_maximize(fun, th0, tol, max_iter)
    return ParamVector(theta, "target")


def theta_bullet(oracle, model: ModelSpec) -> ParamVector:
    """Taylor coefficients of ``phi`` in local coordinates up to the basis order."""
    _check_dim(oracle, model)
    x0 = model.x0_array
    top = int(model.basis.total_degrees.max())
    per_axis = [oracle.taylor_coeffs(float(x0[i]), top, axis=i) for i in range(model.d)]
    th = np.zeros(model.p)
    for j, alpha in enumerate(model.basis.index_set):
        nz = [i for i, a in enumerate(alpha) if a > 0]
        if not nz:
            th[j] = float(oracle.log_pdf(x0)[0])
        elif len(nz) == 1:
            i = nz[0]
            th[j] = per_axis[i][alpha[i]] * model.h ** alpha[i]
    return ParamVector(th, "unbiased")


def d0_matrix(theta, model: ModelSpec) -> np.ndarray:
    th = theta.theta if isinstance(theta, ParamVector) else np.asarray(theta, float)
    _, _, I2, _ = exp_moments(th, model)
    return I2


def info_matrix(theta, oracle_or_none, model: ModelSpec, n) -> np.ndarray:
    """``D_n^2(theta)``; the oracle is not needed since the Hessian is deterministic."""
    return n * model.hd * d0_matrix(theta, model)


def variance_matrix(oracle, model: ModelSpec, n) -> np.ndarray:
    """Covariance of the score: ``n h^d (int K^2 Psi Psi' f - h^d u u')``."""
    D, f = _f_nodes(oracle, model)
    A2 = D.mat(f, kernel_power=2)
    u = D.vec(f)
    V = n * model.hd * (A2 - model.hd * np.outer(u, u))
    return 0.5 * (V + V.T)


def _window_points(model, t):
    return model.x0_array + model.h * np.asarray(t, dtype=float)


def oscillation(oracle, model: ModelSpec, grid: int | None = None) -> float:
    """``c_{f,h} = sup_t |1 - f(x0 + t h) / f(x0)|``."""
    f0 = f0_of(oracle, model)

    def dev(t):
        return np.abs(1.0 - oracle.pdf(_window_points(model, t)) / f0)

    return grid_sup(dev, model.d, grid)[0]


def bias_constant(oracle, model: ModelSpec, grid: int | None = None, theta_b=None) -> float:
    """``B_{p,h} = exp(sup_t |phi(x0 + t h) - Psi(t)' theta_bullet|)``."""
    tb = theta_bullet(oracle, model).theta if theta_b is None else np.asarray(theta_b)

    def rem(t):
        t = np.asarray(t, dtype=float)
        return np.abs(oracle.log_pdf(_window_points(model, t)) - eval_basis(model.basis, t) @ tb)

    log_b = grid_sup(rem, model.d, grid)[0]
    return math.exp(log_b) if log_b < 700 else math.inf


def window_moments(oracle, model: ModelSpec):
    """``(pr1, pr2)`` = ``h^d int K f`` and ``h^d int K f^2`` over the cube."""
    D, f = _f_nodes(oracle, model)
    return model.hd * D.scalar(f), model.hd * D.scalar(f * f)


@dataclass(frozen=True)
class PopulationSummary:
    theta_star: ParamVector
    theta_bullet: ParamVector
    theta_circ: ParamVector
    D2: np.ndarray
    V2: np.ndarray
    d02: np.ndarray
    c_fh: float
    B_ph: float
    pr1: float
    pr2: float
    f0: float
    n: int

    @property
    def D(self) -> np.ndarray:
        return sqrt_pd(self.D2)

    @property
    def D_inv(self) -> np.ndarray:
        return inv_pd(self.D)


def summarize(oracle, model: ModelSpec, n: int, grid: int | None = None) -> PopulationSummary:
    _check_dim(oracle, model)
    ts = theta_star(oracle, model)
    tb = theta_bullet(oracle, model)
    d02 = d0_matrix(ts, model)
    pr1, pr2 = window_moments(oracle, model)
    return PopulationSummary(
        theta_star=ts,
        theta_bullet=tb,
        theta_circ=theta_circ(oracle, model),
        D2=n * model.hd * d02,
        V2=variance_matrix(oracle, model, n),
        d02=d02,
        c_fh=oscillation(oracle, model, grid),
        B_ph=bias_constant(oracle, model, grid, tb.theta),
        pr1=pr1,
        pr2=pr2,
        f0=f0_of(oracle, model),
        n=int(n),
    )
