"""Gauss-Legendre rules on the cube and dense sup-grids.

Every integral in the library lives on the kernel support ``[-1, 1]^d``.  The
kernels are smooth on that cube, so a tensor Gauss-Legendre rule sees smooth
integrands only.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize_scalar

from .errors import NonFiniteIntegrand
from .model import ModelSpec, eval_basis, eval_kernel

SUP_GRID_DEFAULT = {1: 2049, 2: 257}


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,)
    order: int

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return self.weights.shape[0]


def gauss_legendre(m: int) -> QuadRule:
    """1-D rule, exact for polynomials of degree <= 2m - 1."""
    if m < 2:
        raise ValueError("need at least two nodes")
    x, w = leggauss(m)
    return QuadRule(x.reshape(-1, 1), w, m)


def tensorize(rule: QuadRule, d: int) -> QuadRule:
    if d == 1:
        return rule
    x = rule.nodes[:, 0]
    grids = np.meshgrid(*([x] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([rule.weights] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return QuadRule(nodes, weights, rule.order)


@functools.lru_cache(maxsize=64)
def cube_rule(m: int, d: int) -> QuadRule:
    return tensorize(gauss_legendre(m), d)


def _check(values):
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand("integrand is not finite at every quadrature node")
    return values


def integrate(f, rule: QuadRule) -> float:
    values = _check(np.asarray(f(rule.nodes), dtype=float))
    return float(rule.weights @ values)


def integrate_vec(f, rule: QuadRule) -> np.ndarray:
    values = _check(np.asarray(f(rule.nodes), dtype=float))
    return np.einsum("n,np->p", rule.weights, values)


def integrate_mat(f, rule: QuadRule) -> np.ndarray:
    values = _check(np.asarray(f(rule.nodes), dtype=float))
    return np.einsum("n,npq->pq", rule.weights, values)


@dataclass(frozen=True)
class Design:
    """Basis and kernel evaluated once on the quadrature nodes of a model.

    ``kw`` folds the kernel into the weights, so ``Phi.T @ (kw * g)`` is the
    vector integral of ``K Psi g`` and ``(Phi * (kw * g)[:, None]).T @ Phi``
    the matrix one.
    """

    rule: QuadRule
    Phi: np.ndarray
    K: np.ndarray
    kw: np.ndarray

    def vec(self, g=None) -> np.ndarray:
        w = self.kw if g is None else self.kw * g
        return self.Phi.T @ w

    def mat(self, g=None, kernel_power=1) -> np.ndarray:
        w = self.rule.weights * self.K ** kernel_power
        if g is not None:
            w = w * g
        m = (self.Phi * w[:, None]).T @ self.Phi
        return 0.5 * (m + m.T)

    def scalar(self, g=None) -> float:
        return float(np.sum(self.kw if g is None else self.kw * g))


@functools.lru_cache(maxsize=128)
def _design(basis, kernel, m):
    rule = cube_rule(m, basis.dim)
    K = eval_kernel(kernel, rule.nodes)
    Phi = eval_basis(basis, rule.nodes)
    if Phi.ndim == 1:
        Phi = Phi[None, :]
    return Design(rule, Phi, K, rule.weights * K)


def design(model: ModelSpec, quad_order: int | None = None) -> Design:
    return _design(model.basis, model.kernel, quad_order or model.quad_order)


def sup_grid(d: int, n: int | None = None) -> np.ndarray:
    """Regular grid on ``[-1, 1]^d`` that contains the corners."""
    n = n or SUP_GRID_DEFAULT.get(d, 17)
    axis = np.linspace(-1.0, 1.0, n)
    if d == 1:
        return axis.reshape(-1, 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def grid_sup(func, d: int, n: int | None = None, refine: bool = True):
    """Maximise ``func`` (vectorised over rows of an (N, d) array) on the cube.

    Grid search followed by bounded scalar refinement around the grid argmax,
    one coordinate at a time.  Returns ``(value, argmax)``.
    """
    n = n or SUP_GRID_DEFAULT.get(d, 17)
    pts = sup_grid(d, n)
    vals = np.asarray(func(pts), dtype=float)
    if np.any(np.isnan(vals)):
        raise NonFiniteIntegrand("sup-grid function returned NaN")
    i = int(np.argmax(vals))
    best_val, best = float(vals[i]), pts[i].copy()
    if not refine or not np.isfinite(best_val):
        return best_val, best
    step = 2.0 / (n - 1)
    for _ in range(2 if d > 1 else 1):
        for axis in range(d):
            lo = max(-1.0, best[axis] - step)
            hi = min(1.0, best[axis] + step)

            def neg(s, axis=axis):
                q = best.copy()
                q[axis] = s
                return -float(func(q.reshape(1, -1))[0])

            res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            if -res.fun > best_val:
                best_val = -float(res.fun)
                best[axis] = res.x
    return best_val, best
