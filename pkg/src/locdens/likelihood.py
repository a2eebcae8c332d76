"""Localized log-likelihood, its derivatives and the Newton maximizer.

The stochastic part of L is linear in theta: the data enter only through the
window count and the score sum ``S = sum_i K_i Psi_i``.  Everything else is a
deterministic integral over the kernel cube, so the Hessian never depends on
the sample values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyWindow, MaxIterExceeded, NonFiniteIntegrand
from .linalg import solve_pd
from .model import ModelSpec
from .quadrature import design

EXP_CLAMP = 700.0
ROLES = ("mle", "target", "unbiased", "auxiliary", "free")


@dataclass(frozen=True)
class Sample:
    x: np.ndarray  # (n, d)
    source: str = "simulator"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.shape[0] < 1:
            raise ValueError("sample must contain at least one observation")
        if not np.all(np.isfinite(x)):
            raise ValueError("sample contains non-finite coordinates")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def load_sample(path, dim: int | None = None) -> Sample:
    """Read whitespace-separated points, one per line; ``#`` lines are comments."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in s.split()])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {s!r}") from None
    if not rows:
        raise ValueError(f"{path}: no observations")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or (dim is not None and widths != {dim}):
        raise ValueError(f"{path}: inconsistent number of coordinates per line")
    return Sample(np.array(rows), source="file")


@dataclass(frozen=True)
class ParamVector:
    theta: np.ndarray
    role: str = "free"

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameter has non-finite components")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "theta", theta)

    def __len__(self):
        return self.theta.shape[0]


@dataclass(frozen=True)
class WindowStats:
    """Sufficient statistics of a sample for a given model."""

    n: int
    count: int
    S: np.ndarray


@dataclass
class FitDiagnostics:
    iterations: int
    final_grad_norm: float
    window_count: int
    converged: bool
    warnings: list = field(default_factory=list)


def window_stats(sample: Sample, model: ModelSpec) -> WindowStats:
    if sample.dim != model.d:
        raise ValueError(f"sample has dimension {sample.dim}, model {model.d}")
    count, S = kernels.window_stats(
        sample.x, model.x0_array, model.h, model.basis.exponents,
        kernels.KERNEL_CODES[model.kernel.kind],
    )
    return WindowStats(sample.n, count, np.asarray(S, dtype=float))


def _stats(data, model) -> WindowStats:
    return data if isinstance(data, WindowStats) else window_stats(data, model)


def _theta(theta) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.theta
    return np.asarray(theta, dtype=float).ravel()


def exp_moments(theta, model: ModelSpec, order: int = 2, check_clamp: bool = False):
    """Integrals of ``K e^{Psi'theta}`` times 1, Psi and Psi Psi' over the cube.

    Returns ``(I0, I1, I2, clamped)``; entries beyond ``order`` are None.
    """
    D = design(model)
    eta = D.Phi @ theta
    clamped = bool(np.any(eta > EXP_CLAMP))
    if not np.all(np.isfinite(eta)):
        raise NonFiniteIntegrand("basis expansion is not finite on the nodes")
    if clamped and check_clamp:
        raise NonFiniteIntegrand(f"exponent exceeds {EXP_CLAMP} on the kernel support")
    e = np.exp(np.minimum(eta, EXP_CLAMP))
    I0 = D.scalar(e)
    I1 = D.vec(e) if order >= 1 else None
    I2 = D.mat(e) if order >= 2 else None
    return I0, I1, I2, clamped


def log_likelihood(theta, data, model: ModelSpec) -> float:
    th = _theta(theta)
    st = _stats(data, model)
    I0, _, _, _ = exp_moments(th, model, order=0)
    return float(st.S @ th - st.n * model.hd * I0)


def gradient(theta, data, model: ModelSpec) -> np.ndarray:
    th = _theta(theta)
    st = _stats(data, model)
    _, I1, _, _ = exp_moments(th, model, order=1)
    return st.S - st.n * model.hd * I1


def hessian(theta, data, model: ModelSpec) -> np.ndarray:
    th = _theta(theta)
    n = data if isinstance(data, (int, np.integer)) else _stats(data, model).n
    _, _, I2, _ = exp_moments(th, model, order=2)
    return -n * model.hd * I2


def newton_maximize(fun, theta0, tol, max_iter=100, polish=2):
    """Damped Newton ascent on a concave objective.

    ``fun(theta)`` returns ``(value, grad, negH, clamped)``.  ``tol`` is either
    a number or a callable of the current value.  Convergence is measured by
    the Newton decrement ``sqrt(g' negH^{-1} g)``; once reached, up to
    ``polish`` further full steps are taken while they keep shrinking it.

    Returns ``(theta, value, decrement, iterations, converged, clamped)``.
    """
    theta = np.array(theta0, dtype=float)
    val, g, H, clamped = fun(theta)
    it = 0
    dec = math.inf
    while True:
        step = solve_pd(H, g)
        dec = math.sqrt(max(float(g @ step), 0.0))
        thr = tol(val) if callable(tol) else tol
        if dec <= thr:
            break
        if it >= max_iter:
            raise MaxIterExceeded(
                f"Newton did not converge in {max_iter} iterations "
                f"(decrement {dec:.3e})", last_iterate=theta.copy())
        it += 1
        slope = float(g @ step)
        # gains below the rounding level of the objective cannot be measured
        noise = 16.0 * np.finfo(float).eps * (1.0 + abs(val))
        t = 1.0
        while True:
            cand = theta + t * step
            try:
                cval, cg, cH, cclamp = fun(cand)
            except NonFiniteIntegrand:
                cval = -math.inf
            if np.isfinite(cval) and cval >= val + 0.1 * t * slope - noise:
                break
            t *= 0.5
            if t < 1e-14:
                raise MaxIterExceeded("line search failed", last_iterate=theta.copy())
        theta, val, g, H, clamped = cand, cval, cg, cH, cclamp
    for _ in range(polish):
        if dec == 0.0:
            break
        cand = theta + step
        try:
            cval, cg, cH, cclamp = fun(cand)
        except NonFiniteIntegrand:
            break
        cstep = solve_pd(cH, cg)
        cdec = math.sqrt(max(float(cg @ cstep), 0.0))
        if not cdec < dec:
            break
        theta, val, g, H, clamped, step, dec = cand, cval, cg, cH, cclamp, cstep, cdec
    return theta, val, dec, it, True, clamped


def fit_mle(data, model: ModelSpec, tol=None, max_iter: int = 100):
    """Maximize L from the local-constant initializer.

    ``tol`` defaults to ``1e-10 * (1 + |L|)`` on the Newton decrement.
    Returns ``(ParamVector(role="mle"), FitDiagnostics)``.
    """
    st = _stats(data, model)
    m = st.count
    if m == 0:
        raise EmptyWindow("no observation falls inside the kernel window")
    nhd = st.n * model.hd
    theta0 = np.zeros(model.p)
    theta0[0] = math.log(max(m, 1) / (nhd * model.kernel.integral))

    def fun(th):
        I0, I1, I2, clamped = exp_moments(th, model)
        return float(st.S @ th - nhd * I0), st.S - nhd * I1, nhd * I2, clamped

    if tol is None:
        tol = lambda v: 1e-10 * (1.0 + abs(v))  # noqa: E731
    theta, _, dec, it, conv, clamped = newton_maximize(fun, theta0, tol, max_iter)
    if clamped:
        raise NonFiniteIntegrand("exponent clamp active at the converged iterate")
    warn = []
    if m < model.p:
        warn.append(f"window count {m} is below the basis size {model.p}")
    diag = FitDiagnostics(it, dec, m, conv, warn)
    return ParamVector(theta, "mle"), diag


def excess(data, model: ModelSpec, theta_mle, theta_ref) -> float:
    """``L(theta_mle) - L(theta_ref)``, computed as one difference of integrals."""
    a, b = _theta(theta_mle), _theta(theta_ref)
    st = _stats(data, model)
    D = design(model)
    ea = np.exp(np.minimum(D.Phi @ a, EXP_CLAMP))
    eb = np.exp(np.minimum(D.Phi @ b, EXP_CLAMP))
    return float(st.S @ (a - b) - st.n * model.hd * D.scalar(ea - eb))
