"""Bias/variance bandwidth trade-off with explicit constants.

Both terms are measured in the d0 metric: the bias term is the small-bias
bound on ``||d0(theta_circ)(theta* - theta_bullet)||`` and the stochastic term
is the concentration radius ``r0(z) / sqrt(n h^d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .certificates import (
    a_bound,
    bias_bound,
    c1_squared,
    phi_constants,
    small_bandwidth_ok,
)
from .errors import InfeasibleBandwidth, LocdensError, NoFeasibleBandwidth
from .likelihood import Sample, fit_mle
from .model import ModelSpec, eval_basis, make_basis
from .population import DensityOracle, bias_constant, f0_of, oscillation
from .quadrature import grid_sup


@dataclass(frozen=True)
class LocalConstants:
    f0: float
    c_fh: float
    B_ph: float


@dataclass(frozen=True)
class PilotSummary:
    """Plug-in estimates from a wider, one-degree-richer local fit.

    ``coef`` are the fitted coefficients in the pilot's local coordinates.
    """

    model: ModelSpec
    coef: np.ndarray
    f0: float
    derivatives: dict

    def _poly(self, t_target, h):
        # pilot polynomial at x0 + t h, i.e. at pilot coordinate t h / h_pilot
        s = np.asarray(t_target, dtype=float) * (h / self.model.h)
        return eval_basis(self.model.basis, s).reshape(-1, self.model.p) @ self.coef

    def constants(self, model: ModelSpec, grid=None) -> LocalConstants:
        top = self.model.basis.total_degrees
        keep = top < top.max()
        c0 = float(self.coef[0])

        def osc(t):
            return np.abs(1.0 - np.exp(self._poly(t, model.h) - c0))

        def rem(t):
            s = np.asarray(t, dtype=float) * (model.h / self.model.h)
            Phi = eval_basis(self.model.basis, s).reshape(-1, self.model.p)
            return np.abs(Phi[:, ~keep] @ self.coef[~keep])

        c = grid_sup(osc, model.d, grid)[0]
        log_b = grid_sup(rem, model.d, grid)[0]
        B = math.exp(log_b) if log_b < 700 else math.inf
        return LocalConstants(self.f0, c, B)


def oracle_constants(oracle: DensityOracle, model: ModelSpec, grid=None) -> LocalConstants:
    return LocalConstants(f0_of(oracle, model), oscillation(oracle, model, grid),
                          bias_constant(oracle, model, grid))


def bound_components(h, model_at_h: ModelSpec, consts, z, n):
    """``(bias_term, stoch_term)`` at one bandwidth.

    ``consts`` is a :class:`LocalConstants` (or anything with f0, c_fh, B_ph).
    """
    model = model_at_h if model_at_h.h == h else model_at_h.with_h(h)
    c1 = math.sqrt(c1_squared(model))
    try:
        phi1, phi2, eps, _ = phi_constants(consts.f0, consts.c_fh, consts.B_ph, model, c1)
    except LocdensError as exc:
        raise InfeasibleBandwidth(f"h={h:.6g}: {exc}") from exc
    if not small_bandwidth_ok(c1, phi1, phi2) or eps >= 1 or not math.isfinite(consts.B_ph):
        raise InfeasibleBandwidth(f"h={h:.6g}: small-bandwidth condition fails")
    bias = bias_bound(consts.f0, consts.c_fh, consts.B_ph, eps, model)
    a = a_bound(consts.B_ph, consts.c_fh, consts.f0, eps, model, c1)
    p = model.p
    nu0 = math.sqrt(2.0 * p)
    r0 = 4.0 * a * nu0 * (math.sqrt(p) + math.sqrt(2.0 * z))
    return bias, r0 / math.sqrt(n * model.hd)


@dataclass
class BandwidthReport:
    h_grid: list
    bias_term: list
    stoch_term: list
    total: list
    feasible: list
    h_star: float
    mode: str
    norm: str = "d0-metric concentration radius"
    estimates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "h_grid": self.h_grid, "bias_term": self.bias_term,
            "stoch_term": self.stoch_term, "total": self.total,
            "feasible": self.feasible, "h_star": self.h_star, "mode": self.mode,
            "norm": self.norm, "estimates": self.estimates,
        }

    def table(self):
        return [(h, b, s, t) for h, b, s, t, ok in
                zip(self.h_grid, self.bias_term, self.stoch_term, self.total, self.feasible) if ok]


def geometric_grid(h_min, h_max, count) -> np.ndarray:
    if not (0 < h_min <= h_max) or count < 1:
        raise ValueError("need 0 < h_min <= h_max and count >= 1")
    if count == 1:
        return np.array([float(h_min)])
    return np.geomspace(h_min, h_max, int(count))


def plugin_pilot(sample: Sample, model_template: ModelSpec, h_pilot: float) -> PilotSummary:
    """Fit a basis one degree richer at a wide bandwidth and read off f0 and derivatives."""
    basis = make_basis("polynomial", model_template.basis.degree + 1, model_template.d)
    pm = ModelSpec(model_template.x0, float(h_pilot), basis,
                   model_template.kernel, 0)
    th, _ = fit_mle(sample, pm)
    coef = th.theta
    derivs = {}
    for j, alpha in enumerate(basis.index_set):
        fact = math.prod(math.factorial(a) for a in alpha)
        derivs[str(alpha)] = float(coef[j] * fact / h_pilot ** sum(alpha))
    return PilotSummary(pm, coef, math.exp(coef[0]), derivs)


def select_bandwidth(oracle_or_sample, model_template: ModelSpec, n, z, h_grid,
                     mode: str | None = None, grid=None) -> BandwidthReport:
    """Minimize bias + stochastic term over the feasible part of the grid.

    Ties go to the smaller bandwidth.
    """
    hs = np.sort(np.asarray(h_grid, dtype=float).ravel())
    if hs.size == 0:
        raise NoFeasibleBandwidth("empty bandwidth grid")
    estimates = {}
    if isinstance(oracle_or_sample, DensityOracle):
        mode = mode or "oracle"
        get = lambda m: oracle_constants(oracle_or_sample, m, grid)  # noqa: E731
    else:
        mode = "plugin"
        pilot = plugin_pilot(oracle_or_sample, model_template, 2.0 * float(hs[-1]))
        n = oracle_or_sample.n if n is None else n
        get = lambda m: pilot.constants(m, grid)  # noqa: E731
        estimates = {"f0_hat": pilot.f0, "h_pilot": pilot.model.h,
                     "derivatives_hat": pilot.derivatives, "estimated": True}
    bias, stoch, total, ok = [], [], [], []
    for h in hs:
        m = model_template.with_h(float(h))
        try:
            b, s = bound_components(float(h), m, get(m), z, n)
        except InfeasibleBandwidth:
            b = s = math.nan
        bias.append(b)
        stoch.append(s)
        total.append(b + s)
        ok.append(bool(np.isfinite(b + s)))
    if not any(ok):
        raise NoFeasibleBandwidth("small-bandwidth condition fails on the whole grid")
    tot = np.where(ok, total, np.inf)
    i = int(np.argmin(tot))
    return BandwidthReport([float(h) for h in hs], bias, stoch, total, ok,
                           float(hs[i]), mode, estimates=estimates)
