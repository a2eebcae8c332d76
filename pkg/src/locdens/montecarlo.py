"""Seeded replication engine for the concentration, Fisher and Wilks checks.

Every replication draws from its own counter-based stream keyed by
``(seed, cell, rep)``, so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .certificates import Certificate, check_conditions, theorem_bounds
from .errors import CellSkipped, InsufficientCells, LocdensError
from .likelihood import Sample, excess, exp_moments, fit_mle, window_stats
from .linalg import inv_pd, sqrt_pd
from .model import ModelSpec
from .population import DensityOracle, PopulationSummary, summarize

XI_AGREEMENT_TOL = 1e-8


def stream(seed: int, cell: int = 0, rep: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, cell, rep])))


def sample(oracle: DensityOracle, n: int, seed, cell: int = 0, rep: int = 0) -> Sample:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Sample(oracle.sample(int(n), stream(int(seed), cell, rep)), source="simulator")


def default_threads() -> int:
    env = os.environ.get("LOCDENS_THREADS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class ExperimentPlan:
    oracle: DensityOracle
    model: ModelSpec
    n: int
    reps: int
    z: tuple = (2.0,)
    seed: int = 0
    cell: int = 0
    zeta_factor: float = 1.0
    degraded_mode: bool = True

    def __post_init__(self):
        z = tuple(float(v) for v in np.atleast_1d(self.z))
        object.__setattr__(self, "z", z)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(not v > 0 for v in z):
            raise ValueError("z must be positive")

    def echo(self) -> dict:
        m = self.model
        return {
            "density": self.oracle.kind, "params": list(self.oracle.params),
            "x0": list(m.x0), "h": m.h, "degree": m.basis.degree, "dim": m.d, "p": m.p,
            "kernel": m.kernel.kind, "quad_order": m.quad_order,
            "n": int(self.n), "reps": int(self.reps), "z": list(self.z),
            "seed": int(self.seed), "cell": int(self.cell), "zeta_factor": self.zeta_factor,
        }


@dataclass
class ReplicationRecord:
    rep: int
    converged: bool
    window_count: int
    theta_mle: list | None = None
    xi: list | None = None
    xi_gap: float | None = None
    fisher_residual: float | None = None
    wilks_residual_xi: float | None = None
    wilks_residual_theta: float | None = None
    wilks_residual_theta_circ: float | None = None
    two_delta_L: float | None = None
    dist: float | None = None  # ||D_n (theta_mle - theta*)||
    in_concentration_set: bool = False
    error: str | None = None


@dataclass(frozen=True)
class CellContext:
    """Read-only per-cell quantities shared by all replications."""

    summary: PopulationSummary
    D: np.ndarray
    D_inv: np.ndarray
    Dc: np.ndarray  # D_n(theta_circ)
    I1_star: np.ndarray
    r0: float


def cell_context(plan: ExperimentPlan, r0: float = math.inf) -> CellContext:
    s = summarize(plan.oracle, plan.model, plan.n)
    D = sqrt_pd(s.D2)
    nhd = plan.n * plan.model.hd
    _, _, I2c, _ = exp_moments(s.theta_circ.theta, plan.model)
    _, I1, _, _ = exp_moments(s.theta_star.theta, plan.model, order=1)
    return CellContext(s, D, inv_pd(D), sqrt_pd(nhd * I2c), I1, r0)


def run_replication(plan: ExperimentPlan, rep_index: int, ctx: CellContext | None = None) -> ReplicationRecord:
    ctx = ctx or cell_context(plan)
    model, s = plan.model, ctx.summary
    x = sample(plan.oracle, plan.n, plan.seed, plan.cell, rep_index)
    st = window_stats(x, model)
    try:
        th, diag = fit_mle(st, model)
    except LocdensError as exc:
        return ReplicationRecord(rep_index, False, st.count, error=type(exc).__name__)
    nhd = plan.n * model.hd
    ts, tc, tm = s.theta_star.theta, s.theta_circ.theta, th.theta
    # xi directly from the score at theta*, and through E L gradients at theta_mle
    xi = ctx.D_inv @ (st.S - nhd * ctx.I1_star)
    _, I1m, _, _ = exp_moments(tm, model, order=1)
    xi_alt = ctx.D_inv @ (nhd * (I1m - ctx.I1_star))
    lin = ctx.D @ (tm - ts)
    dist = float(np.linalg.norm(lin))
    dL = excess(st, model, tm, ts)
    dLc = excess(st, model, tm, tc)
    root = math.sqrt(max(2.0 * dL, 0.0))
    rootc = math.sqrt(max(2.0 * dLc, 0.0))
    return ReplicationRecord(
        rep=rep_index,
        converged=diag.converged,
        window_count=st.count,
        theta_mle=tm.tolist(),
        xi=xi.tolist(),
        xi_gap=float(np.linalg.norm(xi - xi_alt)),
        fisher_residual=float(np.linalg.norm(lin - xi)),
        wilks_residual_xi=abs(root - float(np.linalg.norm(xi))),
        wilks_residual_theta=abs(root - dist),
        wilks_residual_theta_circ=abs(rootc - float(np.linalg.norm(ctx.Dc @ (tm - tc)))),
        two_delta_L=2.0 * dL,
        dist=dist,
        in_concentration_set=dist <= ctx.r0,
    )


@dataclass
class CellResult:
    plan: ExperimentPlan
    context: CellContext
    certificates: dict  # z -> Certificate
    records: list = field(default_factory=list)

    @property
    def converged(self):
        return [r for r in self.records if r.converged]


def certify_cell(plan: ExperimentPlan, summary: PopulationSummary) -> dict:
    certs = {}
    for z in plan.z:
        cert = check_conditions(summary, plan.model, plan.n, z, plan.oracle,
                                zeta_factor=plan.zeta_factor, enforce_z_guard=False)
        failing = [k for k in ("I", "L0", "ED0", "C") if not cert.conditions[k]]
        if failing and not plan.degraded_mode:
            raise CellSkipped(f"conditions {failing} fail at z={z} and degraded mode is off")
        certs[z] = cert
    return certs


def run_cell(plan: ExperimentPlan, threads: int | None = None) -> CellResult:
    threads = threads or default_threads()
    ctx = cell_context(plan)
    certs = certify_cell(plan, ctx.summary)
    ctx = replace(ctx, r0=certs[plan.z[0]].r0)
    reps = range(plan.reps)
    if threads == 1:
        records = [run_replication(plan, i, ctx) for i in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: run_replication(plan, i, ctx), reps))
    return CellResult(plan, ctx, certs, records)


def _se(q, reps):
    q = min(max(q, 0.0), 1.0)
    return math.sqrt(q * (1.0 - q) / reps)


def _cell(plan_or_cell) -> CellResult:
    return plan_or_cell if isinstance(plan_or_cell, CellResult) else run_cell(plan_or_cell)


def verify_concentration(plan_or_cell, z: float | None = None) -> dict:
    """Escape frequency of ``||D_n(theta_mle - theta*)|| > r0(z)``.

    Non-converged replications count as escapes.
    """
    cell = _cell(plan_or_cell)
    z = cell.plan.z[0] if z is None else float(z)
    cert = cell.certificates[z]
    reps = len(cell.records)
    esc = sum(1 for r in cell.records if not r.converged or r.dist > cert.r0)
    freq = esc / reps
    bound = cert.prob_bound
    se = _se(bound, reps)
    core = 2.0 * math.exp(-z)
    return {
        "z": z, "reps": reps, "escapes": esc, "empirical_escape_freq": freq,
        "prob_bound": bound, "binomial_se": se, "ok": freq <= bound + 3.0 * se,
        "escape_vs_2exp_ok": freq <= core + 3.0 * _se(core, reps),
        "nonconverged": reps - len(cell.converged),
    }


def _frac_row(cell, z, key, limit_mult, label):
    cert = cell.certificates[z]
    reps = len(cell.records)
    limit = limit_mult * cert.diamond
    hits = sum(1 for r in cell.converged if getattr(r, key) <= limit)
    frac = hits / reps
    se = _se(cert.prob_bound, reps)
    return {
        "z": z, "reps": reps, label: frac, "bound": limit,
        "prob_bound": cert.prob_bound, "binomial_se": se,
        "ok": frac >= 1.0 - cert.prob_bound - 3.0 * se,
    }


def verify_fisher(plan_or_cell, z: float | None = None) -> dict:
    cell = _cell(plan_or_cell)
    z = cell.plan.z[0] if z is None else float(z)
    row = _frac_row(cell, z, "fisher_residual", 1.0, "frac_fisher_ok")
    gaps = [r.xi_gap for r in cell.converged]
    row["max_xi_gap"] = max(gaps) if gaps else 0.0
    row["xi_identity_ok"] = row["max_xi_gap"] <= XI_AGREEMENT_TOL
    return row


def verify_wilks(plan_or_cell, z: float | None = None) -> dict:
    cell = _cell(plan_or_cell)
    z = cell.plan.z[0] if z is None else float(z)
    row = _frac_row(cell, z, "wilks_residual_xi", 3.0, "frac_wilks_ok")
    theta_row = _frac_row(cell, z, "wilks_residual_theta", 2.0, "frac")
    circ_row = _frac_row(cell, z, "wilks_residual_theta_circ", 2.0, "frac")
    row["frac_wilks_theta_ok"] = theta_row["frac"]
    row["frac_wilks_theta_circ_ok"] = circ_row["frac"]
    row["ok"] = row["ok"] and theta_row["ok"]
    vals = [r.two_delta_L for r in cell.converged]
    row["mean_2dL"] = float(np.mean(vals)) if vals else math.nan
    return row


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def rate_scan(cells) -> dict:
    """Log-log slopes of the median errors against ``n h^d`` over an n-sweep."""
    cells = [_cell(c) for c in cells]
    if len({c.plan.n for c in cells}) < 4:
        raise InsufficientCells("rate scan needs at least four values of n")
    eff, err, fres = [], [], []
    for c in cells:
        nhd = c.plan.n * c.plan.model.hd
        conv = c.converged
        eff.append(nhd)
        err.append(float(np.median([r.dist for r in conv])) / math.sqrt(nhd))
        fres.append(float(np.median([r.fisher_residual for r in conv])) / math.sqrt(nhd))
    return {
        "nhd": eff, "median_theta_error": err, "median_fisher_residual_normalized": fres,
        "theta_error_slope": _slope(eff, err), "fisher_residual_slope": _slope(eff, fres),
    }


def cell_report(cell: CellResult) -> dict:
    s = cell.context.summary
    records = cell.records
    conv = cell.converged
    rows = []
    for z in cell.plan.z:
        rows.append({
            "z": z,
            "certificate": cell.certificates[z].to_dict(),
            "theorem_bounds": theorem_bounds(cell.certificates[z]),
            "concentration": verify_concentration(cell, z),
            "fisher": verify_fisher(cell, z),
            "wilks": verify_wilks(cell, z),
        })
    return {
        "plan": cell.plan.echo(),
        "population": {
            "theta_star": s.theta_star.theta.tolist(),
            "theta_bullet": s.theta_bullet.theta.tolist(),
            "theta_circ": s.theta_circ.theta.tolist(),
            "D2": s.D2.tolist(), "V2": s.V2.tolist(), "d02": s.d02.tolist(),
            "c_fh": s.c_fh, "B_ph": s.B_ph, "pr1": s.pr1, "pr2": s.pr2, "f0": s.f0,
        },
        "reps": len(records),
        "converged": len(conv),
        "mean_2dL": float(np.mean([r.two_delta_L for r in conv])) if conv else None,
        "mean_xi_sq": float(np.mean([np.dot(r.xi, r.xi) for r in conv])) if conv else None,
        "median_fisher_residual": float(np.median([r.fisher_residual for r in conv])) if conv else None,
        "rows": rows,
    }


@dataclass
class SimulationReport:
    cells: list
    rates: dict | None = None

    def to_dict(self) -> dict:
        return {"cells": self.cells, "rates": self.rates}


def simulate(plans, threads: int | None = None, keep_records: bool = False):
    """Run a list of plans; returns ``(SimulationReport, cell results)``."""
    results = [run_cell(p, threads) for p in plans]
    rates = None
    if len({c.plan.n for c in results}) >= 4:
        rates = rate_scan(results)
    report = SimulationReport([cell_report(c) for c in results], rates)
    return report, (results if keep_records else None)


def records_table(cell: CellResult):
    """Per-replication rows for CSV output."""
    cols = ["rep", "converged", "window_count", "fisher_residual", "wilks_residual_xi",
            "wilks_residual_theta", "wilks_residual_theta_circ", "two_delta_L", "dist", "xi_gap"]
    rows = []
    for r in cell.records:
        d = asdict(r)
        rows.append([cell.plan.n] + [d[c] for c in cols])
    return ["n"] + cols, rows
