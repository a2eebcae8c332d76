import math

import numpy as np
import pytest

from locdens.errors import CellSkipped, InsufficientCells
from locdens.likelihood import fit_mle, window_stats
from locdens.linalg import inv_sqrt_pd
from locdens.model import make_model
from locdens.montecarlo import (
    ExperimentPlan,
    cell_report,
    rate_scan,
    run_cell,
    run_replication,
    sample,
    simulate,
    stream,
    verify_concentration,
    verify_fisher,
    verify_wilks,
)
from locdens.population import make_oracle


def test_stream_deterministic():
    a = stream(7, 1, 2).random(5)
    b = stream(7, 1, 2).random(5)
    c = stream(7, 1, 3).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_sample_deterministic(normal):
    x = sample(normal, 100, 3, 0, 4).x
    assert np.array_equal(x, sample(normal, 100, 3, 0, 4).x)
    assert not np.array_equal(x, sample(normal, 100, 3, 1, 4).x)


def test_uniform_mean():
    x = sample(make_oracle("uniform", (0, 1)), 10**6, 11).x
    assert x.mean() == pytest.approx(0.5, abs=0.002)
    assert x.min() >= 0 and x.max() <= 1


def test_normal_window_fraction(normal):
    x = sample(normal, 10**6, 12).x.ravel()
    assert np.mean(np.abs(x) <= 0.5) == pytest.approx(0.382925, abs=0.002)


def test_normal_moments(normal):
    x = sample(normal, 10**6, 13).x.ravel()
    assert x.std() == pytest.approx(1.0, abs=0.003)
    # fourth moment 3 exercises the tails of the Box-Muller draws
    assert np.mean(x**4) == pytest.approx(3.0, abs=0.05)


def test_bad_n(normal):
    with pytest.raises(ValueError):
        sample(normal, 0, 1)


def test_plan_validation(normal):
    m = make_model(0.0, 0.3, 2)
    with pytest.raises(ValueError):
        ExperimentPlan(normal, m, 100, 0)
    with pytest.raises(ValueError):
        ExperimentPlan(normal, m, 100, 5, z=(1.0, -1.0))
    assert ExperimentPlan(normal, m, 100, 5, z=2).z == (2.0,)


def test_p1_closed_form():
    o = make_oracle("uniform", (-1, 1))
    m = make_model(0.0, 0.2, 1)
    x = sample(o, 5000, 21)
    th, _ = fit_mle(x, m)
    count = window_stats(x, m).count
    assert th.theta[0] == pytest.approx(math.log(count / (5000 * 0.2 * 2.0)), abs=1e-12)


@pytest.mark.slow
def test_xi_second_moment(normal):
    # E||xi||^2 = tr(D^-1 V^2 D^-1) holds exactly for every n
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 3), 5000, 4000, z=(2.0,), seed=99)
    cell = run_cell(plan, threads=4)
    s = cell.context.summary
    Di = inv_sqrt_pd(s.D2)
    expect = float(np.trace(Di @ s.V2 @ Di))
    got = cell_report(cell)["mean_xi_sq"]
    assert got == pytest.approx(expect, rel=0.05)


def test_xi_routes_agree(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 3), 10**4, 30, seed=5)
    row = verify_fisher(run_cell(plan))
    assert row["xi_identity_ok"] and row["max_xi_gap"] < 1e-8


def test_uniform_fisher_small():
    # flat density: theta* = theta_bullet = theta_circ and the residual is second order
    o = make_oracle("uniform", (-2, 2))
    plan = ExperimentPlan(o, make_model(0.0, 0.5, 2), 2 * 10**5, 40, z=(2.0,), seed=8)
    cell = run_cell(plan)
    cert = cell.certificates[2.0]
    med = float(np.median([r.fisher_residual for r in cell.converged]))
    assert med < cert.diamond / 10
    s = cell.context.summary
    assert np.allclose(s.theta_star.theta, s.theta_circ.theta, atol=1e-10)


def test_single_rep(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 2), 2000, 1, seed=1)
    cell = run_cell(plan)
    assert len(cell.records) == 1
    rep = cell_report(cell)
    assert rep["reps"] == 1
    assert verify_concentration(cell)["binomial_se"] >= 0.0


def test_thread_invariance(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 3), 3000, 24, z=(1.0, 2.0), seed=17)
    a = run_cell(plan, threads=1)
    b = run_cell(plan, threads=4)
    assert [r.theta_mle for r in a.records] == [r.theta_mle for r in b.records]
    assert cell_report(a) == cell_report(b)


def test_replication_reproducible(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 2), 1000, 3, seed=2)
    assert run_replication(plan, 1) == run_replication(plan, 1)


def test_empty_window_recorded(normal):
    # the window sits far in the tail, so most replications see no points
    plan = ExperimentPlan(normal, make_model(6.0, 0.05, 1), 50, 5, seed=3)
    cell = run_cell(plan)
    bad = [r for r in cell.records if not r.converged]
    assert bad and all(r.error == "EmptyWindow" for r in bad)
    row = verify_concentration(cell)
    assert row["escapes"] >= len(bad) and row["nonconverged"] == len(bad)


def test_cell_skipped_without_degraded_mode(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 3), 100, 2, degraded_mode=False)
    with pytest.raises(CellSkipped):
        run_cell(plan)


def test_rate_scan_needs_four(normal):
    m = make_model(0.0, 0.3, 2)
    cells = [ExperimentPlan(normal, m, n, 3, seed=1) for n in (1000, 2000, 4000)]
    with pytest.raises(InsufficientCells):
        rate_scan(cells)


def test_rate_scan_slopes():
    o = make_oracle("uniform", (-2, 2))
    m = make_model(0.0, 0.5, 2)
    cells = [ExperimentPlan(o, m, n, 60, seed=4, cell=i)
             for i, n in enumerate((10**3, 10**4, 10**5, 10**6))]
    out = rate_scan(cells)
    assert out["theta_error_slope"] == pytest.approx(-0.5, abs=0.15)
    assert out["fisher_residual_slope"] < out["theta_error_slope"]


def test_verify_rows(normal):
    plan = ExperimentPlan(normal, make_model(0.0, 0.3, 3), 10**4, 20, z=(1.0, 2.0), seed=6)
    cell = run_cell(plan)
    for z in (1.0, 2.0):
        c = verify_concentration(cell, z)
        assert c["escapes"] == 0 and c["escape_vs_2exp_ok"]
        w = verify_wilks(cell, z)
        assert 0 <= w["frac_wilks_ok"] <= 1 and np.isfinite(w["mean_2dL"])


def test_simulate_rates(normal):
    m = make_model(0.0, 0.3, 2)
    plans = [ExperimentPlan(normal, m, n, 4, seed=1, cell=i)
             for i, n in enumerate((1000, 2000, 4000, 8000))]
    report, cells = simulate(plans, keep_records=True)
    assert report.rates is not None and len(cells) == 4
    report, cells = simulate(plans[:2])
    assert report.rates is None and cells is None
