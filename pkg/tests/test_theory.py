import math

import numpy as np
import pytest
from scipy.optimize import brentq

from mqenet import (
    NumericError,
    UserSet,
    alpha_bar,
    alpha_c_step,
    build_mqe,
    capacitance_matrix,
    distance_pdf,
    fc_capacitance_stats,
    first_transition,
    link_capacitance,
    mst_longest_edge,
    q_fc,
    q_fc_large_extent,
    q_fc_small_extent,
    q_mst,
    regime_diagram,
    sample_users,
    single_pair_efficiency,
    step_alpha,
)

P_E = 1.0 - 1.0 / math.e
SQRT2 = math.sqrt(2.0)


def test_threshold_reference_values():
    assert alpha_c_step(1, P_E) == pytest.approx(0.5, abs=1e-12)
    assert alpha_c_step(2, P_E) == pytest.approx(0.369, abs=1e-3)
    assert alpha_c_step(3, P_E) == pytest.approx(0.293, abs=1e-3)


def test_threshold_monotone_in_m_and_p():
    for p in (0.1, 0.5, P_E, 0.9):
        vals = [alpha_c_step(m, p) for m in range(1, 8)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
    for m in (1, 2, 5):
        vals = [alpha_c_step(m, p) for p in (0.05, 0.3, 0.6, 0.9)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
    assert alpha_c_step(1, 1.0) == 0.0
    with pytest.raises(ValueError):
        alpha_c_step(0, 0.5)


def test_single_pair_efficiency_direct_case():
    for d in (0.05, 1.0, 7.0):
        for alpha in (0.0, 0.4, 1.0):
            want = (1.0 - alpha) * link_capacitance(d)
            assert single_pair_efficiency(0, d, 1.0, alpha, P_E) == want


def test_single_pair_relay_gain_small_distance_limit():
    # one relay halves the hop, worth one bit: E(1)-E(0) -> (1-a) + a*ln(1-p)
    d = 1e-6
    for alpha, p in ((0.3, P_E), (0.7, 0.2)):
        gain = single_pair_efficiency(1, d, 1.0, alpha, p) - single_pair_efficiency(
            0, d, 1.0, alpha, p
        )
        want = (1.0 - alpha) + alpha * math.log1p(-p)
        assert gain == pytest.approx(want, abs=1e-5)


def test_first_step_balances_at_half():
    d = 1e-8
    e1 = single_pair_efficiency(1, d, 1.0, 0.5, P_E)
    e0 = single_pair_efficiency(0, d, 1.0, 0.5, P_E)
    assert e1 - e0 == pytest.approx(0.0, abs=1e-7)


def test_step_alpha_matches_bisection():
    for m in (1, 2, 4):
        for d in (0.05, 0.5, 2.0):
            for p in (0.2, P_E):
                analytic = step_alpha(m, p, d)

                def tie(a):
                    return single_pair_efficiency(m, d, 1.0, a, p) - single_pair_efficiency(
                        m - 1, d, 1.0, a, p
                    )

                bracketed = brentq(tie, 1e-9, 1.0 - 1e-9, xtol=1e-12)
                assert analytic == pytest.approx(bracketed, abs=1e-10)


def test_step_alpha_zero_distance_is_closed_form():
    assert step_alpha(2, P_E) == alpha_c_step(2, P_E)
    assert step_alpha(2, P_E, 1e-3) == pytest.approx(alpha_c_step(2, P_E), abs=1e-4)


def test_regime_diagram_small_distance_limits():
    diagram = regime_diagram([1e-3], P_E, alphas=np.linspace(0.05, 1.0, 96))
    assert diagram.mbar[0] == 1
    assert diagram.alpha_first[0] == pytest.approx(0.5, abs=1e-4)
    for m in (1, 2, 3):
        assert diagram.step_boundaries[m][0] == pytest.approx(
            alpha_c_step(m, P_E), abs=1e-4
        )
    # m is non-increasing in alpha at fixed distance
    row = diagram.m_opt[0]
    assert np.all(np.diff(row) <= 0)
    assert row[-1] == 0


def test_regime_diagram_strong_loss_jumps():
    diagram = regime_diagram([30.0, 60.0, 120.0], P_E)
    assert np.all(diagram.mbar > 1)
    assert np.all(np.diff(diagram.mbar) > 0)
    # first-transition weight falls off like 1/d
    ratio = diagram.alpha_first[0] / diagram.alpha_first[2]
    assert ratio == pytest.approx(4.0, rel=0.25)


def test_regime_diagram_validation():
    with pytest.raises(ValueError):
        regime_diagram([0.0], P_E)


def test_regime_staircase_matches_optimizer_on_relay_chain():
    # endpoints at separation d plus relays on the d/12 grid realize the
    # evenly spaced chains of the asymptotic model for m in {0, 1, 2, 3}
    d = 0.01
    xs = [0.0, d] + [k * d / 12.0 for k in range(1, 12)]
    pts = np.array([[x, 0.0] for x in xs])
    u = UserSet(points=pts, L=d)
    q0 = capacitance_matrix(u)
    for alpha in (0.9, 0.7, 0.55, 0.45, 0.40, 0.35, 0.31, 0.27):
        net = build_mqe(u, alpha, P_E, q0=q0)
        effs = [single_pair_efficiency(m, d, 1.0, alpha, P_E) for m in range(0, 5)]
        want_m = int(np.argmax(effs))
        assert net.path(0, 1).length == want_m + 1, alpha


def test_q_fc_asymptotics():
    assert q_fc(0.01) == pytest.approx(q_fc_small_extent(0.01), rel=0.01)
    assert q_fc(10.0) == pytest.approx(q_fc_large_extent(10.0), rel=0.15)


def test_q_fc_strictly_decreasing():
    grid = [0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0]
    vals = [q_fc(r) for r in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        q_fc(0.0)


def test_q_fc_matches_sampled_mean_capacitance():
    r = 1.0
    means = []
    for seed in range(3):
        u = sample_users(2000, r, seed=seed)
        means.append(fc_capacitance_stats(capacitance_matrix(u))[0])
    means = np.asarray(means)
    se = means.std(ddof=1) / math.sqrt(means.size)
    assert abs(means.mean() - q_fc(r)) <= 3.0 * se


def test_unnormalized_density_fails_monte_carlo_check():
    # negative control: scaling the density must push the quadrature
    # outside the Monte Carlo error band
    from scipy.integrate import quad

    r = 1.0
    means = []
    for seed in range(3):
        u = sample_users(2000, r, seed=seed)
        means.append(fc_capacitance_stats(capacitance_matrix(u))[0])
    means = np.asarray(means)
    se = means.std(ddof=1) / math.sqrt(means.size)
    bad, _ = quad(
        lambda z: 1.1 * distance_pdf(z) * link_capacitance(z * r),
        0.0, SQRT2, points=[1.0], limit=200,
    )
    assert abs(means.mean() - bad) > 3.0 * se


def test_spanning_tree_estimates():
    assert mst_longest_edge(1024) == pytest.approx(0.04641814874314505, rel=1e-12)
    assert q_mst(1024, 0.1) == pytest.approx(7.754442365096235, rel=1e-12)
    assert math.isfinite(q_mst(64, 3.0)) and q_mst(64, 3.0) > 0.0
    with pytest.raises(ValueError):
        q_mst(1024, 0.0)
    with pytest.raises(ValueError):
        mst_longest_edge(1)


def test_alpha_bar_limits():
    assert alpha_bar(1e-4, P_E) == pytest.approx(alpha_c_step(1, P_E), abs=1e-3)
    # ~1/L in the strong-loss regime
    assert alpha_bar(20.0, P_E) / alpha_bar(40.0, P_E) == pytest.approx(2.0, rel=0.2)
    vals = [alpha_bar(r, P_E) for r in (0.1, 1.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_first_transition_validation():
    with pytest.raises(ValueError):
        first_transition(0.0, P_E)
    a, m = first_transition(1e-3, 1.0)
    assert a == 0.0


def test_crossing_failure_raises_numeric_error():
    from mqenet.theory import _crossing_alpha

    with pytest.raises(NumericError):
        _crossing_alpha(-1.0, 1, 0.5)
