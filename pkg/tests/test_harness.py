"""Monte-Carlo harness: pairing, reproducibility, and aggregate behavior."""
import numpy as np
import pytest

from irsradar.channel import draw_csi
from irsradar.errors import GenerationError
from irsradar.harness import (
    MODE_LABELS,
    SWEEP_MODES,
    Scenario,
    _draw_dopplers,
    _draw_trial_inputs,
    _stream,
    run_trial,
    sweep_gamma,
    sweep_noise,
)
from irsradar.phaseopt import PhasePolicy, optimal_phases

SMALL = dict(n=20, k=3, m=4, trials=8)


def test_scenario_defaults():
    s = Scenario()
    assert (s.n, s.k, s.m) == (50, 5, 10)
    assert s.trials == 1000
    assert s.doppler_range == (-0.5, 0.5)
    assert s.min_gap_cycles == pytest.approx(1.0 / 200.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(n=0)
    with pytest.raises(ValueError):
        Scenario(k=60, n=50)
    with pytest.raises(ValueError):
        Scenario(sigma2=0.0)
    with pytest.raises(ValueError):
        Scenario(gamma=-1.0)
    with pytest.raises(ValueError):
        Scenario(master_seed=-1)
    with pytest.raises(ValueError):
        Scenario(link_mode="nlos_psychic")
    with pytest.raises(ValueError):
        Scenario(nlos_form="cubed")
    with pytest.raises(ValueError):
        Scenario(doppler_range=(0.5, 0.5))
    with pytest.raises(ValueError):
        Scenario(k=5, doppler_min_gap=0.3)  # 5 paths cannot fit
    with pytest.raises(ValueError):
        Scenario(link_mode="nlos_fixed")  # no fixed policy supplied
    with pytest.raises(ValueError):
        Scenario(noise_cov=np.eye(3), n=50)


def test_run_trial_deterministic():
    s = Scenario(**SMALL, master_seed=7)
    assert run_trial(s, 3) == run_trial(s, 3)
    assert run_trial(s, 3) != run_trial(s, 4)


def test_paired_modes_share_draws():
    # everything random is identical across link modes at the same keys
    base = dict(**SMALL, master_seed=11, gamma=0.3)
    drawn = [
        _draw_trial_inputs(Scenario(link_mode=m, **base), 5, 2)
        for m in ("los_only", "nlos_random", "nlos_optimal")
    ]
    x0, nus0, parts0, w0 = drawn[0]
    for x, nus, parts, w in drawn[1:]:
        np.testing.assert_array_equal(x.samples, x0.samples)
        np.testing.assert_array_equal(nus, nus0)
        np.testing.assert_array_equal(w, w0)
        np.testing.assert_array_equal(parts[3], parts0[3])  # alpha
        assert parts[0] == parts0[0]  # h_los


def test_waveform_frozen_across_trials():
    s = Scenario(**SMALL, freeze_waveform=True)
    x0 = _draw_trial_inputs(s, 0, 0)[0]
    x9 = _draw_trial_inputs(s, 9, 0)[0]
    np.testing.assert_array_equal(x0.samples, x9.samples)
    s2 = Scenario(**SMALL)
    x9b = _draw_trial_inputs(s2, 9, 0)[0]
    assert np.max(np.abs(x9b.samples - x0.samples)) > 1e-3


def test_doppler_draws_respect_gap_and_range():
    s = Scenario(n=25, k=4, m=2, trials=1, doppler_range=(0.1, 0.4), doppler_min_gap=0.02)
    span = 0.3
    for t in range(300):
        u = _draw_dopplers(s, _stream(s, 0, t, "doppler"))
        assert u.size == 5
        assert np.all((u >= 0.1) & (u < 0.4))
        srt = np.sort(u[1:])  # the direct path is unconstrained
        seps = np.concatenate([np.diff(srt), [srt[0] + span - srt[-1]]])
        assert seps.min() >= 0.02


def test_doppler_budget_exhaustion_raises():
    # feasible in principle (5 * 0.19 < 1) but vanishingly unlikely per draw
    s = Scenario(n=20, k=5, m=2, trials=1, doppler_min_gap=0.19)
    with pytest.raises(GenerationError):
        run_trial(s, 0)


def test_noiseless_limit_recovers_truth():
    for mode in SWEEP_MODES:
        s = Scenario(**SMALL, link_mode=mode, sigma2=1e-16, gamma=0.5)
        for t in range(4):
            assert run_trial(s, t).nmse < 1e-6


def test_los_mean_matches_theory():
    # alpha_hat - alpha is CN(0, sigma2/(N*gamma)), so the mean NMSE is
    # sqrt(pi/4) * sqrt(sigma2 / (N * gamma))
    s = Scenario(n=40, k=3, m=2, trials=600, link_mode="los_only", gamma=0.2, sigma2=1e-2)
    res = sweep_gamma(s, [0.2])
    expect = np.sqrt(np.pi / 4.0) * np.sqrt(s.sigma2 / (s.n * 0.2))
    got = res.mean_nmse["los"][0]
    assert abs(got - expect) < 3.0 * res.stderr_nmse["los"][0]


def test_sweep_matches_run_trial():
    tpl = Scenario(**SMALL, master_seed=3)
    res = sweep_gamma(tpl, [0.05, 2.0])
    for i, g in enumerate([0.05, 2.0]):
        for mode in SWEEP_MODES:
            lab = MODE_LABELS[mode]
            s = Scenario(n=20, k=3, m=4, trials=8, master_seed=3, link_mode=mode, gamma=g)
            for t in range(tpl.trials):
                rec = run_trial(s, t, axis_index=i)
                assert res.records[lab]["nmse"][i, t] == rec.nmse
                assert res.records[lab]["mse"][i, t] == rec.mse
                assert res.records[lab]["crb_trace"][i, t] == rec.crb_trace


def test_sweep_deterministic_and_worker_independent():
    tpl = Scenario(n=20, k=3, m=4, trials=40, master_seed=5)
    a = sweep_gamma(tpl, [0.01, 1.0])
    b = sweep_gamma(tpl, [0.01, 1.0])
    c = sweep_gamma(tpl, [0.01, 1.0], workers=2)
    for lab in a.modes:
        np.testing.assert_array_equal(a.mean_nmse[lab], b.mean_nmse[lab])
        np.testing.assert_array_equal(a.mean_nmse[lab], c.mean_nmse[lab])
        np.testing.assert_array_equal(a.records[lab]["mse"], c.records[lab]["mse"])
    np.testing.assert_array_equal(a.excluded, c.excluded)


def test_optimal_never_worse_than_random_per_trial():
    tpl = Scenario(n=24, k=3, m=6, trials=60, master_seed=2)
    res = sweep_gamma(tpl, [1e-3, 1e-1, 1e1])
    opt = res.records["nlos_optimal"]["mse"]
    rnd = res.records["nlos_random"]["mse"]
    assert np.all(opt <= rnd + 1e-15)


def test_mean_ordering_across_master_seeds():
    for seed in range(5):
        tpl = Scenario(n=30, k=3, m=6, trials=150, master_seed=seed)
        res = sweep_gamma(tpl, [1e-2])
        assert res.mean_nmse["nlos_optimal"][0] <= res.mean_nmse["nlos_random"][0]


def test_stderr_shrinks_with_trials():
    lo = sweep_noise(Scenario(n=20, k=3, m=4, trials=300, master_seed=9), [1e-2])
    hi = sweep_noise(Scenario(n=20, k=3, m=4, trials=1200, master_seed=9), [1e-2])
    for lab in lo.modes:
        ratio = lo.stderr_nmse[lab][0] / hi.stderr_nmse[lab][0]
        assert 1.4 < ratio < 2.9  # expect about 2 at 4x the trials


def test_noise_sweep_nondecreasing_within_two_se():
    tpl = Scenario(n=20, k=3, m=4, trials=300, master_seed=4, gamma=1e-2)
    grid = np.logspace(-5, 0, 6)
    res = sweep_noise(tpl, grid)
    for lab in res.modes:
        m, se = res.mean_nmse[lab], res.stderr_nmse[lab]
        for j in range(1, grid.size):
            slack = 2.0 * np.hypot(se[j], se[j - 1])
            assert m[j] >= m[j - 1] - slack


def test_exclusions_are_counted_and_masked():
    # gap chosen so a sizeable fraction of trials exhausts the budget
    tpl = Scenario(n=20, k=5, m=2, trials=40, master_seed=1, doppler_min_gap=0.155)
    res = sweep_gamma(tpl, [0.5])
    assert res.excluded[0] > 0
    assert res.included[0] + res.excluded[0] == 40
    nan_count = int(np.isnan(res.records["los"]["nmse"][0]).sum())
    assert nan_count == res.excluded[0]
    for lab in res.modes:
        assert np.isfinite(res.mean_nmse[lab][0])


def test_sweep_axis_validation():
    tpl = Scenario(**SMALL)
    with pytest.raises(ValueError):
        sweep_gamma(tpl, [])
    with pytest.raises(ValueError):
        sweep_gamma(tpl, [1e-2, 0.0])
    with pytest.raises(ValueError):
        sweep_noise(tpl, [-1.0])


def test_fixed_panels_replayed_every_trial():
    rng = np.random.default_rng(0)
    _, panels, _, _ = draw_csi(4, 3, rng)
    s = Scenario(n=20, k=3, m=4, trials=3, fixed_panels=panels)
    for t in range(3):
        parts = _draw_trial_inputs(s, t, 0)[2]
        assert parts[1] is panels or parts[1] == panels
    a0 = _draw_trial_inputs(s, 0, 0)[2][3]
    a1 = _draw_trial_inputs(s, 1, 0)[2][3]
    assert np.max(np.abs(a0 - a1)) > 1e-3  # reflectivities still vary


def test_fixed_policy_with_optimal_thetas_matches_optimal_mode():
    rng = np.random.default_rng(8)
    _, panels, _, _ = draw_csi(4, 3, rng)
    thetas = tuple(optimal_phases(p.g, p.h) for p in panels)
    common = dict(n=20, k=3, m=4, trials=1, gamma=0.1, fixed_panels=panels)
    opt = run_trial(Scenario(link_mode="nlos_optimal", **common), 0)
    fix = run_trial(
        Scenario(
            link_mode="nlos_fixed",
            phase_policy=PhasePolicy(kind="fixed", fixed_theta=thetas),
            **common,
        ),
        0,
    )
    assert fix == opt


def test_explicit_noise_covariance_matches_scaled_identity():
    s_id = Scenario(**SMALL, sigma2=0.05)
    s_cov = Scenario(**SMALL, sigma2=0.05, noise_cov=0.05 * np.eye(20))
    for t in range(4):
        a, b = run_trial(s_id, t), run_trial(s_cov, t)
        assert a.nmse == pytest.approx(b.nmse, rel=1e-12)
        assert a.mse == pytest.approx(b.mse, rel=1e-12)
