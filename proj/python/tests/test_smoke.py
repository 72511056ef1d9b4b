import math

import pytest

import evolab


def test_gpd_roundtrip_and_fit():
    p = evolab.GpdParams(0.3, 1.0)
    for u in (0.0, 0.25, 0.5, 0.9, 0.999):
        assert abs(evolab.gpd_cdf(p, evolab.gpd_quantile(p, u)) - u) < 1e-12
    fitted = evolab.fit_gpd_mle([evolab.gpd_quantile(p, (i + 0.5) / 4000) for i in range(4000)])
    assert abs(fitted.xi - 0.3) < 0.05
    assert abs(fitted.sigma - 1.0) < 0.05


def test_risk_boundary_example():
    p = evolab.GpdParams(0.5, 2.0, n_peaks=20, n_total=100, threshold=10.0)
    assert evolab.risk_boundary(p, 0.1) == pytest.approx(11.65685, abs=1e-5)
    with pytest.raises(ValueError):
        evolab.risk_boundary(p, 0.2)


def test_bounds_and_ratio():
    assert evolab.violation_prob_bound(evolab.GpdParams(0.5, 1.0), 2.0, 0.0) == 0.25
    assert evolab.compute_nu0(evolab.GpdParams(0.5, 1.0, 20, 100), 0.005, 0.99) == pytest.approx(0.072)
    evo, qr = evolab.variance_pair(0.8, 0.1, 100, 0.5)
    assert evo == pytest.approx(0.01)
    assert evo / qr == pytest.approx(0.1 / 0.9)
    assert evolab.ratio_metric(10.0, 0.0, 0.01) == pytest.approx(1000.0)


def test_environment_rollout_is_reproducible():
    def rollout():
        env = evolab.make_environment("hazard-grid")
        env.reset(7)
        total = 0.0
        for t in range(env.max_episode_len):
            _, reward, cost, done, truncated = env.step(t % 5)
            total += reward + 10.0 * cost
            if done or truncated:
                break
        return total

    assert "hazard-grid" in evolab.environment_ids()
    assert rollout() == rollout()


def test_short_training_run():
    rows = evolab.train("", ["epoch_batch_steps=300", "total_steps=600", "hidden=8", "output_dir=", "seed=2"])
    assert [r["epoch"] for r in rows] == [0, 1]
    for r in rows:
        assert 0.0 <= r["violation_rate"] <= 1.0
        assert math.isfinite(r["mean_return"])
    with pytest.raises(ValueError):
        evolab.train("", ["no_such_key=1"])
