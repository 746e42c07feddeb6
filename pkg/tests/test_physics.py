import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermobench.physics import (LossBreakdown, LossWeights, PhysicsSignals, carnot_cop,
                                 energy_loss, energy_loss_grad, physics_loss,
                                 physics_loss_grad, realistic_band, total_loss)


def signals_with(carnot, lo, hi, heat=1.0, power=1.0):
    a = np.atleast_1d
    n = max(a(carnot).size, a(lo).size)
    b = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()  # noqa: E731
    return PhysicsSignals(b(300.0), b(270.0), b(heat), b(power), b(carnot), b(lo), b(hi))


def test_carnot_examples():
    assert carnot_cop(300.0, 150.0) == pytest.approx(2.0)
    assert carnot_cop(308.15, 280.15) == pytest.approx(11.00536, abs=1e-5)
    with pytest.raises(ValueError):
        carnot_cop(280.0, 290.0)
    with pytest.raises(ValueError):
        carnot_cop(300.0, 300.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 400.0), st.floats(0.1, 100.0), st.floats(0.1, 100.0))
def test_carnot_decreasing_in_gap(sink, d1, d2):
    # same sink, larger lift -> smaller COP
    small, big = sorted((d1, d2))
    if big == small or sink - big <= 0:
        return
    assert carnot_cop(sink, sink - small) > carnot_cop(sink, sink - big)


def test_band_examples():
    assert realistic_band(10.0) == pytest.approx((3.0, 8.0))
    assert realistic_band(1.0) == pytest.approx((0.3, 0.8))
    lo, hi = realistic_band(np.array([2.0, 7.5, 13.0]))
    np.testing.assert_allclose(lo / hi, 0.375)


def test_physics_literal_example():
    s = signals_with(5.0, 2.0, 5.0)  # midpoint 3.5
    assert physics_loss(np.array([4.0]), s, "literal") == pytest.approx(1.25)


def test_physics_literal_zero_on_match():
    s = signals_with(3.5, 2.0, 5.0)
    assert physics_loss(np.array([3.5]), s, "literal") == 0.0


def test_physics_hinge_zero_inside_band():
    s = signals_with(10.0, 3.0, 8.0)
    assert physics_loss(np.array([3.0, 5.0, 8.0]), signals_with([10.0] * 3, 3.0, 8.0), "hinge") == 0.0
    assert physics_loss(np.array([2.9]), s, "hinge") > 0
    assert physics_loss(np.array([8.1]), s, "hinge") > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(1.01, 30.0), st.floats(0.0, 40.0))
def test_hinge_zero_iff_feasible(carnot, pred):
    lo, hi = realistic_band(carnot)
    val = physics_loss(np.array([pred]), signals_with(carnot, lo, hi), "hinge")
    feasible = lo <= pred <= hi and pred <= carnot
    assert (val == 0.0) == feasible


def test_energy_examples():
    assert energy_loss([8.0], [2.0], [4.0]) == 0.0
    assert energy_loss([9.0], [2.0], [4.0]) == pytest.approx(1.0)
    assert energy_loss([9.0, 11.0], [2.0, 2.0], [4.0, 4.0]) == pytest.approx(5.0)
    assert energy_loss([9.0, 11.0], [2.0, 2.0], [4.0, 4.0], reduction="sum") == pytest.approx(10.0)


def test_empty_batch_errors():
    with pytest.raises(ValueError, match="empty"):
        energy_loss([], [], [])
    s = signals_with(5.0, 1.0, 2.0).take(slice(0, 0))
    with pytest.raises(ValueError, match="empty"):
        physics_loss(np.zeros(0), s)


def test_total_examples():
    b = total_loss(1.0, 2.0, 4.0, LossWeights())
    assert b.total == pytest.approx(1.4)
    assert isinstance(b, LossBreakdown)
    assert total_loss(1.0, 2.0, 4.0, LossWeights(0.0, 0.0)).total == 1.0
    assert total_loss(0.0, 0.0, 0.0, LossWeights()).total == 0.0


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(-0.1, 0.0)
    with pytest.raises(ValueError):
        LossWeights(0.1, float("nan"))


def _fd(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("mode", ["literal", "hinge"])
@pytest.mark.parametrize("reduction", ["mean", "sum"])
def test_physics_grad_matches_fd(mode, reduction):
    rng = np.random.default_rng(0)
    carnot = rng.uniform(2.0, 6.0, 12)
    lo, hi = realistic_band(carnot)
    s = signals_with(carnot, lo, hi)
    # keep points away from hinge kinks
    pred = rng.uniform(0.2, 7.0, 12)
    for edge in (lo, hi, carnot):
        pred = np.where(np.abs(pred - edge) < 1e-3, pred + 0.01, pred)
    g = physics_loss_grad(pred, s, mode, reduction)
    g_fd = _fd(lambda c: physics_loss(c, s, mode, reduction), pred)
    np.testing.assert_allclose(g, g_fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("reduction", ["mean", "sum"])
def test_energy_grad_matches_fd(reduction):
    rng = np.random.default_rng(1)
    heat, power, cop = rng.uniform(0, 3, 9), rng.uniform(0, 1, 9), rng.uniform(0.5, 4, 9)
    g = energy_loss_grad(heat, power, cop, reduction)
    g_fd = _fd(lambda c: energy_loss(heat, power, c, reduction), cop)
    np.testing.assert_allclose(g, g_fd, rtol=1e-6, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32), st.sampled_from(["literal", "hinge"]))
def test_losses_permutation_and_replication_invariant(n, seed, mode):
    rng = np.random.default_rng(seed)
    carnot = rng.uniform(1.5, 10, n)
    lo, hi = realistic_band(carnot)
    heat, power = rng.uniform(0, 5, n), rng.uniform(0, 2, n)
    s = signals_with(carnot, lo, hi, heat, power)
    pred = rng.uniform(0.1, 12, n)
    perm = rng.permutation(n)
    assert physics_loss(pred[perm], s.take(perm), mode) == pytest.approx(physics_loss(pred, s, mode))
    assert energy_loss(heat[perm], power[perm], pred[perm]) == pytest.approx(energy_loss(heat, power, pred))
    rep = np.tile(np.arange(n), 3)
    assert physics_loss(pred[rep], s.take(rep), mode) == pytest.approx(physics_loss(pred, s, mode))


def test_signals_build_derives_power_and_band():
    s = PhysicsSignals.build([318.15], [283.15], [9.0], cop=[3.0])
    assert s.power_input[0] == pytest.approx(3.0)
    assert s.cop_carnot[0] == pytest.approx(318.15 / 35.0)
    assert s.cop_lo[0] == pytest.approx(0.3 * s.cop_carnot[0])
    assert s.scaled(3.0).heat_output[0] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        PhysicsSignals.build([300.0], [300.0], [1.0], power_input=[1.0])
