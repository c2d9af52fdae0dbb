"""Tests for stablelab.flow_engine: drift fields, mollification, flows."""
import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablelab.flow_engine import (
    DriftField,
    FlowTrajectory,
    flow_stability_check,
    frozen_shift,
    integrate_flow,
    mollify,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def bump_half():
    return DriftField.holder_bump(1.0, 0.5)


@pytest.fixture(scope="module")
def sin_drift():
    return DriftField.shifted_sin(0.3, 1.0)


# ---------------------------------------------------------------------------
# DriftField catalog and Hölder metadata
# ---------------------------------------------------------------------------


def test_catalog_basic_properties(bump_half):
    z = DriftField.zero(2)
    assert z.bounded and z.sup_norm == 0.0 and z.K0 == 0.0
    c = DriftField.constant([1.5, -2.0])
    assert c.dim == 2 and c.bounded
    assert c.sup_norm == pytest.approx(math.hypot(1.5, 2.0))
    a = DriftField.linear([[0.0, 2.0], [0.0, 0.0]])
    assert not a.bounded and a.K0 == pytest.approx(2.0)
    assert bump_half.bounded and bump_half.sup_norm == 1.0
    assert not bump_half.smooth and a.smooth


def test_drift_evaluation_shapes(bump_half):
    x = np.zeros((7, 3, 1))
    out = bump_half(0.0, x)
    assert out.shape == x.shape
    with pytest.raises(ValueError, match="last axis"):
        bump_half(0.0, np.zeros((5, 2)))


def test_bump_magnitude_and_cap():
    f = DriftField.holder_bump(2.0, 0.5, center=[1.0, 0.0], dim=2)
    near = f(0.0, np.array([1.0, 0.25]))
    assert np.linalg.norm(near) == pytest.approx(2.0 * 0.25**0.5)
    far = f(0.0, np.array([40.0, -3.0]))
    assert np.linalg.norm(far) == pytest.approx(2.0)  # capped beyond radius 1


def test_sampled_holder_ratio_catalog(bump_half, sin_drift):
    assert DriftField.zero(1).holder_ratio_sample() == 0.0
    assert DriftField.constant([3.0]).holder_ratio_sample() == 0.0
    for f in (
        bump_half,
        sin_drift,
        DriftField.linear([[0.5, 0.2], [-0.1, 0.3]]),
        DriftField.holder_bump(2.5, 0.8, dim=2),
    ):
        assert f.holder_ratio_sample(n_pairs=200) <= 1.01


def test_underdeclared_constant_is_caught():
    # a field claiming K0 ten times smaller than the truth must fail the probe
    lying = DriftField(
        eval=lambda t, x: np.minimum(np.abs(x), 1.0) ** 0.5,
        dim=1,
        beta=0.5,
        K0=0.1,
    )
    assert lying.holder_ratio_sample() > 1.01


@given(
    k0=st.floats(0.1, 3.0),
    beta=st.floats(0.15, 0.85),
    amp=st.floats(0.1, 2.0),
    a11=st.floats(-2.0, 2.0),
    a12=st.floats(-2.0, 2.0),
)
@settings(max_examples=25, deadline=None)
def test_sampled_holder_ratio_property(k0, beta, amp, a11, a12):
    fields = (
        DriftField.holder_bump(k0, beta),
        DriftField.shifted_sin(-1.0, amp, beta=0.75),
        DriftField.linear([[a11, a12], [0.0, 0.5]]),
    )
    for f in fields:
        assert f.holder_ratio_sample(n_pairs=100, seed=3) <= 1.01


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=0, beta=0.5, K0=1.0),
        dict(dim=1, beta=0.0, K0=1.0),
        dict(dim=1, beta=1.0, K0=1.0),
        dict(dim=1, beta=0.5, K0=-1.0),
        dict(dim=1, beta=0.5, K0=1.0, locality_radius=0.0),
        dict(dim=1, beta=0.5, K0=1.0, sup_norm=-2.0),
    ],
)
def test_drift_field_rejects_bad_metadata(kwargs):
    with pytest.raises(ValueError):
        DriftField(eval=lambda t, x: x, **kwargs)


def test_linear_factory_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        DriftField.linear([[1.0, 2.0]])


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def test_mollify_preserves_constants_exactly():
    c = DriftField.constant([1.5, -2.0])
    mc = mollify(c, 0.3)
    x = np.random.default_rng(1).uniform(-3.0, 3.0, (50, 2))
    assert np.abs(mc(0.0, x) - c(0.0, x)).max() <= 1e-12


def test_mollify_leaves_linear_drifts_unchanged():
    # the bump is symmetric, so the odd first moment cancels exactly
    a = DriftField.linear([[0.5, 0.2], [-0.1, 0.3]])
    ma = mollify(a, 0.2)
    x = np.random.default_rng(2).uniform(-3.0, 3.0, (50, 2))
    assert np.abs(ma(0.0, x) - a(0.0, x)).max() <= 1e-12


def test_mollify_gap_and_gradient_bounds(bump_half):
    delta = 0.1
    mb = mollify(bump_half, delta)
    xs = np.linspace(-2.0, 2.0, 801)[:, None]
    gap = np.abs(mb(0.0, xs) - bump_half(0.0, xs)).max()
    assert gap <= bump_half.K0 * delta**bump_half.beta
    step = 1e-4
    grad = np.abs(mb(0.0, xs + step) - mb(0.0, xs - step)) / (2.0 * step)
    assert grad.max() <= 1.1 * bump_half.K0 * delta ** (bump_half.beta - 1.0)


def test_mollify_marks_smooth_and_shrinks_locality(bump_half):
    mb = mollify(bump_half, 0.05)
    assert mb.smooth
    assert mb.locality_radius == math.inf
    local = DriftField(
        eval=lambda t, x: np.zeros_like(x), dim=1, beta=0.5, K0=0.0,
        locality_radius=2.0,
    )
    assert mollify(local, 0.5).locality_radius == pytest.approx(1.5)


def test_mollify_rejects_bad_scales(bump_half):
    with pytest.raises(ValueError, match="positive"):
        mollify(bump_half, 0.0)
    local = DriftField(
        eval=lambda t, x: np.zeros_like(x), dim=1, beta=0.5, K0=0.0,
        locality_radius=0.5,
    )
    with pytest.raises(ValueError, match="locality radius"):
        mollify(local, 0.5)


# ---------------------------------------------------------------------------
# flow integration
# ---------------------------------------------------------------------------


def test_zero_drift_freezes_the_point():
    traj = integrate_flow(DriftField.zero(1), 0.0, [0.7], 1.0, 1e-2)
    assert np.abs(traj.points - 0.7).max() == 0.0
    assert traj.error_estimate == 0.0


def test_linear_flow_hits_the_exponential():
    traj = integrate_flow(DriftField.linear([[1.0]]), 0.0, [1.0], 1.0, 1e-2)
    assert traj.points[-1][0] == pytest.approx(math.e, abs=1e-8)
    assert traj.richardson_error <= 1e-8


def test_holder_zero_follows_the_escaping_branch(bump_half):
    # x' = sqrt(min(|x|,1)) from x(0)=0 has many solutions; the mollified
    # dynamics select the branch x(s) = (s/2)^2 that leaves the zero
    traj = integrate_flow(bump_half, 0.0, [0.0], 1.0, 1e-3)
    theta = traj.points[-1][0]
    assert theta == pytest.approx(0.25, abs=1e-3)
    assert theta > 0.25  # mollification pushes slightly ahead of the cusp
    assert abs(theta - 0.25) <= traj.error_estimate
    mid = traj.at(0.5)[0]
    assert mid == pytest.approx(1.0 / 16.0, abs=1e-3)


def test_trajectory_conventions(sin_drift):
    traj = integrate_flow(sin_drift, 0.2, [0.4], 0.9, 1e-2)
    assert tuple(traj.points[0]) == (0.4,)  # theta at tau equals xi exactly
    assert traj.at(0.1)[0] == 0.4  # before tau the flow is frozen
    assert traj.at(5.0)[0] == traj.points[-1][0]
    assert traj.times[0] == 0.2 and traj.times[-1] == pytest.approx(0.9)
    flat = integrate_flow(sin_drift, 0.3, [0.5], 0.3, 1e-2)
    assert flat.times.size == 1 and flat.points[0][0] == 0.5


def test_flow_semigroup_on_smooth_drift(sin_drift):
    first = integrate_flow(sin_drift, 0.0, [0.5], 0.4, 1e-3).points[-1]
    second = integrate_flow(sin_drift, 0.4, first, 1.0, 1e-3).points[-1]
    direct = integrate_flow(sin_drift, 0.0, [0.5], 1.0, 1e-3).points[-1]
    assert np.abs(second - direct).max() <= 1e-9


def test_mollification_scale_ladder_converges(bump_half):
    # trajectories under F_delta approach the sharp-drift trajectory at least
    # as fast as delta^beta
    ref = integrate_flow(mollify(bump_half, 1e-5), 0.0, [0.3], 1.0, 1e-3).points[-1]
    devs = []
    for delta in (0.1, 0.05, 0.025):
        smoothed = mollify(bump_half, delta)
        end = integrate_flow(smoothed, 0.0, [0.3], 1.0, 1e-3).points[-1]
        dev = float(np.abs(end - ref).max())
        assert dev <= bump_half.K0 * delta**bump_half.beta * 1.0
        devs.append(dev)
    assert devs[0] > devs[1] > devs[2]


def test_integrate_flow_rejects_bad_arguments(bump_half):
    with pytest.raises(ValueError, match="dimension"):
        integrate_flow(bump_half, 0.0, [0.0, 0.0], 1.0, 1e-2)
    with pytest.raises(ValueError, match="precede"):
        integrate_flow(bump_half, 1.0, [0.0], 0.5, 1e-2)
    with pytest.raises(ValueError, match="step"):
        integrate_flow(bump_half, 0.0, [0.0], 1.0, 0.0)


def test_non_finite_drift_reports_the_point():
    broken = DriftField(
        eval=lambda t, x: np.where(np.abs(x) > 0.5, math.nan, 1.0),
        dim=1,
        beta=0.5,
        K0=1.0,
        smooth=True,
    )
    with pytest.raises(ValueError, match="not finite at t="):
        integrate_flow(broken, 0.0, [0.4], 1.0, 1e-2)


def test_trajectory_container_validation():
    with pytest.raises(ValueError, match="matching length"):
        FlowTrajectory(
            tau=0.0, xi=(0.0,), times=np.array([0.0, 1.0]),
            points=np.zeros((3, 1)), step=0.1,
            richardson_error=0.0, mollification_error=0.0,
        )
    with pytest.raises(ValueError, match="start exactly"):
        FlowTrajectory(
            tau=0.0, xi=(1.0,), times=np.array([0.0, 1.0]),
            points=np.zeros((2, 1)), step=0.1,
            richardson_error=0.0, mollification_error=0.0,
        )


# ---------------------------------------------------------------------------
# frozen shift
# ---------------------------------------------------------------------------


def test_frozen_shift_trivial_cases():
    z = frozen_shift(DriftField.zero(1), 0.0, [0.3], 0.2, 0.8, [1.0])
    assert z[0] == 1.0
    c = frozen_shift(DriftField.constant([2.0]), 0.0, [0.3], 0.2, 0.8, [1.0])
    assert c[0] == pytest.approx(1.0 + 2.0 * 0.6, abs=1e-12)


def test_frozen_shift_collapses_to_the_flow(sin_drift, bump_half):
    for field in (sin_drift, bump_half):
        shifted = frozen_shift(field, 0.1, [0.4], 0.1, 0.9, [0.4])
        flowed = integrate_flow(field, 0.1, [0.4], 0.9, 1e-3).points[-1]
        assert abs(shifted[0] - flowed[0]) <= 1e-6


def test_frozen_shift_is_affine_in_x(sin_drift):
    base = frozen_shift(sin_drift, 0.0, [0.2], 0.3, 0.9, [1.0])
    moved = frozen_shift(sin_drift, 0.0, [0.2], 0.3, 0.9, [1.37])
    assert moved[0] - base[0] == pytest.approx(0.37, abs=1e-12)


def test_frozen_shift_rejects_unordered_times(sin_drift):
    with pytest.raises(ValueError, match="tau <= t <= s"):
        frozen_shift(sin_drift, 0.5, [0.0], 0.2, 0.8, [0.0])
    with pytest.raises(ValueError, match="tau <= t <= s"):
        frozen_shift(sin_drift, 0.0, [0.0], 0.9, 0.8, [0.0])


# ---------------------------------------------------------------------------
# flow stability
# ---------------------------------------------------------------------------


def test_stability_zero_drift_ratio_is_exact():
    rep = flow_stability_check(DriftField.zero(1), 0.7, [(0.0, 0.5, [0.0], [0.3])])
    expected = 0.3 / (0.3 + 0.5 ** (1.0 / 0.7))
    assert rep.max_ratio_refined == pytest.approx(expected, rel=1e-12)
    assert rep.stable


def test_stability_linear_drift_matches_closed_form():
    rep = flow_stability_check(
        DriftField.linear([[1.0]]), 0.7, [(0.2, 0.7, [0.0], [0.1])]
    )
    expected = 0.1 * math.exp(0.5) / (0.1 + 0.5 ** (1.0 / 0.7))
    assert rep.max_ratio_refined == pytest.approx(expected, rel=1e-9)


def test_stability_holder_drift_scenario():
    rng = np.random.default_rng(42)
    n = 120
    t_lo = rng.uniform(0.0, 0.9, n)
    t_hi = t_lo + rng.uniform(0.01, 1.0 - t_lo)
    xs = rng.uniform(-2.0, 2.0, (n, 1))
    dx = rng.uniform(-1.0, 1.0, (n, 1))
    pairs = [(t_lo[i], t_hi[i], xs[i], xs[i] + dx[i]) for i in range(n)]
    rep = flow_stability_check(DriftField.holder_bump(1.0, 0.6), 0.6, pairs)
    assert math.isfinite(rep.max_ratio_refined)
    assert rep.max_ratio_refined <= 3.0
    assert rep.relative_change <= 0.10 and rep.stable
    assert len(rep.pair_ratios) == n
    # coincident pairs contribute ratio zero rather than 0/0
    degenerate = flow_stability_check(
        DriftField.holder_bump(1.0, 0.6), 0.6, [(0.5, 0.5, [0.1], [0.1])]
    )
    assert degenerate.max_ratio_refined == 0.0


def test_stability_rejects_bad_arguments(bump_half):
    ok_pair = [(0.0, 0.5, [0.0], [0.3])]
    with pytest.raises(ValueError, match="alpha"):
        flow_stability_check(bump_half, 1.2, ok_pair)
    with pytest.raises(ValueError, match="alpha \\+ beta"):
        flow_stability_check(bump_half, 0.4, ok_pair)
    with pytest.raises(ValueError, match="0 <= t <= s <= 1"):
        flow_stability_check(bump_half, 0.7, [(0.6, 0.4, [0.0], [0.3])])
    with pytest.raises(ValueError, match="0 <= t <= s <= 1"):
        flow_stability_check(bump_half, 0.7, [(0.5, 1.4, [0.0], [0.3])])
    with pytest.raises(ValueError, match="n_steps"):
        flow_stability_check(bump_half, 0.7, ok_pair, n_steps=0)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def test_trajectory_csv_roundtrip(tmp_path, sin_drift):
    traj = integrate_flow(sin_drift, 0.0, [0.4], 0.5, 0.05)
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(traj, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "theta1"]
    assert len(rows) == 1 + traj.times.size
    assert float(rows[1][1]) == pytest.approx(0.4)
    assert float(rows[-1][0]) == pytest.approx(0.5)
    assert float(rows[-1][1]) == pytest.approx(traj.points[-1][0], rel=1e-9)
