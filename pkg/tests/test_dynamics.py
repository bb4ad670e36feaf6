import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from liftlearn.dynamics import (CSTR_DEFAULTS, PlantSystem, StepSignal, builtin_plant,
                                coolant_temperature, eval_rhs, find_steady_state,
                                generate_step_dataset, generate_uniform_dataset, integrate,
                                steady_state)
from liftlearn.errors import DimensionError, DivergenceError, DomainError, RootFindingError


def twostate_x2(t, x10=1.0, x20=1.0):
    # x1 = x10 e^{-0.1 t}; particular solution of x2' = x2 - x1^2 is c e^{-0.2 t}
    c = x10 ** 2 / 1.2
    return c * math.exp(-0.2 * t) + (x20 - c) * math.exp(t)


def test_motivating_closed_form():
    traj = integrate(builtin_plant("motivating"), [1.0], dt=1e-4, t_end=0.5)
    assert traj.states[-1, 0] == pytest.approx(2.0, abs=1e-6)


def test_twostate_closed_form():
    traj = integrate(builtin_plant("twostate"), [1.0, 1.0], [0.0], dt=1e-3, t_end=1.0)
    assert traj.states[-1, 0] == pytest.approx(math.exp(-0.1), abs=1e-9)
    assert traj.states[-1, 1] == pytest.approx(twostate_x2(1.0), abs=1e-9)
    # the closed form evaluates to 1.1353226
    assert twostate_x2(1.0) == pytest.approx(1.13527, abs=1e-4)


def test_single_step_trajectory_has_two_nodes():
    traj = integrate(builtin_plant("twostate"), [1.0, 1.0], dt=0.1, t_end=0.1)
    assert len(traj) == 2
    np.testing.assert_array_equal(traj.times, [0.0, 0.1])


def test_rk4_fourth_order():
    plant = builtin_plant("motivating")
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
        x = integrate(plant, [1.0], dt=dt, t_end=0.5).states[-1, 0]
        errs.append(abs(x - 2.0))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 15), ratios


def test_derivatives_come_from_rhs():
    plant = builtin_plant("twostate")
    traj = integrate(plant, [2.0, -1.0], [3.0], dt=0.01, t_end=0.2)
    for x, u, d in zip(traj.states, traj.inputs, traj.derivs):
        np.testing.assert_array_equal(d, eval_rhs(plant, x, u))


def test_divergence_reports_last_time():
    plant = builtin_plant("motivating")
    with np.errstate(over="ignore"), pytest.raises(DivergenceError) as info:
        integrate(plant, [1.0], dt=0.01, t_end=2.0)
    # blow-up time of x' = x^2 from x0=1 is t=1; RK4 overshoots by a step or two
    assert 0.9 < info.value.last_time < 1.1


def test_eval_rhs_shape_checks():
    plant = builtin_plant("twostate")
    with pytest.raises(DimensionError):
        eval_rhs(plant, [1.0, 2.0, 3.0], [0.0])
    with pytest.raises(DimensionError):
        eval_rhs(plant, [1.0, 2.0], [0.0, 1.0])
    bad = PlantSystem("bad", 2, 0, lambda x: x[:1], np.zeros((2, 0)))
    with pytest.raises(DimensionError):
        eval_rhs(bad, [1.0, 2.0])


def test_cstr_domain_error():
    with pytest.raises(DomainError):
        eval_rhs(builtin_plant("cstr"), [-5.0], [0.0])


def test_builtin_plant_shapes():
    two = builtin_plant("twostate")
    assert (two.n_x, two.n_u) == (2, 1)
    np.testing.assert_array_equal(two.B, [[0.0], [1.0]])
    mot = builtin_plant("motivating")
    assert (mot.n_x, mot.n_u) == (1, 0)
    cstr = builtin_plant("cstr")
    assert (cstr.n_x, cstr.n_u) == (1, 1)


def test_unknown_plant_lists_available():
    with pytest.raises(LookupError, match="cstr, motivating, twostate"):
        builtin_plant("pendulum")


def test_plant_B_is_read_only():
    with pytest.raises(ValueError):
        builtin_plant("twostate").B[0, 0] = 1.0


def test_steady_states():
    two = builtin_plant("twostate")
    np.testing.assert_allclose(find_steady_state(two, [0.0], [0.1, 0.1]), [0, 0], atol=1e-10)
    assert find_steady_state(builtin_plant("motivating"), None, [0.0])[0] == 0.0


def test_cstr_steady_state_matches_bracketing_oracle():
    cstr = builtin_plant("cstr")
    p = CSTR_DEFAULTS

    def energy(T):
        rxn = -p["dH_R"] / (p["rho"] * p["Cp"]) * p["k0"] * math.exp(-p["EA_over_R"] / T)
        cool = p["UA"] / (p["rho"] * p["Cp"] * p["V"])
        return p["q"] / p["V"] * (p["T_i"] - T) + rxn * p["C_A"] + cool * (p["T_c_ss"] - T)

    T_ref = brentq(energy, 300.0, 330.0, xtol=1e-13)
    T_ss = cstr.params["T_ss"]
    assert T_ss == pytest.approx(T_ref, abs=1e-8)
    assert abs(eval_rhs(cstr, [T_ss], [0.0])[0]) < 1e-10
    np.testing.assert_array_equal(steady_state(cstr), [T_ss])
    assert coolant_temperature(cstr, [0.0])[0] == p["T_c_ss"]


def test_root_finding_failure():
    plant = PlantSystem("shifted", 1, 0, lambda x: x * x + 1.0, np.zeros((1, 0)))
    with pytest.raises(RootFindingError) as info:
        find_steady_state(plant, None, [1.0], max_iter=20)
    assert info.value.residual >= 1.0


def test_step_dataset_counts_and_determinism():
    plant = builtin_plant("twostate")
    a = generate_step_dataset(plant, [[-1, 1], [-1, 1]], [[-2, 2]], 3, 100, 25, 0.01, seed=4)
    b = generate_step_dataset(plant, [[-1, 1], [-1, 1]], [[-2, 2]], 3, 100, 25, 0.01, seed=4)
    assert len(a) == 3 * 101
    np.testing.assert_array_equal(np.bincount(a.traj_id), [101, 101, 101])
    for name in ("X", "Xdot", "U", "times"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    c = generate_step_dataset(plant, [[-1, 1], [-1, 1]], [[-2, 2]], 3, 100, 25, 0.01, seed=5)
    assert not np.array_equal(a.X, c.X)


def test_zero_order_hold():
    plant = builtin_plant("twostate")
    ds = generate_step_dataset(plant, [[-1, 1], [-1, 1]], [[-2, 2]], 2, 100, 25, 0.01, seed=0)
    for tid in range(2):
        u = ds.U[ds.traj_id == tid, 0]
        # levels switch only on multiples of hold_steps
        changes = np.nonzero(np.diff(u))[0] + 1
        assert set(changes) <= {25, 50, 75}
        for start in range(0, 100, 25):
            assert np.all(u[start:start + 25] == u[start])


def test_dataset_bounds_are_tight():
    plant = builtin_plant("twostate")
    ds = generate_step_dataset(plant, [[-1, 1], [-1, 1]], [[-2, 2]], 4, 60, 20, 0.01, seed=2)
    np.testing.assert_array_equal(ds.state_bounds[:, 0], ds.X.min(axis=0))
    np.testing.assert_array_equal(ds.state_bounds[:, 1], ds.X.max(axis=0))
    np.testing.assert_array_equal(ds.input_bounds[:, 1], ds.U.max(axis=0))


def test_uniform_dataset_motivating():
    plant = builtin_plant("motivating")
    ds = generate_uniform_dataset(plant, [[0.5, 5.0]], np.zeros((0, 2)), 50, seed=0)
    assert ds.X.shape == (50, 1) and ds.U.shape == (50, 0)
    np.testing.assert_allclose(ds.Xdot, ds.X ** 2)
    assert ds.input_bounds.shape == (0, 2)


@settings(max_examples=40, deadline=None)
@given(
    levels=st.lists(st.floats(-10, 10), min_size=1, max_size=6),
    hold=st.integers(1, 10),
    k=st.integers(0, 80),
)
def test_step_signal_constant_between_breaks(levels, hold, k):
    dt = 0.05
    sig = StepSignal.from_grid(levels, hold, dt)
    idx = min(k // hold, len(levels) - 1)
    assert sig(k * dt)[0] == levels[idx]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n_traj=st.integers(1, 3))
def test_samples_inside_bounds(seed, n_traj):
    plant = builtin_plant("twostate")
    ds = generate_step_dataset(plant, [[-2, 2], [-2, 2]], [[-3, 3]], n_traj, 20, 5, 0.01, seed)
    lo, hi = ds.state_bounds[:, 0], ds.state_bounds[:, 1]
    assert np.all((ds.X >= lo) & (ds.X <= hi))
