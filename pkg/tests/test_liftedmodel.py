import numpy as np
import pytest

from liftlearn.dynamics import CSTR_DEFAULTS, StepSignal, builtin_plant, integrate, steady_state
from liftlearn.errors import DimensionError
from liftlearn.liftedmodel import (LiftedModel, exact_twostate_model, lifted_rhs,
                                   linearize_standard, load_model, save_model, simulate_baseline,
                                   simulate_lifted)
from liftlearn.liftnet import LiftNet, NetArchitecture, twostate_exact_lifting


def test_lifted_rhs_exact_twostate():
    m = exact_twostate_model()
    z = m.lift([1.0, 2.0])
    np.testing.assert_allclose(lifted_rhs(m, z, [1.0, 2.0], [1.0]), [-0.1, 2.0, -0.2],
                               atol=1e-15)
    np.testing.assert_allclose(lifted_rhs(m, z, [1.0, 2.0], [0.0]), m.A @ z)
    np.testing.assert_array_equal(lifted_rhs(m, np.zeros(3), [0.0, 0.0], [0.0]), 0.0)


def test_lifted_rhs_shapes():
    m = exact_twostate_model()
    with pytest.raises(DimensionError):
        lifted_rhs(m, np.zeros(2), [0.0, 0.0], [0.0])
    with pytest.raises(DimensionError):
        lifted_rhs(m, np.zeros(3), [0.0, 0.0], [0.0, 1.0])


def test_model_validates_A_shape():
    with pytest.raises(DimensionError):
        LiftedModel(twostate_exact_lifting(), np.eye(2), [[0.0], [1.0]], [[0, 1], [0, 1]])


def test_exact_model_matches_plant():
    m = exact_twostate_model()
    rng = np.random.default_rng(0)
    for _ in range(3):
        sig = StepSignal.from_grid(rng.uniform(-2, 2, 5), 100, 0.01)
        x0 = rng.uniform(-1, 1, 2)
        truth = integrate(builtin_plant("twostate"), x0, sig, 0.01, 5.0)
        pred = simulate_lifted(m, x0, sig, 0.01, 5.0)
        assert np.abs(pred.X_hat - truth.states).max() <= 1e-6
        assert pred.n_out_of_bounds == 0


def test_rollout_flags_out_of_bounds():
    m = exact_twostate_model(state_bounds=((-1, 1), (-1, 1)))
    pred = simulate_lifted(m, [0.5, 0.5], [3.0], 0.01, 2.0)
    assert pred.n_out_of_bounds > 0
    assert pred.in_bounds[0]


def test_linearize_twostate_origin():
    lin = linearize_standard(builtin_plant("twostate"), [0.0, 0.0], [0.0])
    np.testing.assert_allclose(lin.A_lin, [[-0.1, 0.0], [0.0, 1.0]], atol=1e-8)
    np.testing.assert_array_equal(lin.B_lin, [[0.0], [1.0]])
    np.testing.assert_array_equal(lin.f_op, [0.0, 0.0])


def test_linearize_motivating():
    lin = linearize_standard(builtin_plant("motivating"), [1.0])
    assert lin.A_lin[0, 0] == pytest.approx(2.0, abs=1e-7)
    # off-equilibrium: the constant term keeps the Taylor model exact at x_op
    np.testing.assert_allclose(lin.rhs([1.0], []), [1.0])


def test_linearize_cstr_input_gain():
    cstr = builtin_plant("cstr")
    lin = linearize_standard(cstr, steady_state(cstr), [0.0])
    p = CSTR_DEFAULTS
    assert lin.B_lin[0, 0] == p["UA"] / (p["rho"] * p["Cp"] * p["V"])
    assert abs(lin.f_op[0]) < 1e-10


def test_baseline_rollout_is_linear_flow():
    lin = linearize_standard(builtin_plant("twostate"), [0.0, 0.0], [0.0])
    times, X = simulate_baseline(lin, [1.0, 0.0], None, 0.01, 1.0)
    assert X[-1, 0] == pytest.approx(np.exp(-0.1), abs=1e-10)
    assert X[-1, 1] == pytest.approx(0.0, abs=1e-14)


def test_model_file_round_trip(tmp_path):
    arch = NetArchitecture(2, 3, (4,), identity_prefix=False)
    rng = np.random.default_rng(1)
    net = LiftNet(arch, rng.standard_normal(arch.n_p), rng.standard_normal(arch.n_q))
    m = LiftedModel(net, rng.standard_normal((3, 3)), [[0.0], [1.0]], [[-1, 1], [-2, 2]],
                    [[-3, 3]], "abc", "twostate")
    path = tmp_path / "model.json"
    save_model(m, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.A, m.A)
    np.testing.assert_array_equal(back.lifting.p, net.p)
    np.testing.assert_array_equal(back.lifting.q, net.q)
    np.testing.assert_array_equal(back.state_bounds, m.state_bounds)
    np.testing.assert_array_equal(back.input_bounds, m.input_bounds)
    assert back.plant == "twostate" and back.provenance == "abc"
    x = np.array([0.3, -0.7])
    np.testing.assert_array_equal(back.B_eff(x), m.B_eff(x))


def test_analytic_lifting_cannot_be_saved(tmp_path):
    with pytest.raises(TypeError):
        save_model(exact_twostate_model(), tmp_path / "m.json")
