"""Closed-loop experiments on the true plant, validation metrics and reports."""

import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (_rk4_step, integrate, n_steps_for, steady_input,
                       steady_state)
from .errors import DivergenceError, DomainError, EvaluationError, SolvabilityError
from .io import dumps_json, write_csv
from .liftedmodel import (LiftedModel, linearize_standard, simulate_baseline,
                          simulate_lifted)
from .riccati import LqrWeights, lqr_gain, sdre_gain, steady_state_input

__all__ = [
    "SDREController",
    "LQRBaselineController",
    "exact_oracle",
    "ControlRun",
    "ClosedLoopResult",
    "run_closed_loop",
    "derivative_fit_report",
    "rollout_error",
    "bounds_containment",
    "settle_time",
    "first_gain_anomaly",
    "emit_report",
    "write_deriv_fit",
    "write_rollout",
]


# ---------------------------------------------------------------------------
# controllers


class SDREController:
    """Gain-scheduled Riccati feedback on a lifted model.

    ``u = u_ss - K(x) (lift(x) - lift(x_ref))`` where ``K(x)`` solves the
    Riccati equation for ``(A, J_N(x) B)`` every ``resolve_stride`` steps
    and ``u_ss`` is the least-squares steady input at the reference.
    """

    kind = "sdre"

    def __init__(self, model, weights=None, name=None):
        self.model = model
        self.weights = weights or LqrWeights.identity(model.n_z, model.n_u)
        self.name = name or self.kind
        self.bounds = model.state_bounds

    def reset(self, x_ref):
        m = self.model
        self.z_ref = m.lift(x_ref)
        self.u_ss, self.ss_residual = steady_state_input(m.A, m.B_eff(x_ref), self.z_ref)
        self._gain = None

    def lifted(self, x):
        return self.model.lift(x)

    def __call__(self, x, k, resolve):
        z = self.model.lift(x)
        if self._gain is None or resolve:
            self._gain = sdre_gain(self.model, x, self.weights).K
        return self.u_ss - self._gain @ (z - self.z_ref), self._gain, z


class LQRBaselineController:
    """Fixed-gain LQR on the standard linearization, in deviation variables."""

    kind = "lqr_baseline"

    def __init__(self, baseline, weights=None, name=None):
        self.baseline = baseline
        n_x, n_u = baseline.B_lin.shape
        self.weights = weights or LqrWeights.identity(n_x, n_u)
        self.name = name or self.kind
        self.bounds = None
        self.K = lqr_gain(baseline.A_lin, baseline.B_lin, self.weights).K

    def reset(self, x_ref):
        b = self.baseline
        self.z_ref = np.asarray(x_ref, dtype=float) - b.x_op
        # B du = -(f_op + A dx_ref) holds the linear model at the reference
        rhs = -(b.f_op + b.A_lin @ self.z_ref)
        du, *_ = np.linalg.lstsq(b.B_lin, rhs, rcond=None)
        self.ss_residual = float(np.linalg.norm(b.B_lin @ du - rhs))
        self.u_ss = b.u_op + du

    def lifted(self, x):
        return np.asarray(x, dtype=float) - self.baseline.x_op

    def __call__(self, x, k, resolve):
        z = self.lifted(x)
        return self.u_ss - self.K @ (z - self.z_ref), self.K, z


def exact_oracle(lifting, A, plant_B, weights=None, bounds=None):
    """SDRE controller built on a closed-form lifting."""
    n_x = lifting.n_x
    if bounds is None:
        bounds = np.tile([-np.inf, np.inf], (n_x, 1))
    model = LiftedModel(lifting, A, plant_B, bounds, provenance="exact")
    ctrl = SDREController(model, weights, name="exact_oracle")
    ctrl.kind = "exact_oracle"
    return ctrl


# ---------------------------------------------------------------------------
# runs


@dataclass
class ControlRun:
    """One closed-loop experiment on the true plant.

    ``settle_dims`` selects the state components used for settling and
    terminal error (all by default); ``settle_frac`` is the settling band as
    a fraction of the initial error.
    """

    plant: object
    controller: object
    x0: np.ndarray
    x_ref: np.ndarray
    dt: float = 0.01
    t_end: float = 20.0
    resolve_stride: int = 1
    settle_dims: tuple = None
    settle_frac: float = 0.02

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.resolve_stride < 1:
            raise ValueError("resolve_stride must be >= 1")
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.x_ref = np.atleast_1d(np.asarray(self.x_ref, dtype=float))
        if self.x0.shape != (self.plant.n_x,) or self.x_ref.shape != (self.plant.n_x,):
            raise ValueError("x0 and x_ref must match the plant state dimension")


@dataclass
class ClosedLoopResult:
    times: np.ndarray
    X: np.ndarray
    U: np.ndarray
    gain_norm: np.ndarray
    Z: np.ndarray
    in_bounds: np.ndarray
    settle_time: float
    terminal_error: float
    x_ref: np.ndarray
    z_ref: np.ndarray
    controller: str = ""
    plant: str = ""
    failure: str = None
    meta: dict = field(default_factory=dict)

    @property
    def completed(self):
        return self.failure is None


def settle_time(times, X, x_ref, dims=None, frac=0.02):
    """First time after which ``||x - x_ref||_inf`` stays inside the band."""
    dims = slice(None) if dims is None else list(dims)
    err = np.max(np.abs(np.atleast_2d(X)[:, dims] - np.asarray(x_ref)[dims]), axis=1)
    thr = frac * err[0]
    outside = err > thr if thr > 0 else err > 0
    if not outside.any():
        return float(times[0])
    last = int(np.nonzero(outside)[0][-1])
    return float(times[last + 1]) if last + 1 < len(times) else float("inf")


def run_closed_loop(run):
    """Simulate ``run`` on the true plant with the controller in the loop.

    A Riccati failure truncates the result (``failure`` says where); a
    diverging plant raises :class:`DivergenceError` carrying the partial
    result.
    """
    plant, ctrl = run.plant, run.controller
    n = n_steps_for(run.dt, run.t_end)
    ctrl.reset(run.x_ref)
    times, xs, us, gains, zs = [], [], [], [], []
    x = run.x0.copy()
    failure = None
    for k in range(n + 1):
        t = k * run.dt
        try:
            u, K, z = ctrl(x, k, k % run.resolve_stride == 0)
        except (SolvabilityError, EvaluationError, np.linalg.LinAlgError) as exc:
            failure = f"controller failed at t={t:g}, x={x.tolist()}: {exc}"
            break
        times.append(t)
        xs.append(x.copy())
        us.append(np.atleast_1d(u).copy())
        gains.append(float(np.linalg.norm(K)))
        zs.append(np.atleast_1d(z).copy())
        if k == n:
            break
        try:
            x = _rk4_step(plant, x, u, run.dt)
        except DomainError as exc:
            partial = _assemble(run, ctrl, times, xs, us, gains, zs, f"plant failed: {exc}")
            raise DivergenceError(f"plant diverged after t={t:g}: {exc}", last_time=t,
                                  partial=partial) from exc
        if not np.all(np.isfinite(x)):
            partial = _assemble(run, ctrl, times, xs, us, gains, zs, "plant diverged")
            raise DivergenceError(f"plant diverged after t={t:g}", last_time=t,
                                  partial=partial)
    return _assemble(run, ctrl, times, xs, us, gains, zs, failure)


def _assemble(run, ctrl, times, xs, us, gains, zs, failure):
    times = np.asarray(times)
    X = np.asarray(xs).reshape(len(times), run.plant.n_x)
    if ctrl.bounds is None:
        inb = np.ones(len(times), dtype=bool)
    else:
        inb = np.all((X >= ctrl.bounds[:, 0]) & (X <= ctrl.bounds[:, 1]), axis=1)
    dims = slice(None) if run.settle_dims is None else list(run.settle_dims)
    if len(times) and failure is None:
        st = settle_time(times, X, run.x_ref, run.settle_dims, run.settle_frac)
        term = float(np.max(np.abs(X[-1, dims] - run.x_ref[dims])))
    else:
        st, term = float("inf"), float("inf")
    return ClosedLoopResult(
        times, X, np.asarray(us).reshape(len(times), -1), np.asarray(gains),
        np.asarray(zs).reshape(len(times), -1), inb, st, term, run.x_ref,
        np.atleast_1d(ctrl.z_ref), ctrl.name, run.plant.name, failure,
        {"weights": {"Q_diag": np.diag(ctrl.weights.Q).tolist(),
                     "R_diag": np.diag(ctrl.weights.R).tolist()},
         "bounds": None if ctrl.bounds is None else np.asarray(ctrl.bounds).tolist(),
         "kind": ctrl.kind, "u_ss": np.atleast_1d(ctrl.u_ss).tolist(),
         "dt": run.dt, "resolve_stride": run.resolve_stride},
    )


def first_gain_anomaly(result, factor=3.0, window=None):
    """Time of the first gain-norm spike or the failure time, else ``inf``.

    A spike is a gain norm more than ``factor`` times the median over the
    first ``window`` samples (default: first 5% of the run).
    """
    g = result.gain_norm
    if len(g) == 0:
        return 0.0
    window = window or max(1, len(g) // 20)
    base = np.median(g[:window])
    spikes = np.nonzero(g > factor * base)[0]
    if spikes.size:
        return float(result.times[spikes[0]])
    if result.failure is not None:
        return float(result.times[-1]) if len(result.times) else 0.0
    return float("inf")


# ---------------------------------------------------------------------------
# validation metrics


def derivative_fit_report(model, dataset):
    """Per-lifted-dimension RMSE of ``J_N(x) xdot - (A z + J_N(x) B u)``.

    Returns a dict with ``rmse``, ``signal_rms`` (RMS of ``J_N(x) xdot``) and
    their ratio ``relative``.
    """
    X = dataset.X
    lhs = model.lifting.jvp(X, dataset.Xdot)
    rhs = model.lift(X) @ model.A.T
    if dataset.n_u:
        rhs = rhs + model.lifting.jvp(X, dataset.U @ model.plant_B.T)
    rmse = np.sqrt(np.mean((lhs - rhs) ** 2, axis=0))
    sig = np.sqrt(np.mean(lhs ** 2, axis=0))
    return {"rmse": rmse, "signal_rms": sig, "relative": rmse / np.maximum(sig, 1e-300),
            "lhs": lhs, "rhs": rhs}


@dataclass
class RolloutReport:
    times: np.ndarray
    X_true: np.ndarray
    X_hat: np.ndarray
    X_base: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    in_bounds: np.ndarray
    model_rmse: float
    baseline_rmse: float

    @property
    def n_out_of_bounds(self):
        return int(np.count_nonzero(~self.in_bounds))


def rollout_error(model, plant, input_signal, dt, t_end, x0=None, baseline=None):
    """Open-loop prediction error of ``model`` and of the linearization.

    Both predictions and the true plant share ``x0`` (default: the plant's
    nominal steady state) and the RK4 grid. The baseline is linearized at
    the nominal steady state unless given.
    """
    x0 = steady_state(plant) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if baseline is None:
        baseline = linearize_standard(plant, steady_state(plant), steady_input(plant))
    truth = integrate(plant, x0, input_signal, dt, t_end)
    pred = simulate_lifted(model, x0, input_signal, dt, t_end)
    _, X_base = simulate_baseline(baseline, x0, input_signal, dt, t_end)
    rmse = lambda Y: float(np.sqrt(np.mean(np.sum((Y - truth.states) ** 2, axis=1))))  # noqa: E731
    return RolloutReport(truth.times, truth.states, pred.X_hat, X_base, pred.Z, truth.inputs,
                         pred.in_bounds, rmse(pred.X_hat), rmse(X_base))


def bounds_containment(states, bounds, times=None):
    """Fraction of samples inside the box and the first exit time (``None`` if never)."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    bounds = np.asarray(bounds, dtype=float).reshape(X.shape[1], 2)
    inside = np.all((X >= bounds[:, 0]) & (X <= bounds[:, 1]), axis=1)
    times = np.arange(len(X)) if times is None else np.asarray(times)
    exits = np.nonzero(~inside)[0]
    first = float(times[exits[0]]) if exits.size else None
    return float(np.mean(inside)), first


# ---------------------------------------------------------------------------
# report files


def emit_report(result, out_dir, stem="control_run"):
    """Write ``<stem>.csv`` and ``<stem>.meta.json`` for a closed-loop result."""
    os.makedirs(out_dir, exist_ok=True)
    n_x, n_u, n_z = result.X.shape[1], result.U.shape[1], result.Z.shape[1]
    header = (["t"] + [f"x_{i}" for i in range(n_x)] + [f"u_{i}" for i in range(n_u)]
              + [f"z_{i}" for i in range(n_z)] + ["gain_norm", "in_bounds"])
    rows = ([t, *x, *u, *z, g, int(b)] for t, x, u, z, g, b in
            zip(result.times, result.X, result.U, result.Z, result.gain_norm,
                result.in_bounds))
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    write_csv(csv_path, header, rows)
    meta = {
        "plant": result.plant,
        "controller": result.controller,
        "x_ref": np.asarray(result.x_ref).tolist(),
        "z_ref": np.asarray(result.z_ref).tolist(),
        "weights": result.meta.get("weights"),
        "settle_time": _finite_or_str(result.settle_time),
        "terminal_error": _finite_or_str(result.terminal_error),
        "bounds": result.meta.get("bounds"),
        "failure": result.failure,
    }
    meta_path = os.path.join(out_dir, f"{stem}.meta.json")
    with open(meta_path, "w") as fh:
        fh.write(dumps_json(meta))
    return csv_path, meta_path


def _finite_or_str(v):
    return float(v) if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def write_deriv_fit(report, path):
    rows = ([i, r, s] for i, (r, s) in enumerate(zip(report["rmse"], report["signal_rms"])))
    write_csv(path, ["dim", "rmse", "signal_rms"], rows)
    return path


def write_rollout(report, path):
    n_x = report.X_true.shape[1]
    n_z, n_u = report.Z.shape[1], report.U.shape[1]
    header = (["t"] + [f"x_true_{i}" for i in range(n_x)] + [f"x_hat_{i}" for i in range(n_x)]
              + [f"x_base_{i}" for i in range(n_x)] + [f"z_{i}" for i in range(n_z)]
              + [f"u_{i}" for i in range(n_u)] + ["in_bounds"])
    rows = ([t, *a, *b, *c, *z, *u, int(f)] for t, a, b, c, z, u, f in
            zip(report.times, report.X_true, report.X_hat, report.X_base, report.Z, report.U,
                report.in_bounds))
    write_csv(path, header, rows)
    return path

