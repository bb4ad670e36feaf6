"""Lifted models ``z' = A z + J_N(x) B u`` and the linearization baseline."""

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import _signal_fn, eval_rhs, fd_jacobian, n_steps_for
from .errors import DimensionError, DivergenceError, DomainError, EvaluationError
from .liftnet import LiftNet

__all__ = [
    "LiftedModel",
    "LinearBaseline",
    "LiftedRollout",
    "lifted_rhs",
    "simulate_lifted",
    "linearize_standard",
    "simulate_baseline",
    "exact_twostate_model",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class LiftedModel:
    """A lifting together with its linear dynamics and training box.

    ``lifting`` is a :class:`~liftlearn.liftnet.LiftNet` or any object with
    the same ``lift``/``jacobian``/``jvp``/``decode`` methods.
    """

    lifting: object
    A: np.ndarray
    plant_B: np.ndarray
    state_bounds: np.ndarray
    input_bounds: np.ndarray = None
    provenance: str = ""
    plant: str = ""
    history: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.plant_B, dtype=float)
        n_x, n_z = self.lifting.n_x, self.lifting.n_z
        if A.shape != (n_z, n_z):
            raise DimensionError(f"A must be {n_z}x{n_z}, got {A.shape}")
        B = B.reshape(n_x, -1)
        sb = np.array(self.state_bounds, dtype=float).reshape(n_x, 2)
        ib = (np.zeros((B.shape[1], 2)) if self.input_bounds is None
              else np.array(self.input_bounds, dtype=float).reshape(B.shape[1], 2))
        for arr in (A, B, sb, ib):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "plant_B", B)
        object.__setattr__(self, "state_bounds", sb)
        object.__setattr__(self, "input_bounds", ib)

    n_x = property(lambda self: self.lifting.n_x)
    n_z = property(lambda self: self.lifting.n_z)
    n_u = property(lambda self: self.plant_B.shape[1])

    def lift(self, x):
        return self.lifting.lift(x)

    def B_eff(self, x):
        """State-dependent input map ``J_N(x) B`` of shape ``(n_z, n_u)``."""
        return self.lifting.jacobian(x) @ self.plant_B

    def reconstruct(self, z):
        """State estimate from a lifted vector (truncation for identity prefixes)."""
        z = np.asarray(z, dtype=float)
        if getattr(self.lifting, "identity_prefix", False):
            return z[..., :self.n_x].copy()
        return self.lifting.decode(z)

    def in_bounds(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.state_bounds[:, 0], self.state_bounds[:, 1]
        return np.all((x >= lo) & (x <= hi), axis=-1)


def lifted_rhs(model, z, x_for_jacobian, u):
    """``A z + J_N(x) B u``."""
    z = np.asarray(z, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if z.shape != (model.n_z,):
        raise DimensionError(f"z must have shape ({model.n_z},), got {z.shape}")
    if u.shape != (model.n_u,):
        raise DimensionError(f"u must have shape ({model.n_u},), got {u.shape}")
    out = model.A @ z
    if model.n_u:
        out = out + model.lifting.jvp(x_for_jacobian, model.plant_B @ u)
    return out


@dataclass(frozen=True)
class LiftedRollout:
    times: np.ndarray
    Z: np.ndarray
    X_hat: np.ndarray
    U: np.ndarray
    in_bounds: np.ndarray

    @property
    def n_out_of_bounds(self):
        return int(np.count_nonzero(~self.in_bounds))


def simulate_lifted(model, x0, input_signal=None, dt=0.01, t_end=1.0):
    """Open-loop RK4 rollout of the lifted model from ``z0 = lift(x0)``.

    The Jacobian in the input term is evaluated at the model's own
    reconstruction of each RK4 stage. Steps whose reconstruction leaves the
    training box are flagged in ``in_bounds`` but not stopped.
    """
    n = n_steps_for(dt, t_end)
    u_of_t = _signal_fn(input_signal, model.n_u)
    times = np.arange(n + 1) * dt
    Z = np.empty((n + 1, model.n_z))
    U = np.empty((n + 1, model.n_u))
    z = np.asarray(model.lift(x0), dtype=float)

    def rhs(zz, u):
        return lifted_rhs(model, zz, model.reconstruct(zz), u)

    for k in range(n + 1):
        u = np.atleast_1d(np.asarray(u_of_t(times[k]), dtype=float))
        Z[k] = z
        U[k] = u
        if k == n:
            break
        try:
            k1 = rhs(z, u)
            k2 = rhs(z + 0.5 * dt * k1, u)
            k3 = rhs(z + 0.5 * dt * k2, u)
            k4 = rhs(z + dt * k3, u)
        except (EvaluationError, DomainError, ValueError) as exc:
            raise DivergenceError(f"lifted rollout failed after t={times[k]:g}: {exc}",
                                  last_time=times[k]) from exc
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"lifted rollout diverged after t={times[k]:g}",
                                  last_time=times[k])
    X_hat = model.reconstruct(Z)
    return LiftedRollout(times, Z, X_hat, U, model.in_bounds(X_hat))


@dataclass(frozen=True)
class LinearBaseline:
    """First-order model ``dx' = A_lin dx + B_lin du`` about ``(x_op, u_op)``.

    ``f_op`` is the plant derivative at the operating point (zero at an
    equilibrium) and is kept so the model is a true Taylor expansion.
    """

    A_lin: np.ndarray
    B_lin: np.ndarray
    x_op: np.ndarray
    u_op: np.ndarray
    f_op: np.ndarray

    def rhs(self, x, u):
        dx = np.asarray(x, dtype=float) - self.x_op
        du = np.atleast_1d(np.asarray(u, dtype=float)) - self.u_op
        return self.f_op + self.A_lin @ dx + self.B_lin @ du


def linearize_standard(plant, x_op, u_op=None, rel_step=1e-6):
    """Finite-difference linearization of ``plant`` at ``(x_op, u_op)``."""
    x_op = np.atleast_1d(np.asarray(x_op, dtype=float))
    u_op = np.zeros(plant.n_u) if u_op is None else np.atleast_1d(np.asarray(u_op, dtype=float))
    A_lin = fd_jacobian(lambda x: eval_rhs(plant, x, u_op), x_op, rel_step)
    if not np.all(np.isfinite(A_lin)):
        raise DomainError(f"non-finite linearization of {plant.name!r} at {x_op}")
    return LinearBaseline(A_lin, plant.B.copy(), x_op, u_op, eval_rhs(plant, x_op, u_op))


def simulate_baseline(baseline, x0, input_signal=None, dt=0.01, t_end=1.0):
    """RK4 rollout of the linearized model; returns ``(times, states)``."""
    n = n_steps_for(dt, t_end)
    n_u = baseline.B_lin.shape[1]
    u_of_t = _signal_fn(input_signal, n_u)
    times = np.arange(n + 1) * dt
    X = np.empty((n + 1, len(baseline.x_op)))
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    for k in range(n + 1):
        X[k] = x
        if k == n:
            break
        u = np.atleast_1d(u_of_t(times[k]))
        f = lambda y: baseline.rhs(y, u)  # noqa: E731
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return times, X


def exact_twostate_model(mu=-0.1, lambda_sys=1.0, state_bounds=((-1e6, 1e6), (-1e6, 1e6))):
    """Closed-form lifted model of the two-state plant."""
    from .liftnet import twostate_exact_A, twostate_exact_lifting

    return LiftedModel(twostate_exact_lifting(), twostate_exact_A(mu, lambda_sys),
                       [[0.0], [1.0]], state_bounds, [(-1e6, 1e6)],
                       provenance="exact", plant="twostate")


# ---------------------------------------------------------------------------
# model files


def model_to_dict(model):
    if not isinstance(model.lifting, LiftNet):
        raise TypeError(f"only network liftings can be saved, got {model.lifting!r}")
    d = model.lifting.to_dict()
    d.update({
        "A": model.A.tolist(),
        "plant_B": model.plant_B.tolist(),
        "bounds": {"state": model.state_bounds.tolist(), "input": model.input_bounds.tolist()},
        "plant": model.plant,
        "provenance": model.provenance,
    })
    return d


def model_from_dict(d):
    net = LiftNet.from_dict(d)
    bounds = d["bounds"]
    return LiftedModel(net, np.asarray(d["A"], dtype=float),
                       np.asarray(d["plant_B"], dtype=float).reshape(net.n_x, -1),
                       bounds["state"], bounds.get("input") or None,
                       d.get("provenance", ""), d.get("plant", ""))


def save_model(model, path):
    from .io import dumps_json

    with open(path, "w") as fh:
        fh.write(dumps_json(model_to_dict(model)))


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))

