"""Benchmark plants, fixed-step RK4 simulation and dataset generation.

All plants are control-affine, ``xdot = f(x) + B u`` with a constant input
matrix ``B``. Derivatives stored in trajectories and datasets always come
from the analytic right-hand side, never from differencing states.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, DivergenceError, DomainError, RootFindingError

__all__ = [
    "PlantSystem",
    "StepSignal",
    "Trajectory",
    "Dataset",
    "eval_rhs",
    "integrate",
    "generate_step_dataset",
    "generate_uniform_dataset",
    "builtin_plant",
    "available_plants",
    "find_steady_state",
    "config_hash",
    "cstr_plant",
    "coolant_temperature",
    "steady_input",
    "steady_state",
]


@dataclass(frozen=True)
class PlantSystem:
    """Control-affine plant ``xdot = f(x) + B u``.

    ``rhs`` maps a state vector of length ``n_x`` to the drift ``f(x)``.
    ``B`` is stored as a read-only ``(n_x, n_u)`` array.
    """

    name: str
    n_x: int
    n_u: int
    rhs: Callable[[np.ndarray], np.ndarray]
    B: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        B = np.array(self.B, dtype=float).reshape(self.n_x, self.n_u)
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "params", dict(self.params))

    def __call__(self, x, u=None):
        return eval_rhs(self, x, u)


def _as_vector(v, n, what):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 and n == 1:
        arr = arr.reshape(1)
    if arr.shape != (n,):
        raise DimensionError(f"{what} must have shape ({n},), got {arr.shape}")
    return arr


def eval_rhs(plant, x, u=None):
    """Return ``f(x) + B u`` for one state/input pair."""
    x = _as_vector(x, plant.n_x, "state")
    u = np.zeros(plant.n_u) if u is None else _as_vector(u, plant.n_u, "input")
    fx = np.asarray(plant.rhs(x), dtype=float)
    if fx.shape != (plant.n_x,):
        raise DimensionError(
            f"plant {plant.name!r} rhs returned shape {fx.shape}, expected ({plant.n_x},)"
        )
    out = fx + plant.B @ u
    if not np.all(np.isfinite(out)):
        raise DomainError(f"plant {plant.name!r}: non-finite derivative at x={x}, u={u}")
    return out


class StepSignal:
    """Piecewise-constant (zero-order hold) input schedule.

    ``levels[k]`` is applied on ``[breaks[k], breaks[k+1])``; the last level
    holds forever. ``breaks[0]`` must be 0.
    """

    def __init__(self, breaks, levels):
        self.breaks = np.asarray(breaks, dtype=float).reshape(-1)
        levels = np.asarray(levels, dtype=float)
        if levels.ndim == 1:
            levels = levels.reshape(len(self.breaks), -1)
        self.levels = levels
        if len(self.breaks) == 0 or self.breaks[0] != 0.0:
            raise ValueError("breaks must start at t=0")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        if self.levels.shape[0] != len(self.breaks):
            raise ValueError("need one level per breakpoint")

    @classmethod
    def constant(cls, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cls([0.0], u.reshape(1, -1))

    @classmethod
    def from_grid(cls, levels, hold_steps, dt):
        """Levels switching every ``hold_steps`` integration steps."""
        levels = np.asarray(levels, dtype=float)
        if levels.ndim == 1:
            levels = levels[:, None]
        return cls(np.arange(len(levels)) * hold_steps * dt, levels)

    @property
    def n_u(self):
        return self.levels.shape[1]

    def __call__(self, t):
        # small slack so grid times k*dt land on the intended segment
        k = np.searchsorted(self.breaks, t * (1 + 1e-12) + 1e-12, side="right") - 1
        return self.levels[max(k, 0)]


def _signal_fn(input_signal, n_u):
    if input_signal is None:
        zero = np.zeros(n_u)
        return lambda t: zero
    if callable(input_signal):
        return input_signal
    u = np.atleast_1d(np.asarray(input_signal, dtype=float))
    return lambda t: u


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    derivs: np.ndarray

    def __len__(self):
        return len(self.times)


def _rk4_step(plant, x, u, dt):
    k1 = eval_rhs(plant, x, u)
    k2 = eval_rhs(plant, x + 0.5 * dt * k1, u)
    k3 = eval_rhs(plant, x + 0.5 * dt * k2, u)
    k4 = eval_rhs(plant, x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def n_steps_for(dt, t_end):
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(t_end / dt))
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a positive multiple of dt={dt}")
    return n


def integrate(plant, x0, input_signal=None, dt=0.01, t_end=1.0):
    """Fixed-step classical RK4 rollout with the input held over each step.

    Returns a :class:`Trajectory` with ``round(t_end/dt) + 1`` nodes. Raises
    :class:`DivergenceError` when the state stops being finite.
    """
    n = n_steps_for(dt, t_end)
    u_of_t = _signal_fn(input_signal, plant.n_u)
    x = _as_vector(x0, plant.n_x, "x0").copy()
    times = np.arange(n + 1) * dt
    states = np.empty((n + 1, plant.n_x))
    inputs = np.empty((n + 1, plant.n_u))
    derivs = np.empty((n + 1, plant.n_x))
    for k in range(n + 1):
        u = _as_vector(u_of_t(times[k]), plant.n_u, "input")
        states[k] = x
        inputs[k] = u
        try:
            derivs[k] = eval_rhs(plant, x, u)
            if k < n:
                x = _rk4_step(plant, x, u, dt)
        except DomainError as exc:
            raise DivergenceError(
                f"integration of {plant.name!r} failed after t={times[k]:g}: {exc}",
                last_time=times[k],
            ) from exc
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"non-finite state in {plant.name!r} after t={times[k]:g}",
                last_time=times[k],
            )
    return Trajectory(times, states, inputs, derivs)


@dataclass(frozen=True)
class Dataset:
    """Flattened ``(x, xdot, u)`` samples plus their bounding box.

    ``state_bounds`` and ``input_bounds`` are ``(n, 2)`` arrays of
    ``[min, max]`` rows.
    """

    times: np.ndarray
    traj_id: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    U: np.ndarray
    state_bounds: np.ndarray
    input_bounds: np.ndarray
    seed: int
    dt: float
    source: dict

    def __len__(self):
        return len(self.X)

    @property
    def plant_name(self):
        return self.source.get("plant")

    @property
    def n_x(self):
        return self.X.shape[1]

    @property
    def n_u(self):
        return self.U.shape[1]

    @classmethod
    def from_arrays(cls, X, Xdot, U, *, times=None, traj_id=None, seed=0, dt=0.0,
                    source=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = len(X)
        Xdot = np.asarray(Xdot, dtype=float).reshape(n, -1)
        U = np.asarray(U, dtype=float).reshape(n, -1) if U is not None else np.zeros((n, 0))
        times = np.zeros(n) if times is None else np.asarray(times, dtype=float)
        traj_id = np.zeros(n, dtype=int) if traj_id is None else np.asarray(traj_id, dtype=int)
        return cls(times, traj_id, X, Xdot, U, _box(X), _box(U), int(seed), float(dt),
                   dict(source or {}))

    def subset(self, mask):
        mask = np.asarray(mask)
        return Dataset.from_arrays(self.X[mask], self.Xdot[mask], self.U[mask],
                                   times=self.times[mask], traj_id=self.traj_id[mask],
                                   seed=self.seed, dt=self.dt, source=self.source)


def _box(A):
    if A.shape[1] == 0 or len(A) == 0:
        return np.zeros((A.shape[1], 2))
    return np.column_stack([A.min(axis=0), A.max(axis=0)])


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _check_box(box, n, what):
    box = np.asarray(box, dtype=float).reshape(n, 2) if n else np.zeros((0, 2))
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"{what} must have lo < hi in every dimension")
    return box


def generate_step_dataset(plant, x0_box, u_box, n_traj, steps_per_traj, hold_steps, dt,
                          seed, max_retries=20):
    """Random step-input rollouts flattened into a :class:`Dataset`.

    Each trajectory draws its initial state uniformly from ``x0_box`` and a
    sequence of input levels uniformly from ``u_box``, each level held for
    ``hold_steps`` RK4 steps. Trajectories use independent child streams of
    ``seed`` so the result does not depend on generation order. A diverging
    trajectory is redrawn up to ``max_retries`` times.
    """
    if min(n_traj, steps_per_traj, hold_steps) < 1:
        raise ValueError("counts must be >= 1")
    x0_box = _check_box(x0_box, plant.n_x, "x0_box")
    u_box = _check_box(u_box, plant.n_u, "u_box")
    n_levels = math.ceil(steps_per_traj / hold_steps)
    t_end = steps_per_traj * dt
    children = np.random.SeedSequence(seed).spawn(n_traj)
    trajs = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        for attempt in range(max_retries + 1):
            x0 = rng.uniform(x0_box[:, 0], x0_box[:, 1])
            levels = rng.uniform(u_box[:, 0], u_box[:, 1], size=(n_levels, plant.n_u))
            signal = StepSignal.from_grid(levels, hold_steps, dt)
            try:
                trajs.append(integrate(plant, x0, signal, dt, t_end))
                break
            except DivergenceError:
                if attempt == max_retries:
                    raise
    config = {
        "kind": "step", "x0_box": x0_box, "u_box": u_box, "n_traj": n_traj,
        "steps_per_traj": steps_per_traj, "hold_steps": hold_steps, "dt": dt,
    }
    return Dataset.from_arrays(
        np.concatenate([t.states for t in trajs]),
        np.concatenate([t.derivs for t in trajs]),
        np.concatenate([t.inputs for t in trajs]),
        times=np.concatenate([t.times for t in trajs]),
        traj_id=np.repeat(np.arange(n_traj), [len(t) for t in trajs]),
        seed=seed, dt=dt,
        source={"plant": plant.name, "config_hash": config_hash(config)},
    )


def generate_uniform_dataset(plant, x_box, u_box, n_samples, seed):
    """Independent uniform samples of ``(x, u)`` with exact derivatives.

    Used for plants such as ``x' = x^2`` whose trajectories leave any
    bounded box in finite time.
    """
    x_box = _check_box(x_box, plant.n_x, "x_box")
    u_box = _check_box(u_box, plant.n_u, "u_box")
    rng = np.random.default_rng(seed)
    X = rng.uniform(x_box[:, 0], x_box[:, 1], size=(n_samples, plant.n_x))
    U = rng.uniform(u_box[:, 0], u_box[:, 1], size=(n_samples, plant.n_u))
    Xdot = np.array([eval_rhs(plant, x, u) for x, u in zip(X, U)]).reshape(n_samples, plant.n_x)
    config = {"kind": "uniform", "x_box": x_box, "u_box": u_box, "n_samples": n_samples}
    return Dataset.from_arrays(
        X, Xdot, U, traj_id=np.arange(n_samples), seed=seed, dt=0.0,
        source={"plant": plant.name, "config_hash": config_hash(config)},
    )


def find_steady_state(plant, u_ss=None, x_guess=None, tol=1e-10, max_iter=100, jac=None):
    """Damped Newton solve of ``f(x) + B u_ss = 0``.

    ``jac`` may supply the analytic Jacobian of ``f``; otherwise a central
    finite-difference Jacobian is used.
    """
    u_ss = np.zeros(plant.n_u) if u_ss is None else _as_vector(u_ss, plant.n_u, "u_ss")
    x = _as_vector(np.zeros(plant.n_x) if x_guess is None else x_guess, plant.n_x, "x_guess")
    if not np.all(np.isfinite(x)):
        raise ValueError("x_guess must be finite")
    F = eval_rhs(plant, x, u_ss)
    res = np.max(np.abs(F))
    for _ in range(max_iter):
        if res < tol:
            return x
        J = jac(x) if jac is not None else fd_jacobian(lambda y: eval_rhs(plant, y, u_ss), x)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        alpha = 1.0
        while alpha > 1e-10:
            x_new = x + alpha * step
            try:
                F_new = eval_rhs(plant, x_new, u_ss)
            except DomainError:
                alpha *= 0.5
                continue
            if np.max(np.abs(F_new)) < res or alpha < 1e-3:
                break
            alpha *= 0.5
        else:
            break
        x, F = x_new, F_new
        res = np.max(np.abs(F))
    if res < tol:
        return x
    raise RootFindingError(f"steady state of {plant.name!r} not found; residual {res:.3e}",
                           residual=res)


def fd_jacobian(fun, x, rel_step=1e-6):
    """Central-difference Jacobian with step ``rel_step * (1 + |x_j|)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(len(x)):
        h = rel_step * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


# ---------------------------------------------------------------------------
# built-in plants


def motivating_plant():
    """``x' = x^2`` with no input."""
    return PlantSystem("motivating", 1, 0, lambda x: x * x, np.zeros((1, 0)))


def twostate_plant(mu=-0.1, lambda_sys=1.0):
    """``x1' = mu x1``, ``x2' = lambda (x2 - x1^2) + u``."""

    def f(x):
        return np.array([mu * x[0], lambda_sys * (x[1] - x[0] ** 2)])

    return PlantSystem("twostate", 2, 1, f, [[0.0], [1.0]],
                       {"mu": mu, "lambda_sys": lambda_sys})


CSTR_DEFAULTS = {
    "q": 100.0,        # L/min
    "V": 100.0,        # L
    "rho": 1000.0,     # g/L
    "Cp": 0.239,       # J/(g K)
    "dH_R": -5.0e4,    # J/mol
    "EA_over_R": 8750.0,  # K
    "k0": 7.2e10,      # 1/min
    "UA": 5.0e4,       # J/(min K)
    "T_i": 350.0,      # K
    "C_A": 0.5,        # mol/L
    "T_c_ss": 295.0,   # K, nominal coolant temperature
}


def cstr_plant(T_guess=315.0, **overrides):
    """Single-state reactor energy balance with coolant temperature as input.

    The input is the coolant temperature measured from its nominal value,
    ``u = T_c - T_c_ss``, so ``u = 0`` is the nominal operating point and the
    drift ``f`` vanishes at the steady state ``T_ss`` stored in ``params``.
    """
    unknown = set(overrides) - set(CSTR_DEFAULTS)
    if unknown:
        raise KeyError(f"unknown CSTR parameters: {sorted(unknown)}")
    p = {**CSTR_DEFAULTS, **overrides}
    flow = p["q"] / p["V"]
    heat = -p["dH_R"] / (p["rho"] * p["Cp"]) * p["k0"] * p["C_A"]
    cool = p["UA"] / (p["rho"] * p["Cp"] * p["V"])
    T_c_ss = p["T_c_ss"]

    def f(x):
        T = x[0]
        if not T > 0:
            raise DomainError(f"cstr: reactor temperature must be positive, got T={T}")
        with np.errstate(over="ignore"):
            arrhenius = math.exp(-p["EA_over_R"] / T) * heat
        if not math.isfinite(arrhenius):
            raise DomainError(f"cstr: Arrhenius term overflowed at T={T}")
        return np.array([flow * (p["T_i"] - T) + arrhenius + cool * (T_c_ss - T)])

    plant = PlantSystem("cstr", 1, 1, f, [[cool]], p)
    T_ss = find_steady_state(plant, [0.0], [T_guess])[0]
    return PlantSystem("cstr", 1, 1, f, [[cool]], {**p, "T_ss": float(T_ss)})


def coolant_temperature(plant, u):
    """Absolute coolant temperature for a CSTR input ``u``."""
    return np.asarray(u, dtype=float) + plant.params["T_c_ss"]


_BUILTINS = {
    "motivating": motivating_plant,
    "twostate": twostate_plant,
    "cstr": cstr_plant,
}


def available_plants():
    return sorted(_BUILTINS)


def builtin_plant(name, **params):
    """Look up a benchmark plant by name, optionally overriding parameters."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise LookupError(
            f"unknown plant {name!r}; available: {', '.join(available_plants())}"
        ) from None
    return factory(**params)


def steady_input(plant):
    """Nominal operating input of a builtin plant (zero for all of them)."""
    return np.zeros(plant.n_u)


def steady_state(plant):
    if plant.name == "cstr":
        return np.array([plant.params["T_ss"]])
    return np.zeros(plant.n_x)
