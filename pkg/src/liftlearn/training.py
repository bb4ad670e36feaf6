"""Chain-rule residual objective and the decaying-decoder-weight training loop.

The objective over a dataset of ``(x, xdot, u)`` samples is::

    J = sum_i ||J_N(x_i) (xdot_i - B u_i) - A N(x_i)||^2
        + lambda * sum_i ||x_i - D(N(x_i))||^2

``J_N(x) xdot - J_N(x) B u`` is evaluated as a single Jacobian-vector
product along ``xdot - B u``.
"""

import json
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dynamics import config_hash
from .errors import (ConfigError, DegenerateSolutionError, DimensionError, EvaluationError,
                     OptimizerError)
from .liftedmodel import LiftedModel
from .liftnet import (LiftNet, backward_tangent, decoder_backward, decoder_forward,
                      forward_tangent, init_params)
from .optim import lbfgs

log = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "Theta",
    "residual",
    "objective",
    "objective_terms",
    "gradient",
    "train",
    "fit_A_least_squares",
    "reconstruction_error",
    "LOG_HEADER",
]

LOG_HEADER = ["outer_iter", "inner_iters", "lambda", "objective", "residual_term",
              "decoder_term", "grad_norm"]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the outer loop and the inner minimizer.

    ``theta_tol`` is relative: the loop stops once consecutive accepted
    parameter vectors differ by less than ``theta_tol * (1 + ||Theta||)``.
    ``recon_tol`` bounds the mean reconstruction error of the returned
    model; ``None`` means 5% of the RMS spread of the training states.
    """

    lambda_initial: float = 10.0
    gamma: float = 2.0
    theta_tol: float = 1e-4
    max_outer_iters: int = 12
    inner_tol: float = 1e-8
    max_inner_iters: int = 2000
    seed: int = 0
    recon_tol: float = None
    normalize: bool = True
    lbfgs_memory: int = 10
    max_init_retries: int = 5

    def __post_init__(self):
        if not self.lambda_initial > 0:
            raise ConfigError("lambda_initial must be > 0")
        if not self.gamma > 1:
            raise ConfigError("gamma must be > 1")
        if not (self.theta_tol > 0 and self.inner_tol > 0):
            raise ConfigError("tolerances must be > 0")
        if self.max_outer_iters < 1 or self.max_inner_iters < 0:
            raise ConfigError("iteration limits must be positive")
        if self.recon_tol is not None and not self.recon_tol > 0:
            raise ConfigError("recon_tol must be > 0")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown training keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Theta:
    """All trainable quantities: lifting ``p``, linear map ``A``, decoder ``q``."""

    p: np.ndarray
    A: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("p", "A", "q"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise EvaluationError(f"Theta.{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    def flat(self):
        return np.concatenate([self.p.ravel(), self.A.ravel(), self.q.ravel()])

    @classmethod
    def unflat(cls, v, n_p, n_z, n_q):
        return cls(v[:n_p], v[n_p:n_p + n_z * n_z].reshape(n_z, n_z), v[n_p + n_z * n_z:])


# ---------------------------------------------------------------------------
# residual and objective


def _drift_samples(X, Xdot, U, plant_B):
    if U is None or U.shape[1] == 0:
        return Xdot
    B = np.asarray(plant_B, dtype=float).reshape(X.shape[1], -1)
    if B.shape[1] != U.shape[1]:
        raise DimensionError(f"plant_B has {B.shape[1]} columns but samples have "
                             f"{U.shape[1]} inputs")
    return Xdot - U @ B.T


def residual(lifting, A, plant_B, x, xdot, u=None):
    """``J_N(x) xdot - A N(x) - J_N(x) B u`` for one sample or a batch."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) <= 1
    Xdot = np.asarray(xdot, dtype=float).reshape(X.shape)
    U = None if u is None else np.asarray(u, dtype=float).reshape(len(X), -1)
    V = _drift_samples(X, Xdot, U, plant_B)
    R = lifting.jvp(X, V) - lifting.lift(X) @ np.asarray(A, dtype=float).T
    bad = ~np.all(np.isfinite(R), axis=1)
    if bad.any():
        raise EvaluationError(f"non-finite residual at sample {int(np.argmax(bad))}")
    return R[0] if single else R


def _theta_parts(lifting, theta):
    if isinstance(lifting, LiftNet):
        return lifting.arch, theta.p, theta.q
    return None, None, None


def objective_terms(lifting, theta, dataset, lam, plant_B=None):
    """Return ``(total, residual_term, decoder_term)``.

    ``lifting`` supplies the architecture (its own ``p``/``q`` are ignored
    in favour of ``theta``) or is an analytic lifting, in which case only
    ``theta.A`` is used.
    """
    V = _drift_samples(dataset.X, dataset.Xdot, dataset.U, plant_B)
    arch, p, q = _theta_parts(lifting, theta)
    if arch is not None:
        Z, dZ, _ = forward_tangent(arch, p, dataset.X, V)
        X_hat, _ = decoder_forward(arch, q, Z)
    else:
        Z, dZ = lifting.lift(dataset.X), lifting.jvp(dataset.X, V)
        X_hat = Z[:, :lifting.n_x] if lifting.identity_prefix else lifting.decode(Z)
    R = dZ - Z @ theta.A.T
    E = dataset.X - X_hat
    res_rows = np.sum(R * R, axis=1)
    dec_rows = np.sum(E * E, axis=1)
    if not (np.all(np.isfinite(res_rows)) and np.all(np.isfinite(dec_rows))):
        i = int(np.argmax(~np.isfinite(res_rows + dec_rows)))
        raise EvaluationError(f"non-finite objective contribution at sample {i}")
    res = float(np.sum(res_rows))
    dec = float(np.sum(dec_rows))
    return res + lam * dec, res, dec


def objective(lifting, theta, dataset, lam, plant_B=None):
    """Scalar training objective (residual term plus weighted decoder term)."""
    return objective_terms(lifting, theta, dataset, lam, plant_B)[0]


def _value_and_grad(arch, theta_flat, X, V, lam, n_z):
    n_p, n_q = arch.n_p, arch.n_q
    p = theta_flat[:n_p]
    A = theta_flat[n_p:n_p + n_z * n_z].reshape(n_z, n_z)
    q = theta_flat[n_p + n_z * n_z:]
    Z, dZ, cache = forward_tangent(arch, p, X, V)
    R = dZ - Z @ A.T
    X_hat, dcache = decoder_forward(arch, q, Z)
    E = X - X_hat
    res = float(np.sum(R * R))
    dec = float(np.sum(E * E))
    f = res + lam * dec
    if not np.isfinite(f):
        return np.inf, np.full_like(theta_flat, np.nan), res, dec
    gA = -2.0 * R.T @ Z
    g_dz = 2.0 * R
    g_z = -2.0 * R @ A
    if lam != 0.0 and arch.decoder == "learned":
        gq, g_z_dec = decoder_backward(arch, q, dcache, -2.0 * lam * E)
        g_z = g_z + g_z_dec
    else:
        gq = np.zeros(n_q)
    gp = backward_tangent(arch, p, cache, g_z, g_dz)
    return f, np.concatenate([gp, gA.ravel(), gq]), res, dec


def gradient(lifting, theta, dataset, lam, plant_B=None):
    """Exact gradient of :func:`objective` w.r.t. the flat ``(p, A, q)`` vector."""
    V = _drift_samples(dataset.X, dataset.Xdot, dataset.U, plant_B)
    arch, _, _ = _theta_parts(lifting, theta)
    if arch is None:
        Z, dZ = lifting.lift(dataset.X), lifting.jvp(dataset.X, V)
        R = dZ - Z @ theta.A.T
        return (-2.0 * R.T @ Z).ravel()
    f, g, _, _ = _value_and_grad(arch, theta.flat(), dataset.X, V, lam, arch.n_z)
    if not np.isfinite(f):
        raise EvaluationError("objective is not finite")
    return g


def fit_A_least_squares(lifting, dataset, plant_B=None):
    """Optimal ``A`` for a fixed lifting (linear least squares in ``A``)."""
    V = _drift_samples(dataset.X, dataset.Xdot, dataset.U, plant_B)
    Z = lifting.lift(dataset.X)
    dZ = lifting.jvp(dataset.X, V)
    At, *_ = np.linalg.lstsq(Z, dZ, rcond=None)
    return At.T


def reconstruction_error(lifting, X):
    """Mean Euclidean reconstruction error ``||x - D(N(x))||``."""
    Z = lifting.lift(X)
    X_hat = Z[:, :lifting.n_x] if lifting.identity_prefix else lifting.decode(Z)
    return float(np.mean(np.linalg.norm(X - X_hat, axis=1)))


# ---------------------------------------------------------------------------
# training loop


def _default_recon_tol(X):
    spread = np.sqrt(np.sum(np.var(X, axis=0)))
    return 0.05 * max(spread, 1e-12)


def _check_degenerate(net, A, X, recon_tol):
    err = reconstruction_error(net, X)
    if err > recon_tol:
        raise DegenerateSolutionError(
            f"mean reconstruction error {err:.4g} exceeds {recon_tol:.4g}; "
            "the lifting does not retain the state (trivial solution)"
        )
    Z = net.lift(X)
    free = Z[:, net.n_x:] if net.identity_prefix else Z
    if free.size and np.all(np.std(free, axis=0) < 1e-8 * (1 + np.abs(free).max())):
        raise DegenerateSolutionError("lifted coordinates collapsed to constants")
    if np.linalg.norm(net.p) < 1e-8 and np.linalg.norm(A) < 1e-8:
        raise DegenerateSolutionError("trained p and A are both ~0 (trivial minimizer)")
    return err


def train(plant_B, dataset, arch, cfg=None, *, plant="", disable_decoder_term=False,
          log_rows=None):
    """Learn a lifting and ``A`` from ``dataset`` with decaying decoder weight.

    Returns a :class:`~liftlearn.liftedmodel.LiftedModel` whose ``history``
    holds one log row (see ``LOG_HEADER``) per accepted inner iteration.
    ``disable_decoder_term`` holds the decoder weight at zero throughout; it
    exists to demonstrate the trivial-minimizer failure and is otherwise
    never what you want.
    """
    cfg = cfg or TrainConfig()
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if dataset.n_x != arch.n_x:
        raise DimensionError(f"dataset has n_x={dataset.n_x}, architecture expects {arch.n_x}")
    if cfg.normalize:
        arch = arch.with_normalization(dataset.state_bounds)
    X = dataset.X
    V = _drift_samples(X, dataset.Xdot, dataset.U, plant_B)
    n_z = arch.n_z
    lam = 0.0 if disable_decoder_term else cfg.lambda_initial

    for attempt in range(cfg.max_init_retries + 1):
        net0, A0 = init_params(arch, cfg.seed if attempt == 0 else [cfg.seed, attempt])
        theta = np.concatenate([net0.p, A0.ravel(), net0.q])
        f0, _, _, _ = _value_and_grad(arch, theta, X, V, lam, n_z)
        if np.isfinite(f0):
            break
        log.warning("non-finite initial objective; redrawing parameters (attempt %d)", attempt)
    else:
        raise EvaluationError("objective non-finite at every initialization")

    rows = [] if log_rows is None else log_rows
    for outer in range(1, cfg.max_outer_iters + 1):
        lam_k = lam
        last = {}

        def fg(v, lam_k=lam_k, last=last):
            f, g, res, dec = _value_and_grad(arch, v, X, V, lam_k, n_z)
            last["terms"] = (res, dec)
            return f, g

        def record(it, v, f, g, outer=outer, lam_k=lam_k, last=last):
            rows.append([outer, it, lam_k, f, *last["terms"], float(np.linalg.norm(g))])

        record(0, theta, *fg(theta))
        try:
            result = lbfgs(fg, theta, gtol=cfg.inner_tol, max_iter=cfg.max_inner_iters,
                           memory=cfg.lbfgs_memory, callback=record)
        except FloatingPointError as exc:
            raise OptimizerError(f"inner minimization failed in outer iteration {outer}: {exc}",
                                 {"outer_iter": outer, "lambda": lam_k}) from exc
        log.info("outer %d: lambda=%.4g f=%.6g |g|=%.3g iters=%d (%s)", outer, lam_k,
                 result.fun, result.grad_norm, result.nit, result.status)
        step = np.linalg.norm(result.x - theta)
        theta = result.x
        if not disable_decoder_term:
            lam = lam / cfg.gamma
        if step < cfg.theta_tol * (1.0 + np.linalg.norm(theta)):
            break

    th = Theta.unflat(theta, arch.n_p, n_z, arch.n_q)
    net = LiftNet(arch, th.p, th.q)
    recon_tol = cfg.recon_tol if cfg.recon_tol is not None else _default_recon_tol(X)
    _check_degenerate(net, th.A, X, recon_tol)
    provenance = config_hash({"train": cfg.to_dict(), "arch": arch.to_dict(),
                              "dataset": dataset.source, "seed": dataset.seed})
    return LiftedModel(net, th.A, np.asarray(plant_B, dtype=float).reshape(arch.n_x, -1),
                       dataset.state_bounds, dataset.input_bounds, provenance,
                       plant or dataset.plant_name or "", history=rows)

