"""Smooth lifting network ``z = N(x; p)``, its decoder and exact Jacobians.

The network is a dense tanh-style MLP acting on an affinely normalized
state. Jacobians are propagated forward alongside the values (one tangent
per input direction), and :func:`forward_tangent`/:func:`backward_tangent`
expose the same pass with a reverse sweep through both the values and the
tangents, which is what training needs to differentiate ``J_N(x) v``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EvaluationError

__all__ = [
    "NetArchitecture",
    "LiftNet",
    "AnalyticLifting",
    "lift",
    "jacobian",
    "jvp",
    "decode",
    "init_params",
    "param_count",
    "twostate_exact_lifting",
    "motivating_exact_lifting",
    "identity_lifting",
]


# ---------------------------------------------------------------------------
# activations: value, first and second derivative


def _tanh(a):
    t = np.tanh(a)
    d1 = 1.0 - t * t
    return t, d1, -2.0 * t * d1


def _sigmoid(a):
    s = 0.5 * (1.0 + np.tanh(0.5 * a))
    d1 = s * (1.0 - s)
    return s, d1, d1 * (1.0 - 2.0 * s)


def _softplus(a):
    s = 0.5 * (1.0 + np.tanh(0.5 * a))
    return np.logaddexp(0.0, a), s, s * (1.0 - s)


def _identity(a):
    return a, np.ones_like(a), np.zeros_like(a)


ACTIVATIONS = {
    "tanh": _tanh,
    "sigmoid": _sigmoid,
    "softplus": _softplus,
    "identity": _identity,
}

_NON_SMOOTH = {"relu", "leaky_relu", "relu6", "elu", "hardtanh", "prelu", "abs", "step"}


@dataclass(frozen=True)
class NetArchitecture:
    """Shape of a lifting network.

    ``x_center``/``x_scale`` normalize the state before the first layer
    (``(x - center) / scale``); they are part of the architecture, not
    trainable. ``decoder`` is ``"truncate"`` (identity-prefix models only)
    or ``"learned"``; ``None`` picks truncation whenever possible.
    """

    n_x: int
    n_z: int
    hidden: tuple = (32, 32)
    activation: str = "tanh"
    identity_prefix: bool = True
    x_center: tuple = None
    x_scale: tuple = None
    decoder: str = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.n_x < 1:
            raise ValueError("n_x must be >= 1")
        if self.n_z < self.n_x:
            raise ValueError(f"lifting cannot reduce dimension: n_z={self.n_z} < n_x={self.n_x}")
        if self.activation in _NON_SMOOTH:
            raise ValueError(
                f"activation {self.activation!r} is not continuously differentiable; "
                "the residual objective needs smooth Jacobians"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; "
                             f"choose from {sorted(ACTIVATIONS)}")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")
        center = (0.0,) * self.n_x if self.x_center is None else tuple(map(float, self.x_center))
        scale = (1.0,) * self.n_x if self.x_scale is None else tuple(map(float, self.x_scale))
        if len(center) != self.n_x or len(scale) != self.n_x:
            raise ValueError("x_center and x_scale need n_x entries")
        if any(not s > 0 for s in scale):
            raise ValueError("x_scale entries must be positive")
        object.__setattr__(self, "x_center", center)
        object.__setattr__(self, "x_scale", scale)
        dec = self.decoder
        if dec is None:
            dec = "truncate" if self.identity_prefix else "learned"
        if dec not in ("truncate", "learned"):
            raise ValueError(f"decoder must be 'truncate' or 'learned', got {dec!r}")
        if dec == "truncate" and not self.identity_prefix:
            raise ValueError("a truncation decoder requires identity_prefix")
        object.__setattr__(self, "decoder", dec)

    @property
    def n_free(self):
        """Number of network-generated outputs."""
        return self.n_z - self.n_x if self.identity_prefix else self.n_z

    @property
    def lift_sizes(self):
        return (self.n_x, *self.hidden, self.n_free)

    @property
    def decoder_sizes(self):
        if self.decoder == "truncate":
            return ()
        return (self.n_z, *reversed(self.hidden), self.n_x)

    @property
    def n_p(self):
        return param_count(self.lift_sizes) if self.n_free else 0

    @property
    def n_q(self):
        return param_count(self.decoder_sizes)

    def with_normalization(self, bounds):
        """Copy of this architecture normalized to a ``(n_x, 2)`` box."""
        bounds = np.asarray(bounds, dtype=float)
        center = 0.5 * (bounds[:, 0] + bounds[:, 1])
        scale = np.maximum(0.5 * (bounds[:, 1] - bounds[:, 0]), 1e-12)
        return NetArchitecture(self.n_x, self.n_z, self.hidden, self.activation,
                               self.identity_prefix, tuple(center), tuple(scale),
                               self.decoder)

    def to_dict(self):
        return {
            "n_x": self.n_x, "n_z": self.n_z, "hidden": list(self.hidden),
            "activation": self.activation, "identity_prefix": self.identity_prefix,
            "x_center": list(self.x_center), "x_scale": list(self.x_scale),
            "decoder": self.decoder,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_x"], d["n_z"], tuple(d.get("hidden", (32, 32))),
                   d.get("activation", "tanh"), bool(d.get("identity_prefix", True)),
                   d.get("x_center"), d.get("x_scale"), d.get("decoder"))


def param_count(sizes):
    """Weights plus biases of a dense stack with layer widths ``sizes``."""
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def _unpack(theta, sizes):
    layers = []
    i = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = theta[i:i + fan_in * fan_out].reshape(fan_out, fan_in)
        i += fan_in * fan_out
        b = theta[i:i + fan_out]
        i += fan_out
        layers.append((W, b))
    return layers


# ---------------------------------------------------------------------------
# raw passes on flat parameter vectors


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise EvaluationError("non-finite value in network evaluation")


def _mlp_tangent(theta, sizes, act, H, D):
    """Dense pass carrying tangents ``D`` (shape ``(..., n_in)``) along."""
    layers = _unpack(theta, sizes)
    cache = []
    for W, b in layers[:-1]:
        a = H @ W.T + b
        da = D @ W.T
        h, s1, s2 = act(a)
        cache.append((H, D, da, s1, s2))
        H, D = h, s1 * da
    W, b = layers[-1]
    cache.append((H, D))
    return H @ W.T + b, D @ W.T, cache


def _mlp_tangent_backward(theta, sizes, cache, g_out, g_dout):
    layers = _unpack(theta, sizes)
    grads = []
    W, _ = layers[-1]
    H, D = cache[-1]
    grads.append((g_out.T @ H + g_dout.T @ D, g_out.sum(axis=0)))
    g_h, g_d = g_out @ W, g_dout @ W
    for (W, _), (H, D, da, s1, s2) in zip(reversed(layers[:-1]), reversed(cache[:-1])):
        g_a = g_h * s1 + g_d * s2 * da
        g_da = g_d * s1
        grads.append((g_a.T @ H + g_da.T @ D, g_a.sum(axis=0)))
        g_h, g_d = g_a @ W, g_da @ W
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return np.concatenate(flat), g_h


def _mlp(theta, sizes, act, H):
    layers = _unpack(theta, sizes)
    cache = []
    for W, b in layers[:-1]:
        h, s1, _ = act(H @ W.T + b)
        cache.append((H, s1))
        H = h
    W, b = layers[-1]
    cache.append((H, None))
    return H @ W.T + b, cache


def _mlp_backward(theta, sizes, cache, g_out):
    layers = _unpack(theta, sizes)
    grads = []
    for (W, _), (H, s1) in zip(reversed(layers), reversed(cache)):
        if s1 is not None:
            g_out = g_out * s1
        grads.append((g_out.T @ H, g_out.sum(axis=0)))
        g_out = g_out @ W
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return np.concatenate(flat), g_out


def forward_tangent(arch, p, X, V):
    """Batched ``(N(x), J_N(x) v)`` for rows of ``X`` and ``V``.

    Returns ``(Z, dZ, cache)``; feed ``cache`` to :func:`backward_tangent`.
    """
    center = np.asarray(arch.x_center)
    scale = np.asarray(arch.x_scale)
    Xn = (X - center) / scale
    Vn = V / scale
    act = ACTIVATIONS[arch.activation]
    if arch.n_free:
        O, dO, cache = _mlp_tangent(p, arch.lift_sizes, act, Xn, Vn)
    else:
        O = np.zeros((len(X), 0))
        dO, cache = O, None
    if arch.identity_prefix:
        return np.hstack([X, O]), np.hstack([V, dO]), cache
    return O, dO, cache


def backward_tangent(arch, p, cache, g_z, g_dz):
    """Gradient w.r.t. ``p`` of ``sum(g_z * Z) + sum(g_dz * dZ)``."""
    if not arch.n_free:
        return np.zeros(0)
    k = arch.n_x if arch.identity_prefix else 0
    gp, _ = _mlp_tangent_backward(p, arch.lift_sizes, cache, g_z[:, k:], g_dz[:, k:])
    return gp


def _decoder_scaling(arch):
    zc = np.zeros(arch.n_z)
    zs = np.ones(arch.n_z)
    if arch.identity_prefix:
        zc[:arch.n_x] = arch.x_center
        zs[:arch.n_x] = arch.x_scale
    return zc, zs


def decoder_forward(arch, q, Z):
    """Batched decoder pass returning ``(X_hat, cache)``."""
    if arch.decoder == "truncate":
        return Z[:, :arch.n_x].copy(), None
    zc, zs = _decoder_scaling(arch)
    O, cache = _mlp(q, arch.decoder_sizes, ACTIVATIONS[arch.activation], (Z - zc) / zs)
    return np.asarray(arch.x_center) + np.asarray(arch.x_scale) * O, cache


def decoder_backward(arch, q, cache, g_xhat):
    """Return ``(grad_q, grad_Z)`` of ``sum(g_xhat * X_hat)``."""
    if arch.decoder == "truncate":
        g_z = np.zeros((len(g_xhat), arch.n_z))
        g_z[:, :arch.n_x] = g_xhat
        return np.zeros(0), g_z
    _, zs = _decoder_scaling(arch)
    gq, g_in = _mlp_backward(q, arch.decoder_sizes, cache, g_xhat * np.asarray(arch.x_scale))
    return gq, g_in / zs


# ---------------------------------------------------------------------------
# public objects


@dataclass(frozen=True)
class LiftNet:
    """Trained or initial lifting network with its decoder parameters."""

    arch: NetArchitecture
    p: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        q = np.array(self.q, dtype=float).reshape(-1)
        if p.size != self.arch.n_p:
            raise DimensionError(f"expected {self.arch.n_p} lifting parameters, got {p.size}")
        if q.size != self.arch.n_q:
            raise DimensionError(f"expected {self.arch.n_q} decoder parameters, got {q.size}")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    n_x = property(lambda self: self.arch.n_x)
    n_z = property(lambda self: self.arch.n_z)
    identity_prefix = property(lambda self: self.arch.identity_prefix)

    def lift(self, x):
        X, single = _batch(x, self.n_x)
        _check_finite(X, self.p)
        Z, _, _ = forward_tangent(self.arch, self.p, X, np.zeros_like(X))
        _check_finite(Z)
        return Z[0] if single else Z

    def jvp(self, x, v):
        """``J_N(x) v`` for matching rows of ``x`` and ``v``."""
        X, single = _batch(x, self.n_x)
        V, _ = _batch(v, self.n_x)
        _check_finite(X, V, self.p)
        _, dZ, _ = forward_tangent(self.arch, self.p, X, np.broadcast_to(V, X.shape))
        _check_finite(dZ)
        return dZ[0] if single else dZ

    def jacobian(self, x):
        """Exact ``(n_z, n_x)`` Jacobian, or ``(N, n_z, n_x)`` for a batch."""
        X, single = _batch(x, self.n_x)
        _check_finite(X, self.p)
        cols = []
        for j in range(self.n_x):
            E = np.zeros_like(X)
            E[:, j] = 1.0
            _, dZ, _ = forward_tangent(self.arch, self.p, X, E)
            cols.append(dZ)
        J = np.stack(cols, axis=-1)
        _check_finite(J)
        return J[0] if single else J

    def decode(self, z):
        Z, single = _batch(z, self.n_z)
        _check_finite(Z, self.q)
        Xh, _ = decoder_forward(self.arch, self.q, Z)
        _check_finite(Xh)
        return Xh[0] if single else Xh

    def to_dict(self):
        return {"arch": self.arch.to_dict(), "p": self.p.tolist(), "q": self.q.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(NetArchitecture.from_dict(d["arch"]), np.asarray(d["p"], dtype=float),
                   np.asarray(d.get("q", []), dtype=float))


def _batch(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    X = X.reshape(1, -1) if single else X
    if X.shape[1] != n:
        raise DimensionError(f"expected vectors of length {n}, got shape {np.shape(x)}")
    return X, single


def lift(net, x):
    return net.lift(x)


def jacobian(net, x):
    return net.jacobian(x)


def jvp(net, x, v):
    return net.jvp(x, v)


def decode(net, z):
    return net.decode(z)


def init_params(arch, seed):
    """Draw ``(net, A0)`` with every entry i.i.d. standard normal."""
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(arch.n_p)
    A = rng.standard_normal((arch.n_z, arch.n_z))
    q = rng.standard_normal(arch.n_q)
    return LiftNet(arch, p, q), A


# ---------------------------------------------------------------------------
# closed-form liftings sharing the LiftNet interface


class AnalyticLifting:
    """Hand-written lifting exposing ``lift``/``jacobian``/``jvp``/``decode``.

    ``fun(X)`` and ``jac(X)`` act on ``(N, n_x)`` batches and return
    ``(N, n_z)`` and ``(N, n_z, n_x)`` arrays. ``inverse`` maps a batch of
    lifted states back to states; identity-prefix liftings default to
    truncation.
    """

    def __init__(self, name, n_x, n_z, fun, jac, inverse=None, identity_prefix=False):
        self.name = name
        self.n_x = n_x
        self.n_z = n_z
        self._fun = fun
        self._jac = jac
        self.identity_prefix = identity_prefix
        if inverse is None and identity_prefix:
            inverse = lambda Z: Z[:, :n_x]  # noqa: E731
        self._inverse = inverse

    def lift(self, x):
        X, single = _batch(x, self.n_x)
        _check_finite(X)
        Z = np.asarray(self._fun(X), dtype=float)
        _check_finite(Z)
        return Z[0] if single else Z

    def jacobian(self, x):
        X, single = _batch(x, self.n_x)
        _check_finite(X)
        J = np.asarray(self._jac(X), dtype=float)
        _check_finite(J)
        return J[0] if single else J

    def jvp(self, x, v):
        X, single = _batch(x, self.n_x)
        V, _ = _batch(v, self.n_x)
        out = np.einsum("nij,nj->ni", self.jacobian(X), np.broadcast_to(V, X.shape))
        return out[0] if single else out

    def decode(self, z):
        if self._inverse is None:
            raise NotImplementedError(f"lifting {self.name!r} has no inverse")
        Z, single = _batch(z, self.n_z)
        Xh = np.asarray(self._inverse(Z), dtype=float)
        return Xh[0] if single else Xh

    def __repr__(self):
        return f"AnalyticLifting({self.name!r}, n_x={self.n_x}, n_z={self.n_z})"


def twostate_exact_lifting():
    """``(x1, x2, x1^2)``, which makes the two-state plant exactly linear."""

    def fun(X):
        return np.column_stack([X[:, 0], X[:, 1], X[:, 0] ** 2])

    def jac(X):
        J = np.zeros((len(X), 3, 2))
        J[:, 0, 0] = 1.0
        J[:, 1, 1] = 1.0
        J[:, 2, 0] = 2.0 * X[:, 0]
        return J

    return AnalyticLifting("twostate_exact", 2, 3, fun, jac, identity_prefix=True)


def twostate_exact_A(mu=-0.1, lambda_sys=1.0):
    return np.array([[mu, 0.0, 0.0],
                     [0.0, lambda_sys, -lambda_sys],
                     [0.0, 0.0, 2.0 * mu]])


def motivating_exact_lifting():
    """``z = exp(-1/x)`` for ``x > 0``; ``z' = z`` along ``x' = x^2``."""

    def fun(X):
        return np.exp(-1.0 / X)

    def jac(X):
        return (np.exp(-1.0 / X) / X ** 2)[:, :, None]

    def inverse(Z):
        return -1.0 / np.log(Z)

    return AnalyticLifting("motivating_exact", 1, 1, fun, jac, inverse)


def identity_lifting(n_x):
    """``z = x``; reduces state-dependent Riccati control to plain LQR."""
    eye = np.eye(n_x)
    return AnalyticLifting("identity", n_x, n_x, lambda X: X.copy(),
                           lambda X: np.broadcast_to(eye, (len(X), n_x, n_x)).copy(),
                           identity_prefix=True)


def lipschitz_estimate(net, box, n=256, seed=0):
    """Largest Jacobian spectral norm over random points of ``box``."""
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.uniform(box[:, 0], box[:, 1], size=(n, len(box)))
    return max(float(np.linalg.norm(J, 2)) for J in net.jacobian(X))

