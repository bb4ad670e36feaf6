"""Limited-memory BFGS with backtracking line search.

Deterministic and monotone: every accepted step satisfies the Armijo
sufficient-decrease condition, so the objective never increases.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    status: str
    history: list = field(default_factory=list)

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad))


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs(fun_grad, x0, gtol=1e-8, max_iter=2000, memory=10, c1=1e-4, shrink=0.5,
          max_backtracks=50, callback=None):
    """Minimize ``f`` given ``fun_grad(x) -> (f, grad)``.

    Stops when ``||grad||_2 <= gtol``, after ``max_iter`` iterations, or when
    no step along a descent direction decreases ``f`` (status
    ``"line search stalled"``). ``history`` holds ``(iteration, f,
    ||grad||)`` for the start point and every accepted step.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    nfev = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("objective is not finite at the starting point")
    pairs = deque(maxlen=memory)
    history = [(0, float(f), float(np.linalg.norm(g)))]
    status = "max iterations"
    it = 0
    while it < max_iter:
        gnorm = np.linalg.norm(g)
        if gnorm <= gtol:
            status = "gradient tolerance"
            break
        d = _two_loop(g, pairs)
        slope = g @ d
        if not slope < 0:
            pairs.clear()
            d = -g
            slope = -gnorm * gnorm
        alpha = 1.0 if pairs else min(1.0, 1.0 / gnorm)
        accepted = False
        for _ in range(max_backtracks):
            x_new = x + alpha * d
            f_new, g_new = fun_grad(x_new)
            nfev += 1
            if np.isfinite(f_new) and f_new <= f + c1 * alpha * slope:
                accepted = True
                break
            alpha *= shrink
        if not accepted:
            if pairs:
                # stale curvature; retry once from steepest descent
                pairs.clear()
                continue
            status = "line search stalled"
            break
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        it += 1
        history.append((it, float(f), float(np.linalg.norm(g))))
        if callback is not None:
            callback(it, x, f, g)
    return MinimizeResult(x, float(f), g, it, nfev, status, history)
