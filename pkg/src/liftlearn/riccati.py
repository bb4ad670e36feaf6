"""Continuous algebraic Riccati equation, LQR and state-dependent gains."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, RiccatiNumericalError, SolvabilityError

__all__ = [
    "LqrWeights",
    "GainResult",
    "solve_care",
    "care_residual",
    "lqr_gain",
    "sdre_gain",
    "steady_state_input",
]


@dataclass(frozen=True)
class LqrWeights:
    """Quadratic cost weights; ``Q`` symmetric PSD, ``R`` symmetric PD."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise DimensionError(f"{name} must be square, got {M.shape}")
            if not np.allclose(M, M.T, atol=1e-12 * (1 + np.abs(M).max())):
                raise ValueError(f"{name} must be symmetric")
        tol = 1e-12 * (1 + np.abs(Q).max())
        if Q.size and np.linalg.eigvalsh(Q).min() < -tol:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def diag(cls, q_diag, r_diag):
        return cls(np.diag(np.atleast_1d(q_diag).astype(float)),
                   np.diag(np.atleast_1d(r_diag).astype(float)))

    @classmethod
    def identity(cls, n_z, n_u):
        return cls(np.eye(n_z), np.eye(n_u))


@dataclass(frozen=True)
class GainResult:
    K: np.ndarray
    P: np.ndarray
    closed_loop_eigs: np.ndarray

    @property
    def norm(self):
        return float(np.linalg.norm(self.K))


def care_residual(A, B, Q, R, P):
    """``A'P + PA - P B R^-1 B' P + Q``."""
    return A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q


def _check_shapes(A, B, w):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    if w.Q.shape != (n, n) or w.R.shape != (B.shape[1], B.shape[1]):
        raise DimensionError(f"weights {w.Q.shape}/{w.R.shape} do not match A {A.shape}, "
                             f"B {B.shape}")
    return A, B


def solve_care(A, B, w):
    """Stabilizing solution of ``A'P + PA - P B R^-1 B' P + Q = 0``.

    The stable invariant subspace of the Hamiltonian matrix is taken from an
    ordered real Schur form; the result is then polished with one Newton
    (Kleinman) step, kept only if it lowers the residual.
    """
    A, B = _check_shapes(A, B, w)
    Q, R = w.Q, w.R
    n = A.shape[0]
    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    scale = 1.0 + np.abs(H).max()
    T, U, sdim = sla.schur(H, output="real", sort="lhp")
    eigs = np.linalg.eigvals(H)
    if sdim != n or np.min(np.abs(eigs.real)) < 1e-11 * scale:
        raise SolvabilityError(
            f"Hamiltonian has {sdim} stable eigenvalues for n={n} (eigenvalues near the "
            "imaginary axis); (A, B) not stabilizable or (A, Q) not detectable"
        )
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise SolvabilityError("stable invariant subspace is not a graph; (A, B) is not "
                               "stabilizable")
    P = np.linalg.solve(U11.T, U21.T).T
    P = 0.5 * (P + P.T)
    P = _kleinman_polish(A, B, Q, R, P)
    nP = np.linalg.norm(P)
    if np.linalg.eigvalsh(P).min() < -1e-8 * (1 + nP):
        raise RiccatiNumericalError("computed Riccati solution is indefinite")
    return P


def _kleinman_polish(A, B, Q, R, P):
    res0 = np.linalg.norm(care_residual(A, B, Q, R, P))
    K = np.linalg.solve(R, B.T @ P)
    Acl = A - B @ K
    if np.linalg.eigvals(Acl).real.max() >= 0:
        return P
    try:
        P1 = sla.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
    except (np.linalg.LinAlgError, ValueError):
        return P
    P1 = 0.5 * (P1 + P1.T)
    if np.all(np.isfinite(P1)) and np.linalg.norm(care_residual(A, B, Q, R, P1)) < res0:
        return P1
    return P


def lqr_gain(A, B, w):
    """LQR gain ``K = R^-1 B' P`` with a closed-loop stability check."""
    A, B = _check_shapes(A, B, w)
    P = solve_care(A, B, w)
    K = np.linalg.solve(w.R, B.T @ P)
    eigs = np.linalg.eigvals(A - B @ K)
    if eigs.real.max() >= 0:
        raise SolvabilityError(f"closed loop is not stable (max Re = {eigs.real.max():.3g})")
    return GainResult(K, P, eigs)


def sdre_gain(model, x, w):
    """LQR gain for ``(A, J_N(x) B)``: the state-dependent Riccati gain at ``x``."""
    return lqr_gain(model.A, model.B_eff(x), w)


def steady_state_input(A, B_eff, z_ref):
    """Least-squares ``u`` with ``B_eff u = -A z_ref``; returns ``(u, residual_norm)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    z_ref = np.atleast_1d(np.asarray(z_ref, dtype=float))
    B_eff = np.asarray(B_eff, dtype=float).reshape(len(z_ref), -1)
    rhs = -A @ z_ref
    u, *_ = np.linalg.lstsq(B_eff, rhs, rcond=None)
    return u, float(np.linalg.norm(B_eff @ u - rhs))
