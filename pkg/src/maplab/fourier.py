"""Fourier operators of a MAP and the dominant-eigenvalue branch.

S_1(zeta) is the S x S complex matrix P(x, x') phi_{x,x'}(zeta) in discrete
time and exp(t A(zeta)) in continuous time. Its dominant eigenvalue branch
near zeta = 0 carries the asymptotic mean, variance and third cumulant of the
additive component; the rank-one eigenprojection and the complementary part
give the exact decomposition S_1(zeta)^n = lambda^n Pi(zeta) + N(zeta)^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain_core import l2_operator_norm
from .errors import BranchCollision, SingularResolvent
from .map_model import CtMapSpec, MapSpec

SEPARATION_MIN = 1e-6


@dataclass(frozen=True)
class FourierOperator:
    """Fourier operator matrix at one frequency point."""

    zeta: np.ndarray
    t: float
    M: np.ndarray


def _fourier_matrix(spec, zeta) -> np.ndarray:
    """S_1(zeta) for a discrete spec, exp(A(zeta)) for a continuous one."""
    if isinstance(spec, CtMapSpec):
        z = float(np.atleast_1d(zeta)[0])
        return scipy.linalg.expm(spec.fourier_generator(z))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    S = spec.n_states
    M = np.zeros((S, S), dtype=complex)
    for (i, j), law in spec.increments.items():
        M[i, j] = spec.P[i, j] * law.cf(zeta)
    return M


def build_fourier(spec, zeta, t=1) -> FourierOperator:
    """Fourier operator S_t(zeta) of a discrete or continuous-time spec."""
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if isinstance(spec, CtMapSpec):
        z = float(zeta[0])
        M = scipy.linalg.expm(float(t) * spec.fourier_generator(z))
        return FourierOperator(zeta=zeta, t=float(t), M=M)
    if int(t) != t or t < 0:
        raise ValueError("discrete time must be a nonnegative integer")
    M1 = _fourier_matrix(spec, zeta)
    M = np.linalg.matrix_power(M1, int(t))
    return FourierOperator(zeta=zeta, t=int(t), M=M)


def _spec_pi(spec) -> np.ndarray:
    return spec.pi if isinstance(spec, CtMapSpec) else spec.kernel.pi


def check_semigroup(spec, zeta, s, t) -> float:
    """||S_{t+s}(zeta) - S_t(zeta) S_s(zeta)||_2; contract <= 1e-9."""
    pi = _spec_pi(spec)
    A = build_fourier(spec, zeta, s).M
    B = build_fourier(spec, zeta, t).M
    C = build_fourier(spec, zeta, s + t).M
    return l2_operator_norm(C - B @ A, pi)


def _dominant_decomposition(M: np.ndarray, prev_vec=None, prev_lam=None):
    """Eigendecomposition with branch selection by eigenvector overlap.

    Returns (lam, right_vec, projection, kappa) where kappa is the largest
    modulus among the remaining eigenvalues. With prev_vec=None the largest
    modulus eigenvalue is selected (valid at zeta = 0).
    """
    w, V = np.linalg.eig(M)
    if prev_vec is None:
        idx = int(np.argmax(np.abs(w)))
    else:
        overlaps = np.abs(prev_vec.conj() @ V) / np.linalg.norm(V, axis=0)
        best = np.max(overlaps)
        ties = np.flatnonzero(overlaps > best - 1e-12)
        idx = int(ties[0])
        if len(ties) > 1 and prev_lam is not None:
            # overlap tie: prefer the eigenvalue closest to the previous one
            idx = int(ties[np.argmin(np.abs(w[ties] - prev_lam))])
    lam = w[idx]
    u = V[:, idx] / np.linalg.norm(V[:, idx])
    # left eigenvector from the transpose problem
    wl, Vl = np.linalg.eig(M.T)
    jl = int(np.argmin(np.abs(wl - lam)))
    v = Vl[:, jl]
    denom = v @ u
    if abs(denom) < 1e-14:
        raise BranchCollision("defective dominant eigenvalue")
    proj = np.outer(u, v) / denom
    kappa = max((abs(x) for k, x in enumerate(w) if k != idx), default=0.0)
    return lam, u, proj, float(kappa)


@dataclass(frozen=True)
class SpectralSummary:
    """Dominant-eigenvalue branch over a zeta grid plus derivatives at 0."""

    grid: np.ndarray
    lam: np.ndarray
    projections: np.ndarray        # (n_grid, S, S) rank-one complex matrices
    kappa_hat: float
    separation: float
    grad_lambda: np.ndarray = None
    hess_lambda: np.ndarray = None
    third_deriv: complex = None

    @property
    def sigma2(self) -> float:
        return float(np.real(-self.hess_lambda[0, 0]))

    @property
    def Sigma(self) -> np.ndarray:
        return -np.real(self.hess_lambda)

    @property
    def mu3_fourier(self) -> float:
        return float(np.real(1j * self.third_deriv))


def _ordered_path(grid: np.ndarray):
    """Indices walking the grid outward from 0 (d = 1), with predecessors."""
    order = np.argsort(np.abs(grid), kind="stable")
    prev = {}
    last_pos = last_neg = zero = None
    for k in order:
        z = grid[k]
        if z == 0:
            zero = k
            prev[k] = None
        elif z > 0:
            prev[k] = last_pos if last_pos is not None else zero
            last_pos = k
        else:
            prev[k] = last_neg if last_neg is not None else zero
            last_neg = k
    if zero is None:
        raise ValueError("grid must contain zeta = 0")
    return order, prev


def lambda_branch(spec, grid) -> SpectralSummary:
    """Continuous dominant-eigenvalue branch along a scalar grid containing 0.

    Fails with BranchCollision when the spectral separation |lambda| - kappa
    drops below 1e-6 anywhere on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise ValueError("lambda_branch expects a scalar zeta grid")
    order, prev = _ordered_path(grid)
    S = spec.n_states
    lam = np.empty(len(grid), dtype=complex)
    projections = np.empty((len(grid), S, S), dtype=complex)
    vecs = {}
    kappa_hat = 0.0
    separation = np.inf
    for k in order:
        M = _fourier_matrix(spec, grid[k])
        p = prev[k]
        if p is not None:
            lam_k, u, proj, kappa = _dominant_decomposition(M, vecs[p], lam[p])
        else:
            lam_k, u, proj, kappa = _dominant_decomposition(M)
        sep = abs(lam_k) - kappa
        if sep < SEPARATION_MIN:
            raise BranchCollision(
                f"separation {sep:.2e} at zeta={grid[k]:g} below {SEPARATION_MIN:g}")
        lam[k] = lam_k
        vecs[k] = u
        projections[k] = proj
        kappa_hat = max(kappa_hat, kappa)
        separation = min(separation, sep)
    return SpectralSummary(grid=grid, lam=lam, projections=projections,
                           kappa_hat=kappa_hat, separation=float(separation))


def _branch_values(spec, points) -> np.ndarray:
    """lambda at the given scalar points by continuation from 0."""
    pts = np.concatenate([[0.0], np.asarray(points, dtype=float)])
    summary = lambda_branch(spec, pts)
    return summary.lam[1:]


def derivatives_at_zero(spec, order: int = 3):
    """(grad, hess, third) of the branch at 0 by Richardson central differences.

    Scalar specs get all three; multivariate specs get grad and hess with
    third = None. Steps h in {1e-2, 5e-3} with one Richardson level.
    """
    d = 1 if isinstance(spec, CtMapSpec) else spec.d
    if d == 1:
        def derivs(h):
            pts = np.array([-2, -1, 1, 2], dtype=float) * h
            lm2, lm1, lp1, lp2 = _branch_values(spec, pts)
            l0 = 1.0
            g = (lp1 - lm1) / (2 * h)
            hess = (lp1 - 2 * l0 + lm1) / h ** 2
            third = (lp2 - 2 * lp1 + 2 * lm1 - lm2) / (2 * h ** 3)
            return np.array([g, hess, third])

        d1 = derivs(1e-2)
        d2 = derivs(5e-3)
        g, hess, third = (4.0 * d2 - d1) / 3.0
        grad = np.array([g])
        hess_m = np.array([[hess]])
        if order < 3:
            third = None
        return grad, hess_m, third
    raise NotImplementedError("derivatives_at_zero supports scalar specs")


@dataclass(frozen=True)
class ExpansionEvaluation:
    """Characteristic-function expansion lhs = lambda^n L + R_n at one point."""

    zeta: float
    n: int
    lhs: complex
    rhs_main: complex
    rhs_rem: complex
    kappa_hat: float
    conditioning: float

    @property
    def identity_residual(self) -> float:
        return abs(self.lhs - (self.rhs_main + self.rhs_rem))


def evaluate_expansion(spec, zeta, n: int, f=None) -> ExpansionEvaluation:
    """Evaluate E[e^{i zeta Y_n} f(X_n)] against its spectral decomposition."""
    pi = _spec_pi(spec)
    S = len(pi)
    if f is None:
        f = np.ones(S)
    f = np.asarray(f, dtype=complex)
    zeta = float(np.atleast_1d(zeta)[0])
    summary = lambda_branch(spec, np.array([0.0, zeta]) if zeta != 0
                            else np.array([0.0]))
    k = 1 if zeta != 0 else 0
    lam = summary.lam[k]
    proj = summary.projections[k]
    M = _fourier_matrix(spec, zeta)
    lhs = complex(pi @ (np.linalg.matrix_power(M, n) @ f))
    rhs_main = complex(lam ** n * (pi @ (proj @ f)))
    N = M - lam * proj
    rhs_rem = complex(pi @ (np.linalg.matrix_power(N, n) @ f))
    cond = float(np.linalg.norm(proj, 2))
    kappa = max(abs(x) for x in np.linalg.eigvals(N))
    return ExpansionEvaluation(zeta=zeta, n=n, lhs=lhs, rhs_main=rhs_main,
                               rhs_rem=rhs_rem, kappa_hat=float(kappa),
                               conditioning=cond)


def nonlattice_scan(spec, K) -> tuple:
    """Max spectral radius of S_1(zeta) over a grid excluding 0.

    Returns (rho_hat, worst_zeta); nonlattice verdict is rho_hat < 1 - 1e-8.
    """
    K = np.asarray(K, dtype=float)
    if (K == 0).any():
        raise ValueError("scan grid must exclude 0")
    rho_hat, worst = -1.0, None
    for z in K:
        rho = float(np.max(np.abs(np.linalg.eigvals(_fourier_matrix(spec, z)))))
        if rho > rho_hat:
            rho_hat, worst = rho, float(z)
    return rho_hat, worst


def is_nonlattice_spectral(spec, K) -> bool:
    rho_hat, _ = nonlattice_scan(spec, K)
    return rho_hat < 1.0 - 1e-8


def contour_crosscheck(spec, zeta, n: int, nodes: int = 256,
                       kappa: float = None) -> float:
    """Resolvent-contour realization of the eigenprojection and remainder.

    Pi(zeta) is recovered by trapezoidal quadrature of the resolvent around
    the dominant eigenvalue; N(zeta)^n around the origin at radius kappa
    (default midpoint between kappa_hat and |lambda|). Returns the max of the
    two matrix residuals against the eigendecomposition realization.
    """
    zeta = float(np.atleast_1d(zeta)[0])
    M = _fourier_matrix(spec, zeta)
    grid = np.array([0.0, zeta]) if zeta != 0 else np.array([0.0])
    summary = lambda_branch(spec, grid)
    k = len(grid) - 1
    lam, proj = summary.lam[k], summary.projections[k]
    eigs = np.linalg.eigvals(M)
    others = np.array([e for e in eigs if abs(e - lam) > 1e-10])
    kappa_hat = float(np.max(np.abs(others))) if len(others) else 0.0
    if kappa is None:
        kappa = 0.5 * (kappa_hat + abs(lam))

    def contour_integral(center, radius, weight):
        if np.min(np.abs(np.abs(eigs - center) - radius)) < 1e-8:
            raise SingularResolvent("eigenvalue within 1e-8 of the contour")
        theta = 2 * np.pi * np.arange(nodes) / nodes
        z = center + radius * np.exp(1j * theta)
        dz = radius * 1j * np.exp(1j * theta) * (2 * np.pi / nodes)
        acc = np.zeros_like(M)
        I = np.eye(M.shape[0])
        for zk, dzk in zip(z, dz):
            acc = acc + weight(zk) * np.linalg.solve(zk * I - M, I) * dzk
        return acc / (2j * np.pi)

    # circle around the dominant eigenvalue separating it from the rest
    r1 = 0.5 * (abs(lam) - kappa_hat)
    proj_contour = contour_integral(lam, r1, lambda z: 1.0)
    res_proj = float(np.linalg.norm(proj_contour - proj, 2))

    Nmat = M - lam * proj
    Nn = np.linalg.matrix_power(Nmat, n)
    Nn_contour = contour_integral(0.0, kappa, lambda z: z ** n)
    res_N = float(np.linalg.norm(Nn_contour - Nn, 2))
    return max(res_proj, res_N)
