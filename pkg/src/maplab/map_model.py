"""Discrete- and continuous-time Markov additive process specifications.

A MapSpec couples a driving kernel with one increment law per supported edge.
Exact moments of the additive component come from a per-state transfer
recursion; the asymptotic variance from the geometric correlation series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, gcd

import numpy as np
import scipy.linalg

from .chain_core import StochasticKernel, l2_operator_norm, solve_stationary
from .errors import GapAbsent, MomentUndefined
from .increments import IncrementLaw, deterministic, from_cf

CENTER_TOL = 1e-12


@dataclass(frozen=True)
class MapSpec:
    """Driving kernel plus per-edge increment laws (discrete time).

    increments maps (i, j) state-index pairs to IncrementLaw for every edge
    with P[i, j] > 0. If centered=True the edge means are shifted at
    construction so that the stationary one-step mean vanishes.
    """

    kernel: StochasticKernel
    increments: dict
    d: int = 1
    centered: bool = False
    ct_origin: object = None   # CtMapSpec the spec was skeleton-extracted from

    def __post_init__(self):
        P = self.kernel.P
        edges = list(zip(*np.nonzero(P > 0)))
        incs = dict(self.increments)
        for i, j in edges:
            if (i, j) not in incs:
                raise ValueError(f"missing increment law for edge ({i}, {j})")
        for law in incs.values():
            if law.d != self.d:
                raise ValueError("increment dimension mismatch")
        if self.centered:
            m = _stationary_step_mean(self.kernel, incs, self.d)
            if np.max(np.abs(m)) > CENTER_TOL:
                incs = {e: law.shifted(-m) for e, law in incs.items()}
        object.__setattr__(self, "increments", incs)

    @property
    def pi(self):
        return self.kernel.pi

    @property
    def P(self):
        return self.kernel.P

    @property
    def n_states(self):
        return self.kernel.n_states

    def edge_mean_matrix(self) -> np.ndarray:
        """Matrix of conditional edge means, shape (S, S, d); zero off support."""
        S = self.n_states
        M = np.zeros((S, S, self.d))
        for (i, j), law in self.increments.items():
            M[i, j] = law.mean()
        return M

    def law(self, i: int, j: int) -> IncrementLaw:
        return self.increments[(i, j)]


@dataclass(frozen=True)
class CtMapSpec:
    """Continuous-time MAP: generator, state reward, optional jump increments.

    Y_t accumulates reward[x] per unit holding time in x plus, when given,
    jump_increments[x, x'] at each transition.
    """

    generator: np.ndarray
    reward: np.ndarray
    jump_increments: np.ndarray = None
    centered: bool = False

    def __post_init__(self):
        G = np.array(self.generator, dtype=float)
        if np.max(np.abs(G.sum(axis=1))) > 1e-10:
            raise ValueError("generator rows must sum to 0")
        off = G - np.diag(np.diag(G))
        if (off < -1e-12).any():
            raise ValueError("off-diagonal rates must be nonnegative")
        G.setflags(write=False)
        object.__setattr__(self, "generator", G)
        xi = np.array(self.reward, dtype=float)
        pi = self.pi
        if self.centered:
            xi = xi - pi @ xi
        xi.setflags(write=False)
        object.__setattr__(self, "reward", xi)
        if self.jump_increments is not None:
            J = np.array(self.jump_increments, dtype=float)
            J.setflags(write=False)
            object.__setattr__(self, "jump_increments", J)

    @property
    def pi(self) -> np.ndarray:
        G = np.asarray(self.generator, dtype=float)
        n = G.shape[0]
        A = np.vstack([G.T[:-1], np.ones(n)])
        b = np.zeros(n)
        b[-1] = 1.0
        return np.linalg.solve(A, b)

    @property
    def uniformization_rate(self) -> float:
        return float(np.max(-np.diag(self.generator)))

    @property
    def n_states(self) -> int:
        return self.generator.shape[0]

    def fourier_generator(self, zeta: float) -> np.ndarray:
        """Matrix A(zeta) with exp(t A(zeta)) the time-t Fourier operator."""
        G = self.generator
        A = np.array(G, dtype=complex)
        if self.jump_increments is not None:
            off = ~np.eye(self.n_states, dtype=bool)
            A[off] = A[off] * np.exp(1j * zeta * self.jump_increments[off])
        A[np.diag_indices_from(A)] += 1j * zeta * self.reward
        return A


def _stationary_step_mean(kernel, increments, d) -> np.ndarray:
    m = np.zeros(d)
    for (i, j), law in increments.items():
        m += kernel.pi[i] * kernel.P[i, j] * law.mean()
    return m


def exact_mean(spec: MapSpec) -> np.ndarray:
    """Exact stationary one-step mean E[Y_1]; additivity gives E[Y_n] = n * mean."""
    return _stationary_step_mean(spec.kernel, spec.increments, spec.d)


def exact_moments(spec: MapSpec, n: int, k: int) -> float:
    """Exact E[Y_n^k] for a scalar spec, k <= 4, via moment transfer.

    Maintains m_j(x) = E[Y_t^j 1{X_t = x}] for j = 0..k and updates with a
    one-step binomial convolution against edge increment moments.
    """
    if spec.d != 1:
        raise MomentUndefined("exact_moments requires d = 1")
    if not 1 <= k <= 4:
        raise ValueError("moment order must be in 1..4")
    S = spec.n_states
    P = spec.P
    # edge_mom[r][i, j] = P(i,j) * E[Z_{ij}^r]
    edge_mom = [np.array(P)]
    for r in range(1, k + 1):
        E = np.zeros((S, S))
        for (i, j), law in spec.increments.items():
            E[i, j] = P[i, j] * law.moment(r)
        edge_mom.append(E)

    m = np.zeros((k + 1, S))
    m[0] = spec.pi
    for _ in range(n):
        new = np.empty_like(m)
        for j in range(k + 1):
            acc = np.zeros(S)
            for r in range(j + 1):
                acc += comb(j, r) * (m[r] @ edge_mom[j - r])
            new[j] = acc
        m = new
    return float(m[k].sum())


def _contraction_horizon(spec: MapSpec, t_max: int = 64):
    """Smallest tau with kappa = ||P^tau - Pi||_2 < 1, or GapAbsent."""
    Pi = spec.kernel.projector
    power = np.array(spec.P)
    for tau in range(1, t_max + 1):
        kappa = l2_operator_norm(power - Pi, spec.pi)
        if kappa < 1.0 - 1e-12:
            return tau, kappa
        power = power @ spec.P
    raise GapAbsent("no L2 contraction found up to horizon %d" % t_max)


def variance_series(spec: MapSpec, tol: float = 1e-12):
    """Asymptotic covariance Sigma = lim E[Y_n Y_n*]/n of a centered spec.

    Computed as pi(second edge moment) plus twice the geometric correlation
    series; the series is summed in closed form through the fundamental
    matrix after certifying an L2 contraction (the spectral gap guarantees
    absolute convergence). Returns a scalar for d = 1, a (d, d) matrix
    otherwise.
    """
    if not spec.centered and np.max(np.abs(exact_mean(spec))) > 1e-10:
        raise ValueError("variance_series requires a centered spec")
    S, d, P, pi = spec.n_states, spec.d, spec.P, spec.pi

    # s2[x] = E[Z Z* | X_0 = x]; a[x'] = E[Z | X_1 = x'] weighting, b[x] row term
    s2 = np.zeros((S, d, d))
    for (i, j), law in spec.increments.items():
        law_d = law
        if d == 1:
            mu2 = law_d.moment(2)
            s2[i, 0, 0] += P[i, j] * mu2
        else:
            mu = law_d.mean()
            if law_d.kind == "gaussian":
                second = law_d.cov + np.outer(mu, mu)
            elif law_d.kind == "deterministic":
                second = np.outer(mu, mu)
            elif law_d.kind == "mixture":
                second = sum(p * np.outer(v, v) for p, v in law_d.atoms)
            else:
                raise MomentUndefined("matrix second moments unavailable for cf laws")
            s2[i] += P[i, j] * second
    base = np.einsum("x,xab->ab", pi, s2)

    # cross terms: E[Z_1 Z_{1+l}*] = sum_e pi_i P_ij m_ij (P^{l-1} a)(j)
    EM = spec.edge_mean_matrix()                       # (S, S, d)
    a = np.einsum("ij,ija->ia", P, EM)                 # conditional mean from state
    w = np.einsum("i,ij,ija->ja", pi, P, EM)           # weight landing in state j

    _contraction_horizon(spec)      # certify summability (GapAbsent otherwise)
    # sum_{l>=1} P^{l-1} a = Z a exactly, Z = (I - P + Pi)^{-1}, since pi a = 0
    Z = np.linalg.inv(np.eye(S) - P + spec.kernel.projector)
    Za = Z @ a
    cross_half = np.einsum("ja,jb->ab", w, Za)
    cross = cross_half + cross_half.T
    Sigma = base + cross
    return float(Sigma[0, 0]) if d == 1 else Sigma


def third_cumulant_rate(spec: MapSpec, n0: int = 2048) -> float:
    """mu_3 = lim E[Y_n^3]/n via exact-moment slope at two large n."""
    m_a = exact_moments(spec, n0, 3)
    m_b = exact_moments(spec, 2 * n0, 3)
    return (m_b - m_a) / n0


@dataclass(frozen=True)
class LatticeReport:
    """Outcome of the lattice search for deterministic-increment specs."""

    is_lattice: bool
    span: float = 0.0
    shift: float = 0.0
    beta: np.ndarray = None
    undetermined: bool = False


def _real_gcd(values, tol=1e-9):
    """Approximate gcd of positive reals; None if incommensurable at tol.

    Incommensurable inputs drive the Euclidean remainders below tol without
    reaching a common divisor, which we report as failure.
    """
    vals = sorted(v for v in values if v > tol)
    if not vals:
        return 0.0
    g = vals[0]
    for v in vals[1:]:
        a, b = max(g, v), min(g, v)
        while b > tol:
            a, b = b, a % b
        g = a
    if g <= 1000 * tol:
        return None
    # confirm every value is an integer multiple of g
    for v in vals:
        if abs(v / g - round(v / g)) * g > tol:
            return None
    return g


def detect_lattice(spec: MapSpec, tol: float = 1e-9) -> LatticeReport:
    """Search for (shift, span, beta) putting all increments on a lattice.

    Complete for scalar deterministic increments: beta is propagated along a
    spanning tree of the support graph for each candidate shift, and the
    non-tree edge discrepancies must share a common real gcd. Any edge law
    with a density component is immediately nonlattice; mixtures of several
    atoms are reported as undetermined.
    """
    if spec.d != 1:
        raise ValueError("lattice detection requires d = 1")
    laws = spec.increments
    if any(law.has_density_component() for law in laws.values()):
        return LatticeReport(is_lattice=False)
    if any(law.kind == "mixture" and len(law.atoms) > 1 for law in laws.values()):
        return LatticeReport(is_lattice=False, undetermined=True)

    def edge_value(law):
        if law.kind == "deterministic":
            return float(law.value[0])
        return float(law.atoms[0][1][0])

    S = spec.n_states
    vals = {e: edge_value(law) for e, law in laws.items()}
    adj = [[] for _ in range(S)]
    for (i, j), v in vals.items():
        adj[i].append((j, v, +1.0))
        adj[j].append((i, v, -1.0))     # traverse edges both ways in the tree

    candidates = sorted(set(round(v, 12) for v in vals.values()))
    for a in candidates:
        beta = np.full(S, np.nan)
        beta[0] = 0.0
        stack = [0]
        tree_edges = set()
        while stack:
            x = stack.pop()
            for (y, v, sign) in adj[x]:
                if np.isnan(beta[y]):
                    # v + beta(y) - beta(x) = a along tree edges
                    beta[y] = beta[x] + sign * (a - v)
                    e = (x, y) if sign > 0 else (y, x)
                    tree_edges.add(e)
                    stack.append(y)
        if np.isnan(beta).any():
            continue  # unreachable states (outside support of pi)
        discrepancies = [abs(vals[(i, j)] + beta[j] - beta[i] - a)
                         for (i, j) in vals if (i, j) not in tree_edges]
        g = _real_gcd(discrepancies, tol=tol)
        if g is None:
            continue
        if g == 0.0:
            # all residuals vanish: Y_n + beta(X_n) - beta(X_0) = n a exactly
            span = abs(a) if abs(a) > tol else 0.0
            return LatticeReport(is_lattice=True, span=span, shift=a, beta=beta)
        return LatticeReport(is_lattice=True, span=g, shift=a, beta=beta)
    return LatticeReport(is_lattice=False)


def ct_sample_skeleton(ct: CtMapSpec) -> MapSpec:
    """Time-1 skeleton of a continuous-time MAP.

    The skeleton kernel is exp(G); edge increment laws are carried through
    their exact characteristic functions extracted from the Feynman-Kac
    matrix exp(G + i zeta diag(xi)).
    """
    P = scipy.linalg.expm(ct.generator)
    P = np.clip(P, 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    kernel = StochasticKernel(states=tuple(range(ct.n_states)), P=P)

    def make_cf(i, j):
        pij = P[i, j]

        def cf(zeta, _i=i, _j=j, _p=pij):
            z = float(np.atleast_1d(zeta)[0])
            M = scipy.linalg.expm(ct.fourier_generator(z))
            return M[_i, _j] / _p

        return cf

    increments = {}
    for i in range(ct.n_states):
        for j in range(ct.n_states):
            if P[i, j] > 0:
                increments[(i, j)] = from_cf(make_cf(i, j), d=1)
    return MapSpec(kernel=kernel, increments=increments, d=1,
                   centered=False, ct_origin=ct)
