"""Statistical verification of the limit theorems against simulation.

Every check is a pure function of (spec, parameters, seed): pass/fail gates
include DKW-style standard-error slack so verdicts are deterministic given
seeds yet statistically sound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .chain_core import spectral_gap_report
from .errors import DegenerateVariance, LatticeSpec, ZeroVariance
from .fourier import nonlattice_scan
from .map_model import (CtMapSpec, MapSpec, ct_sample_skeleton, detect_lattice,
                        exact_mean, third_cumulant_rate, variance_series)
from .montecarlo import increment_panel, simulate_ct, simulate_discrete

DKW_DELTA = 1e-3
A_GRID = np.linspace(-5.0, 5.0, 2001)


def ecdf_se(n_samples: int, delta: float = DKW_DELTA) -> float:
    """DKW sup-norm deviation bound at confidence 1 - delta."""
    return float(np.sqrt(np.log(2.0 / delta) / (2.0 * n_samples)))


def _phi(a):
    return ndtr(a)


def _eta(a):
    return np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi)


def kolmogorov_distance(sample: np.ndarray, cdf=_phi) -> float:
    """Exact sup distance between the ECDF and a reference CDF.

    Evaluated at the ECDF jumps (where the sup is attained) plus the fixed
    a-grid for robustness against heavy standardization errors.
    """
    y = np.sort(np.asarray(sample, dtype=float))
    N = len(y)
    F = cdf(y)
    upper = np.max(np.arange(1, N + 1) / N - F)
    lower = np.max(F - np.arange(0, N) / N)
    grid_dev = 0.0
    Fg = cdf(A_GRID)
    idx = np.searchsorted(y, A_GRID, side="right")
    grid_dev = float(np.max(np.abs(idx / N - Fg)))
    return float(max(upper, lower, grid_dev))


def _sup_deviation(sample, corrected_cdf):
    """Same sup computation against an arbitrary (possibly non-monotone) curve."""
    return kolmogorov_distance(sample, corrected_cdf)


@dataclass(frozen=True)
class GaussianComparison:
    """Empirical-vs-Gaussian discrepancy at one horizon."""

    n: float
    n_samples: int
    sigma_used: float
    kolmogorov: float
    be_constant: float                  # sqrt(n) * kolmogorov
    edgeworth_residual: float = None
    bias_term_used: bool = False
    se: float = None


def _sigma_for(spec) -> float:
    if isinstance(spec, CtMapSpec):
        skeleton = ct_sample_skeleton(spec)
        sig2 = variance_series(_centered_skeleton(spec, skeleton))
    else:
        sig2 = variance_series(spec)
    if sig2 <= 1e-12:
        raise DegenerateVariance("sigma^2 <= 1e-12; limit law is a Dirac mass")
    return float(np.sqrt(sig2))


def _centered_skeleton(ct, skeleton):
    # skeleton of a centered CT spec is centered already; guard numerically
    m = exact_mean(skeleton)
    if np.max(np.abs(m)) > 1e-8:
        raise ValueError("continuous-time spec must be centered")
    return skeleton


def clt_check(spec: MapSpec, n_list, paths: int, seed: int):
    """Kolmogorov distance of Y_n/(sigma sqrt n) to N(0,1) along n_list."""
    sigma = _sigma_for(spec)
    records = []
    for k, n in enumerate(n_list):
        batch = simulate_discrete(spec, int(n), paths, seed + k)
        z = batch.terminal_Y[:, 0] / (sigma * np.sqrt(n))
        kol = kolmogorov_distance(z)
        records.append(GaussianComparison(
            n=n, n_samples=paths, sigma_used=sigma, kolmogorov=kol,
            be_constant=float(np.sqrt(n) * kol), se=ecdf_se(paths)))
    return records


def berry_esseen_check(spec: MapSpec, n_list, paths: int, seed: int):
    """(B_hat, records): flatness of sqrt(n) * Kolmogorov along n_list."""
    records = clt_check(spec, n_list, paths, seed)
    B_hat = float(max(max(np.sqrt(r.n) * (r.kolmogorov - 2.0 * r.se), 0.0)
                      for r in records))
    raw = [r.be_constant for r in records]
    # flat within a factor 2 once the DKW noise floor (inflated by sqrt(n)
    # at the largest horizon) is granted as slack
    slack = 2.0 * np.sqrt(max(r.n for r in records)) * records[0].se
    flat = max(raw) <= 2.0 * min(raw) + slack
    return B_hat, records, bool(flat)


def edgeworth_cdf(a, sigma: float, mu3: float, n: float, b_mu: float = 0.0):
    """First-order corrected CDF (with optional non-stationary bias term)."""
    a = np.asarray(a, dtype=float)
    corr = mu3 / (6.0 * sigma ** 3 * np.sqrt(n)) * (1.0 - a * a) * _eta(a)
    bias = -b_mu * _eta(a) / (sigma * np.sqrt(n))
    return _phi(a) + corr + bias


def asymptotic_bias(spec: MapSpec, mu) -> float:
    """Exact b_mu = lim E_{mu,0}[Y_n] via the fundamental-matrix solve.

    Requires a centered spec; equals mu Z a with Z = (I - P + Pi)^{-1} and
    a the conditional edge-mean vector.
    """
    mu = np.asarray(mu, dtype=float)
    P, pi = spec.P, spec.pi
    a = np.einsum("ij,ij->i", P, spec.edge_mean_matrix()[:, :, 0])
    if abs(pi @ a) > 1e-10:
        raise ValueError("asymptotic bias requires a centered spec")
    Z = np.linalg.inv(np.eye(len(pi)) - P + spec.kernel.projector)
    return float(mu @ Z @ a)


def _require_nonlattice(spec, allow_lattice):
    if allow_lattice:
        return None
    # the structural search is complete for deterministic increments; the
    # spectral scan on a generic grid would miss the isolated radius-1 points
    report = detect_lattice(spec)
    if report.is_lattice:
        raise LatticeSpec(
            f"lattice increments with span {report.span:g}, "
            f"shift {report.shift:g}")
    K = np.linspace(0.1, 10.0, 200)
    rho_hat, worst = nonlattice_scan(spec, K)
    if rho_hat >= 1.0 - 1e-8:
        raise LatticeSpec(f"spectral radius {rho_hat:.6f} at zeta={worst:g}")
    return rho_hat


def edgeworth_check(spec: MapSpec, n_list, paths: int, seed: int, mu=None,
                    allow_lattice: bool = False):
    """Edgeworth-corrected residuals along n_list, optional initial law mu.

    Each record carries both the plain Kolmogorov distance and the corrected
    residual; the correction must help wherever mu_3 != 0.
    """
    _require_nonlattice(spec, allow_lattice)
    sigma = _sigma_for(spec)
    mu3 = third_cumulant_rate(spec)
    b_mu = 0.0 if mu is None else asymptotic_bias(spec, mu)
    records = []
    for k, n in enumerate(n_list):
        batch = simulate_discrete(spec, int(n), paths, seed + k, mu=mu)
        z = batch.terminal_Y[:, 0] / (sigma * np.sqrt(n))
        kol = kolmogorov_distance(z)
        if mu3 == 0.0 and b_mu == 0.0:
            resid = kol
        else:
            resid = _sup_deviation(
                z, lambda a: edgeworth_cdf(a, sigma, mu3, n, b_mu))
        records.append(GaussianComparison(
            n=n, n_samples=paths, sigma_used=sigma, kolmogorov=kol,
            be_constant=float(np.sqrt(n) * kol), edgeworth_residual=resid,
            bias_term_used=mu is not None, se=ecdf_se(paths)))
    return records


@dataclass(frozen=True)
class LltRecord:
    """Scaled density estimate against the integral of a bump function."""

    n: int
    center: float
    width: float
    estimate: float     # sqrt(det Sigma) (2 pi n)^(1/2) E[g(Y_n)]
    target: float       # integral of g
    ratio: float
    mc_se: float        # standard error of the ratio


def triangular_bump(center: float, width: float):
    """Triangular bump of height 1, support [center - width, center + width]."""

    def g(y):
        return np.clip(1.0 - np.abs(y - center) / width, 0.0, None)

    g.integral = width
    g.center = center
    g.width = width
    return g


def llt_check(spec: MapSpec, n_list, paths: int, seed: int, bumps=None,
              allow_lattice: bool = False):
    """Local-limit ratio estimates for a family of bump test functions."""
    _require_nonlattice(spec, allow_lattice)
    sigma = _sigma_for(spec)
    if bumps is None:
        bumps = [triangular_bump(0.0, 1.0)]
    records = []
    for k, n in enumerate(n_list):
        batch = simulate_discrete(spec, int(n), paths, seed + k)
        y = batch.terminal_Y[:, 0]
        scale = sigma * np.sqrt(2.0 * np.pi * n)
        for g in bumps:
            vals = scale * g(y)
            est = float(vals.mean())
            se = float(vals.std(ddof=1) / np.sqrt(paths))
            records.append(LltRecord(
                n=int(n), center=g.center, width=g.width, estimate=est,
                target=g.integral, ratio=est / g.integral,
                mc_se=se / g.integral))
    return records


@dataclass(frozen=True)
class RhoMixReport:
    """Empirical max correlation at one lag against the certified bound."""

    lag: int
    empirical_max: float
    bound: float
    se: float
    degenerate_pairs: int
    vacuous: bool = False


def _test_functionals(panel_col):
    """Fixed family: linear, quadratic, quartile-bin indicators."""
    funcs = [panel_col, panel_col ** 2]
    qs = np.quantile(panel_col, [0.25, 0.5, 0.75])
    edges = np.concatenate([[-np.inf], np.unique(qs), [np.inf]])
    for lo, hi in zip(edges[:-1], edges[1:]):
        funcs.append(((panel_col > lo) & (panel_col <= hi)).astype(float))
    return funcs


def rho_mixing_check(spec: MapSpec, lags, paths: int, seed: int):
    """Empirical lag correlations of increments against ||P^{t-1} - Pi||_2."""
    if isinstance(spec, CtMapSpec):
        spec = ct_sample_skeleton(spec)
    max_lag = int(max(lags))
    panel = increment_panel(spec, max_lag + 1, paths, seed)
    report = spectral_gap_report(spec.kernel, max_lag + 1)
    se = 1.0 / np.sqrt(paths)
    out = []
    base = panel[:, 0]
    fs = _test_functionals(base)
    for t in lags:
        t = int(t)
        target = panel[:, t]
        hs = _test_functionals(target)
        best = 0.0
        degenerate = 0
        for f in fs:
            for h in hs:
                sf, sh = f.std(ddof=1), h.std(ddof=1)
                if sf < 1e-12 or sh < 1e-12:
                    degenerate += 1
                    continue
                c = float(np.corrcoef(f, h)[0, 1])
                best = max(best, abs(c))
        bound = report.bound(t)     # ||P^{t-1} - Pi||_2 >= rho(t)
        out.append(RhoMixReport(lag=t, empirical_max=best, bound=float(bound),
                                se=se, degenerate_pairs=degenerate,
                                vacuous=bound >= 1.0 - 1e-12))
    return out


def ct_limit_check(ct: CtMapSpec, t_list, paths: int, seed: int):
    """CLT/Berry-Esseen records for Y_t/sqrt(t) at real horizons.

    sigma comes from the time-1 skeleton; the fractional-part correction
    (Y_t - Y_floor(t))/sqrt(t) is verified negligible via its sample second
    moment against the sup_{v<=1} E[Y_v^2] bound.
    """
    skeleton = ct_sample_skeleton(ct)
    sig2 = variance_series(_centered_skeleton(ct, skeleton))
    if sig2 <= 1e-12:
        raise DegenerateVariance("sigma^2 <= 1e-12 after centering")
    sigma = float(np.sqrt(sig2))
    sup_Yv2 = float(np.max(np.abs(ct.reward)) ** 2)   # |Y_v| <= max|xi| for v <= 1
    records = []
    fractional_ok = True
    for k, t in enumerate(t_list):
        batch = simulate_ct(ct, float(t), paths, seed + k)
        y = batch.terminal_Y[:, 0]
        z = y / (sigma * np.sqrt(t))
        kol = kolmogorov_distance(z)
        records.append(GaussianComparison(
            n=float(t), n_samples=paths, sigma_used=sigma, kolmogorov=kol,
            be_constant=float(np.sqrt(t) * kol), se=ecdf_se(paths)))
        if batch.integer_part_Y is not None:
            frac = (y - batch.integer_part_Y) / np.sqrt(t)
            if float(np.mean(frac ** 2)) > sup_Yv2 / t + 1e-12:
                fractional_ok = False
    return records, fractional_ok
