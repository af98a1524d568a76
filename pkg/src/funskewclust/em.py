"""EM engine: posterior/latent-moment E-step, closed-form M-step, model search."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import brentq
from scipy.special import digamma as _digamma
from scipy.special import logsumexp

from .funbasis import FunctionalDataset
from .gig import gig_moments, invgamma_expectations
from .model import (SPURIOUS_EIGENVALUE, ClusterModel, FitResult,
                    ParsimonyConfig, XClusterParams, YClusterParams,
                    count_free_params, sigma_y_project)
from .skewdist import NIG, ST, VG, SkewFamily, unified_constants, unified_log_core

__all__ = [
    "ESuffStats",
    "StopState",
    "EmptyClusterError",
    "NumericalBreakdownError",
    "FitError",
    "h_k",
    "e_step",
    "m_step",
    "solve_concentration",
    "log_likelihood",
    "aitken_converged",
    "cattell_select",
    "initialize",
    "fit",
    "select_model",
    "bic",
    "map_classify",
]

_DELTA_FLOOR = 1e-12
_RHO_FLOOR = 1e-12


class EmptyClusterError(RuntimeError):
    """A cluster's soft size fell below the usable floor; restart signal."""


class NumericalBreakdownError(RuntimeError):
    """A density evaluation became non-finite; carries the (i, k) location."""


class FitError(RuntimeError):
    """All EM starts failed; carries the per-start causes."""


@dataclass
class ESuffStats:
    t: np.ndarray
    w_x: np.ndarray
    wi_x: np.ndarray
    lw_x: np.ndarray
    w_y: np.ndarray
    wi_y: np.ndarray
    lw_y: np.ndarray


@dataclass
class StopState:
    history: List[float]
    tol: float = 1e-6
    max_iter: int = 200


# ---------------------------------------------------------------------------
# Geometry: the quadratic forms of Proposition 1 via the a/b eigen-split.
# ---------------------------------------------------------------------------

def _x_side_forms(data: FunctionalDataset, x: XClusterParams):
    """delta_X (n,), rho_X (scalar), dalpha_X (n,) in the W^{1/2} metric."""
    wm = (data.c_x - x.mu_x) @ data.w_x_sqrt          # rows: W^{1/2}(c - mu)
    wa = data.w_x_sqrt @ x.alpha_x
    proj_m = wm @ x.u                                  # (n, d)
    proj_a = x.u.T @ wa                                # (d,)
    inv_a = 1.0 / x.a
    inv_b = 1.0 / x.b
    m_sq = np.einsum("ij,ij->i", wm, wm)
    a_sq = float(wa @ wa)
    delta = proj_m**2 @ inv_a + (m_sq - np.einsum("ij,ij->i", proj_m, proj_m)) * inv_b
    rho = float(proj_a**2 @ inv_a + (a_sq - proj_a @ proj_a) * inv_b)
    dalpha = (proj_m * inv_a) @ proj_a + (wm @ wa - proj_m @ proj_a) * inv_b
    return delta, rho, dalpha


def _y_side_forms(data: FunctionalDataset, y: YClusterParams, c_star: np.ndarray):
    """delta_Y (n,), rho_Y, dalpha_Y (n,), logdet Sigma_Y."""
    try:
        L = linalg.cholesky(y.sigma_y, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalBreakdownError("sigma_y not positive definite") from exc
    resid = data.c_y - c_star @ y.gamma_star.T
    sol_r = linalg.solve_triangular(L, resid.T, lower=True)
    sol_a = linalg.solve_triangular(L, y.alpha_y, lower=True)
    delta = np.sum(sol_r**2, axis=0)
    rho = float(sol_a @ sol_a)
    dalpha = sol_r.T @ sol_a
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return delta, rho, dalpha, logdet


def _c_star(data: FunctionalDataset) -> np.ndarray:
    """Augmented covariate rows (W_X c_X, 1)."""
    return np.hstack([data.c_x @ data.w_x, np.ones((data.n, 1))])


def _h_matrix(data: FunctionalDataset, model: ClusterModel) -> np.ndarray:
    """H_ik for all observations and clusters (n x K)."""
    n, K = data.n, model.K
    c_star = _c_star(data)
    H = np.empty((n, K))
    for k in range(K):
        xk, yk = model.x_params[k], model.y_params[k]
        dx, rx, dax = _x_side_forms(data, xk)
        dy, ry, day, logdet_y = _y_side_forms(data, yk, c_star)
        cx = unified_constants(xk.family_x, data.r_x)
        cy = unified_constants(yk.family_y, data.r_y)
        core_x = unified_log_core(dx, rx, dax, cx)
        core_y = unified_log_core(dy, ry, day, cy)
        const = (np.log(model.pi[k])
                 - 0.5 * (np.sum(np.log(xk.a))
                          + (data.r_x - xk.d) * np.log(xk.b)
                          + logdet_y))
        H[:, k] = const + core_x + core_y
    return H


def h_k(data: FunctionalDataset, model: ClusterModel, k: int) -> np.ndarray:
    """H_k values for one cluster across all observations."""
    return _h_matrix(data, model)[:, k]


def _loglik_constant(data: FunctionalDataset) -> float:
    sign, logdet_w = np.linalg.slogdet(data.w_x)
    if sign <= 0:
        raise NumericalBreakdownError("Gram matrix W_X is not positive definite")
    return -0.5 * (data.r_x + data.r_y) * np.log(2.0 * np.pi) + 0.5 * logdet_w


def log_likelihood(data: FunctionalDataset, model: ClusterModel) -> float:
    """Observed-data log-likelihood."""
    H = _h_matrix(data, model)
    return float(np.sum(logsumexp(H, axis=1)) + data.n * _loglik_constant(data))


def _conditional_moments(delta: np.ndarray, rho: float, family: SkewFamily, d: int):
    """Posterior (E[W], E[1/W], E[log W]) arrays for one cluster and side."""
    delta = np.maximum(delta, _DELTA_FLOOR)
    if isinstance(family, VG):
        return gig_moments(rho + 2.0 * family.psi, delta, family.psi - d / 2.0)
    if isinstance(family, ST):
        lam = -(family.nu + d) / 2.0
        if rho < _RHO_FLOOR:
            return invgamma_expectations(delta + family.nu, lam)
        return gig_moments(rho, delta + family.nu, lam)
    if isinstance(family, NIG):
        return gig_moments(rho + family.kappa**2, delta + 1.0, -(1.0 + d) / 2.0)
    raise TypeError(f"unknown skew family: {family!r}")


def e_step(data: FunctionalDataset, model: ClusterModel) -> ESuffStats:
    stats, _ = _e_step_with_h(data, model)
    return stats


def _e_step_with_h(data: FunctionalDataset, model: ClusterModel):
    n, K = data.n, model.K
    c_star = _c_star(data)
    H = np.empty((n, K))
    w_x = np.empty((n, K)); wi_x = np.empty((n, K)); lw_x = np.empty((n, K))
    w_y = np.empty((n, K)); wi_y = np.empty((n, K)); lw_y = np.empty((n, K))
    for k in range(K):
        xk, yk = model.x_params[k], model.y_params[k]
        dx, rx, dax = _x_side_forms(data, xk)
        dy, ry, day, logdet_y = _y_side_forms(data, yk, c_star)
        cx = unified_constants(xk.family_x, data.r_x)
        cy = unified_constants(yk.family_y, data.r_y)
        const = (np.log(model.pi[k])
                 - 0.5 * (np.sum(np.log(xk.a)) + (data.r_x - xk.d) * np.log(xk.b) + logdet_y))
        H[:, k] = const + unified_log_core(dx, rx, dax, cx) + unified_log_core(dy, ry, day, cy)
        w_x[:, k], wi_x[:, k], lw_x[:, k] = _conditional_moments(dx, rx, xk.family_x, data.r_x)
        w_y[:, k], wi_y[:, k], lw_y[:, k] = _conditional_moments(dy, ry, yk.family_y, data.r_y)
    if not np.all(np.isfinite(H)):
        i, k = np.argwhere(~np.isfinite(H))[0]
        raise NumericalBreakdownError(f"non-finite component density at observation {i}, cluster {k}")
    t = np.exp(H - logsumexp(H, axis=1, keepdims=True))
    return ESuffStats(t, w_x, wi_x, lw_x, w_y, wi_y, lw_y), H


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def _concentration_gap(x):
    """g(x) = log x + 1 - digamma(x); strictly decreasing from +inf to 1."""
    return np.log(x) + 1.0 - _digamma(x)


def solve_concentration(kind: str, stat: float) -> float:
    """Root of the concentration score equation on a bracketed interval.

    kind "vg": psi solves log(psi)+1-DG(psi) = w_bar - lw_bar, stat being the
    right side.  kind "st": nu/2 solves the same gap equation with stat =
    lw_bar + wi_bar.  The gap function is strictly monotone, so the root is
    unique; statistics outside its range clamp to the bracket end.
    """
    if kind not in ("vg", "st"):
        raise ValueError(f"unknown concentration equation kind {kind!r}")
    if not np.isfinite(stat):
        raise ValueError("concentration statistic must be finite")
    lo, hi = 1e-6, 1e6
    f = lambda x: _concentration_gap(x) - stat
    if f(lo) <= 0.0:
        warnings.warn("concentration statistic below bracket; clamping", RuntimeWarning)
        root = lo
    elif f(hi) >= 0.0:
        warnings.warn("concentration statistic above bracket; clamping", RuntimeWarning)
        root = hi
    else:
        root = brentq(f, lo, hi, xtol=1e-12, rtol=1e-12)
    return root if kind == "vg" else 2.0 * root


def cattell_select(eigenvalues: np.ndarray, threshold: float) -> int:
    """Scree-test dimension: largest gap index whose gap ratio clears threshold."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size < 2:
        raise ValueError("need at least two eigenvalues")
    gaps = ev[:-1] - ev[1:]
    max_gap = gaps.max()
    if max_gap <= 0.0:
        return 1
    ratios = gaps / max_gap
    idx = np.nonzero(ratios >= threshold)[0]
    d = int(idx[-1]) + 1 if idx.size else 1
    return int(np.clip(d, 1, ev.size - 1))


def aitken_converged(state: StopState) -> bool:
    """Aitken-accelerated stopping rule on the last three log-likelihoods."""
    h = state.history
    if len(h) < 3:
        return False
    l0, l1, l2 = h[-3], h[-2], h[-1]
    d1, d0 = l2 - l1, l1 - l0
    if abs(d0) < 1e-14 or abs(d1) < 1e-14:
        return True
    a = d1 / d0
    if a >= 1.0:
        return False
    l_inf = l1 + d1 / (1.0 - a)
    return abs(l_inf - l1) < state.tol


def _pool_flm(a_list, b_list, dims, n_k, variant: str):
    """Tie subspace variances within/between clusters per the FLM variant."""
    K = len(a_list)
    a_list = [np.asarray(a, dtype=float) for a in a_list]
    a_style = variant[:2] if not variant.startswith("Akj") else "Akj"
    b_common = "Bk" not in variant
    if a_style == "Ak":
        a_list = [np.full(dims[k], a_list[k].mean()) for k in range(K)]
    elif a_style == "A":
        num = sum(n_k[k] * a_list[k].sum() for k in range(K))
        den = sum(n_k[k] * dims[k] for k in range(K))
        a_list = [np.full(dims[k], num / den) for k in range(K)]
    if b_common:
        b = float(np.sum(np.asarray(n_k) * np.asarray(b_list)) / np.sum(n_k))
        b_list = [b] * K
    return a_list, list(map(float, b_list))


def _solve_gamma(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gamma* = lhs @ rhs^{-1} with diagonal equilibration for conditioning.

    rhs is symmetric positive (semi)definite; scaling by the square roots of
    its diagonal keeps the solve accurate despite the large spread in
    coefficient magnitudes.  Falls back to a pseudo-inverse on rank loss.
    """
    scale = np.sqrt(np.clip(np.diag(rhs), 1e-300, None))
    rhs_s = rhs / np.outer(scale, scale)
    lhs_s = lhs / scale
    try:
        sol = linalg.solve(rhs_s, lhs_s.T, assume_a="sym")
    except linalg.LinAlgError:
        warnings.warn("rank-deficient regression system; pseudo-inverse solution",
                      RuntimeWarning)
        sol, _, _, _ = linalg.lstsq(rhs_s, lhs_s.T, lapack_driver="gelsd")
    return (sol / scale[:, None]).T


def m_step(data: FunctionalDataset, stats: ESuffStats, config: ParsimonyConfig,
           families_x: Sequence[SkewFamily], families_y: Sequence[SkewFamily],
           threshold: Optional[float] = None,
           d_fixed: Optional[Sequence[int]] = None) -> ClusterModel:
    """Closed-form parameter updates given the current sufficient statistics.

    families_* carry the previous concentration values only to tag the family
    type; concentrations are re-estimated here.
    """
    t = stats.t
    n, K = t.shape
    r_x, r_y = data.r_x, data.r_y
    n_k = t.sum(axis=0)
    if np.any(n_k < 2.0):
        raise EmptyClusterError(f"cluster sizes {n_k.round(3).tolist()} below floor")
    c_star = _c_star(data)
    pi = n_k / n

    x_params: List[XClusterParams] = []
    y_raw: List[dict] = []
    s_y_list: List[np.ndarray] = []
    a_list, b_list, dims = [], [], []
    u_list, mu_list, alpha_list = [], [], []

    for k in range(K):
        tk = t[:, k]
        w, wi = stats.w_x[:, k], stats.wi_x[:, k]
        sum_tw = float(tk @ w)
        sum_twi = float(tk @ wi)
        w_bar = sum_tw / n_k[k]
        den = w_bar * sum_twi - n_k[k]
        if abs(den) < 1e-12 * n_k[k]:
            # Normal limit: all conditional weights equal; mean/zero fallback.
            mu = (tk @ data.c_x) / n_k[k]
            alpha = np.zeros(r_x)
        else:
            mu = ((tk * (wi * w_bar - 1.0)) @ data.c_x) / den
            wi_bar = sum_twi / n_k[k]
            alpha = ((tk * (wi_bar - wi)) @ data.c_x) / den
        diff = data.c_x - mu
        s_x = ((tk * wi)[:, None] * diff).T @ diff / n_k[k]
        s_x += (sum_tw / n_k[k]) * np.outer(alpha, alpha)
        cross = (tk @ diff) / n_k[k]
        s_x -= np.outer(cross, alpha) + np.outer(alpha, cross)

        m_mat = data.w_x_sqrt @ s_x @ data.w_x_sqrt
        m_mat = 0.5 * (m_mat + m_mat.T)
        evals, evecs = np.linalg.eigh(m_mat)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        evals = np.clip(evals, _DELTA_FLOOR, None)
        if d_fixed is not None:
            d = int(d_fixed[k])
        else:
            d = cattell_select(evals, 0.2 if threshold is None else threshold)
        d = int(np.clip(d, 1, r_x - 1))
        a = evals[:d]
        b = max(float((evals.sum() - a.sum()) / (r_x - d)), _DELTA_FLOOR)
        mu_list.append(mu); alpha_list.append(alpha)
        u_list.append(evecs[:, :d]); a_list.append(a); b_list.append(b); dims.append(d)

        # Y side
        wy, wiy = stats.w_y[:, k], stats.wi_y[:, k]
        sum_t_cy = tk @ data.c_y
        sum_t_cs = tk @ c_star
        r_s = c_star.shape[1]
        den_y = (float(tk @ wy) / n_k[k]) * float(tk @ wiy) - n_k[k]
        if abs(den_y) < 1e-12 * n_k[k]:
            # Normal limit: the skewness column coincides with the intercept
            # column, so drop it and fit a plain weighted regression.
            gamma_star = _solve_gamma(
                ((tk * wiy)[:, None] * data.c_y).T @ c_star,
                ((tk * wiy)[:, None] * c_star).T @ c_star)
            alpha_y = np.zeros(r_y)
        else:
            # Joint stationary system for (Gamma*, alpha_Y): appending the
            # total latent-weight column to the weighted normal equations
            # solves both blocks at once and avoids the ill-conditioned
            # explicit correction.
            m_sys = np.empty((r_s + 1, r_s + 1))
            m_sys[:r_s, :r_s] = ((tk * wiy)[:, None] * c_star).T @ c_star
            m_sys[:r_s, r_s] = sum_t_cs
            m_sys[r_s, :r_s] = sum_t_cs
            m_sys[r_s, r_s] = float(tk @ wy)
            rhs_sys = np.hstack([((tk * wiy)[:, None] * data.c_y).T @ c_star,
                                 sum_t_cy[:, None]])
            theta = _solve_gamma(rhs_sys, m_sys)
            gamma_star = theta[:, :r_s]
            alpha_y = theta[:, r_s]
        resid = data.c_y - c_star @ gamma_star.T
        s_y = ((tk * wiy)[:, None] * resid).T @ resid / n_k[k]
        s_y += (float(tk @ wy) / n_k[k]) * np.outer(alpha_y, alpha_y)
        cross_y = (tk @ resid) / n_k[k]
        s_y -= np.outer(cross_y, alpha_y) + np.outer(alpha_y, cross_y)
        s_y = 0.5 * (s_y + s_y.T)
        s_y_list.append(s_y)
        y_raw.append({"gamma_star": gamma_star, "alpha_y": alpha_y})

    a_list, b_list = _pool_flm(a_list, b_list, dims, n_k, config.flm_variant)
    sigma_y_list = sigma_y_project(s_y_list, n_k, config.sigma_y_family)

    conc_x = _update_concentrations(t, stats.w_x, stats.wi_x, stats.lw_x,
                                    families_x, config.common_psi_x)
    conc_y = _update_concentrations(t, stats.w_y, stats.wi_y, stats.lw_y,
                                    families_y, config.common_psi_y)

    for k in range(K):
        x_params.append(XClusterParams(mu_x=mu_list[k], alpha_x=alpha_list[k],
                                       u=u_list[k], a=np.sort(a_list[k])[::-1],
                                       b=b_list[k], family_x=conc_x[k]))
    y_params = [YClusterParams(gamma_star=y_raw[k]["gamma_star"],
                               alpha_y=y_raw[k]["alpha_y"],
                               sigma_y=sigma_y_list[k],
                               family_y=conc_y[k]) for k in range(K)]
    return ClusterModel(pi=pi, x_params=x_params, y_params=y_params, parsimony=config)


def _update_concentrations(t, w, wi, lw, families, common: bool):
    """Per-cluster (or tied) concentration updates for one side."""
    K = t.shape[1]
    n_k = t.sum(axis=0)
    fam0 = families[0]
    if common and not all(type(f) is type(fam0) for f in families):
        raise ValueError("tied concentration requires one family type per side")
    out: List[SkewFamily] = []
    if isinstance(fam0, NIG) or any(isinstance(f, NIG) for f in families):
        pass  # handled per-cluster below
    if common:
        n = t.shape[0]
        if isinstance(fam0, VG):
            stat = float(np.sum(t * (w - lw)) / n)
            psi = solve_concentration("vg", stat)
            return [VG(psi) for _ in range(K)]
        if isinstance(fam0, ST):
            stat = float(np.sum(t * (lw + wi)) / n)
            nu = solve_concentration("st", stat)
            return [ST(nu) for _ in range(K)]
        if isinstance(fam0, NIG):
            kappa = float(n / np.sum(t * w))
            return [NIG(kappa) for _ in range(K)]
        raise TypeError(f"unknown family {fam0!r}")
    for k in range(K):
        fam = families[k]
        if isinstance(fam, VG):
            stat = float(t[:, k] @ (w[:, k] - lw[:, k]) / n_k[k])
            out.append(VG(solve_concentration("vg", stat)))
        elif isinstance(fam, ST):
            stat = float(t[:, k] @ (lw[:, k] + wi[:, k]) / n_k[k])
            out.append(ST(solve_concentration("st", stat)))
        elif isinstance(fam, NIG):
            out.append(NIG(float(n_k[k] / (t[:, k] @ w[:, k]))))
        else:
            raise TypeError(f"unknown family {fam!r}")
    return out


# ---------------------------------------------------------------------------
# Initialization and the fit orchestrator
# ---------------------------------------------------------------------------

def _lloyd_kmeans(points: np.ndarray, K: int, rng: np.random.Generator,
                  restarts: int = 20, max_iter: int = 100) -> np.ndarray:
    """Plain seeded Lloyd iterations; returns hard labels of the best restart."""
    n = points.shape[0]
    best_labels, best_cost = None, np.inf
    for _ in range(restarts):
        centers = points[rng.choice(n, size=K, replace=False)]
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iter):
            d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            for k in range(K):
                if not np.any(new_labels == k):
                    new_labels[d2[np.arange(n), new_labels].argmax()] = k
            if np.array_equal(new_labels, labels) and _ > 0:
                break
            labels = new_labels
            centers = np.stack([points[labels == k].mean(axis=0) for k in range(K)])
        cost = ((points - centers[labels]) ** 2).sum()
        if cost < best_cost:
            best_cost, best_labels = cost, labels.copy()
    return best_labels


def _ensure_min_size(labels: np.ndarray, points: np.ndarray, K: int,
                     min_size: int = 2) -> np.ndarray:
    """Top up undersized clusters with their nearest points from larger ones.

    Heavy-tailed data can make a hard initialization isolate a single outlier,
    which would leave that cluster too small to estimate anything.
    """
    counts = np.bincount(labels, minlength=K)
    for k in range(K):
        while counts[k] < min_size:
            members = np.nonzero(labels == k)[0]
            center = (points[members].mean(axis=0) if members.size
                      else points.mean(axis=0))
            donor_mask = (labels != k) & (counts[labels] > min_size)
            donors = np.nonzero(donor_mask)[0]
            if donors.size == 0:
                break
            d2 = ((points[donors] - center) ** 2).sum(axis=1)
            j = donors[d2.argmin()]
            counts[labels[j]] -= 1
            labels[j] = k
            counts[k] += 1
    return labels


def initialize(data: FunctionalDataset, K: int, strategy: str = "kmeans",
               seed: int = 0) -> ESuffStats:
    """Hard initial responsibilities plus neutral latent moments (w = 1/w = 1)."""
    if K < 1 or K > data.n:
        raise ValueError("K must be between 1 and n")
    rng = np.random.default_rng(seed)
    n = data.n
    points = np.hstack([data.c_x, data.c_y])
    if K == 1:
        labels = np.zeros(n, dtype=int)
    elif strategy == "kmeans":
        # Standardize coordinates for the distance computation only, so that
        # no single large-scale coefficient (or outlier) dominates the split.
        scale = points.std(axis=0)
        scale[scale == 0.0] = 1.0
        labels = _lloyd_kmeans((points - points.mean(axis=0)) / scale, K, rng)
    elif strategy == "random":
        labels = rng.integers(0, K, size=n)
        for k in range(K):
            if not np.any(labels == k):
                labels[rng.integers(0, n)] = k
    else:
        raise ValueError(f"unknown initialization strategy {strategy!r}")
    if K > 1 and n >= 2 * K:
        labels = _ensure_min_size(labels, points, K)
    t = np.zeros((n, K))
    t[np.arange(n), labels] = 1.0
    ones = np.ones((n, K))
    return ESuffStats(t=t, w_x=ones.copy(), wi_x=ones.copy(), lw_x=np.zeros((n, K)),
                      w_y=ones.copy(), wi_y=ones.copy(), lw_y=np.zeros((n, K)))


_INIT_CONCENTRATION = 10.0
_INIT_ALPHA = 10.0


def _weighted_cov(x: np.ndarray, w: np.ndarray):
    wsum = w.sum()
    mean = (w @ x) / wsum
    diff = x - mean
    cov = (w[:, None] * diff).T @ diff / wsum
    return mean, 0.5 * (cov + cov.T)


def _initial_model(data: FunctionalDataset, stats: ESuffStats,
                   config: ParsimonyConfig,
                   family_x_name: str, family_y_name: str,
                   threshold: Optional[float],
                   d_fixed: Optional[Sequence[int]]) -> ClusterModel:
    """Starting parameters: weighted moments, skewness and concentration at 10."""
    from .model import family_from_name

    t = stats.t
    n, K = t.shape
    n_k = t.sum(axis=0)
    if np.any(n_k < 2.0):
        raise EmptyClusterError(f"initial cluster sizes {n_k.tolist()} below floor")
    c_star = _c_star(data)
    x_params, y_params = [], []
    for k in range(K):
        tk = t[:, k]
        mu, s_x = _weighted_cov(data.c_x, tk)
        s_x += 1e-10 * max(np.trace(s_x) / data.r_x, 1.0) * np.eye(data.r_x)
        m_mat = data.w_x_sqrt @ s_x @ data.w_x_sqrt
        m_mat = 0.5 * (m_mat + m_mat.T)
        evals, evecs = np.linalg.eigh(m_mat)
        evals, evecs = np.clip(evals[::-1], _DELTA_FLOOR, None), evecs[:, ::-1]
        if d_fixed is not None:
            d = int(d_fixed[k])
        else:
            d = cattell_select(evals, 0.2 if threshold is None else threshold)
        d = int(np.clip(d, 1, data.r_x - 1))
        a = evals[:d]
        b = max(float((evals.sum() - a.sum()) / (data.r_x - d)), _DELTA_FLOOR)
        x_params.append(XClusterParams(
            mu_x=mu, alpha_x=np.full(data.r_x, _INIT_ALPHA),
            u=evecs[:, :d], a=a, b=b,
            family_x=family_from_name(family_x_name, _INIT_CONCENTRATION)))
        # Weighted least squares for the regression block.
        sw = np.sqrt(tk)
        gamma_star = _solve_gamma((sw[:, None] * data.c_y).T @ (sw[:, None] * c_star),
                                  (sw[:, None] * c_star).T @ (sw[:, None] * c_star))
        resid = data.c_y - c_star @ gamma_star.T
        _, s_y = _weighted_cov(resid, tk)
        s_y += 1e-10 * max(np.trace(s_y) / data.r_y, 1.0) * np.eye(data.r_y)
        y_params.append(YClusterParams(
            gamma_star=gamma_star, alpha_y=np.full(data.r_y, _INIT_ALPHA),
            sigma_y=s_y,
            family_y=family_from_name(family_y_name, _INIT_CONCENTRATION)))
    return ClusterModel(pi=n_k / n, x_params=x_params, y_params=y_params,
                        parsimony=config)


def bic(loglik: float, tau: int, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return loglik - 0.5 * tau * np.log(n)


def map_classify(t: np.ndarray) -> np.ndarray:
    """Row argmax; ties resolve to the lowest cluster index."""
    return np.argmax(t, axis=1)


def fit(data: FunctionalDataset, K: int, config: ParsimonyConfig,
        family_x: str = "VG", family_y: str = "VG",
        n_starts: int = 1, seed: int = 0,
        threshold: Optional[float] = None, d_fixed: Optional[Sequence[int]] = None,
        max_iter: int = 200, tol: float = 1e-6,
        init: str = "kmeans", verbose: bool = False) -> FitResult:
    """Multi-start EM; keeps the start with the highest BIC."""
    best: Optional[FitResult] = None
    causes: List[str] = []
    for start in range(n_starts):
        try:
            result = _fit_one(data, K, config, family_x, family_y,
                              seed=seed + start, threshold=threshold,
                              d_fixed=d_fixed, max_iter=max_iter, tol=tol,
                              init=init, verbose=verbose)
        except (EmptyClusterError, NumericalBreakdownError) as exc:
            causes.append(f"start {start}: {exc}")
            continue
        if best is None or result.bic > best.bic:
            best = result
    if best is None:
        raise FitError("all EM starts failed: " + "; ".join(causes))
    return best


def _fit_one(data: FunctionalDataset, K: int, config: ParsimonyConfig,
             family_x: str, family_y: str, seed: int,
             threshold: Optional[float], d_fixed: Optional[Sequence[int]],
             max_iter: int, tol: float, init: str, verbose: bool) -> FitResult:
    stats = initialize(data, K, strategy=init, seed=seed)
    model = _initial_model(data, stats, config, family_x, family_y, threshold, d_fixed)
    state = StopState(history=[], tol=tol, max_iter=max_iter)
    trace: List[float] = []
    const = data.n * _loglik_constant(data)
    n_iter = 0
    converged = False
    prev_model, prev_stats = model, stats
    for m in range(max_iter):
        stats, H = _e_step_with_h(data, model)
        loglik = float(np.sum(logsumexp(H, axis=1)) + const)
        if trace and loglik < trace[-1] - 1e-10 * abs(trace[-1]):
            # Ascent lost to numerics: the iterate is drifting toward a
            # degenerate (unbounded-likelihood) configuration.  Keep the
            # previous iterate, which attained the running maximum.
            model, stats = prev_model, prev_stats
            break
        trace.append(loglik)
        state.history = trace
        n_iter = m + 1
        if verbose:
            print(f"iter={n_iter} loglik={loglik:.6f} min_nk={stats.t.sum(axis=0).min():.3f}")
        if aitken_converged(state):
            converged = True
            break
        prev_model, prev_stats = model, stats
        model = m_step(data, stats, config,
                       [x.family_x for x in model.x_params],
                       [y.family_y for y in model.y_params],
                       threshold=threshold, d_fixed=d_fixed)
    eigs = [np.linalg.eigvalsh(y.sigma_y)[0] for y in model.y_params]
    if min(eigs) < SPURIOUS_EIGENVALUE:
        raise NumericalBreakdownError("spurious cluster: sigma_y eigenvalue below 1e-20")
    tau = count_free_params(K, data.r_x, data.r_y, [x.d for x in model.x_params], config)
    fit_bic = bic(trace[-1], tau, data.n)
    labels = map_classify(stats.t)
    return FitResult(model=model, t=stats.t, loglik_trace=np.asarray(trace),
                     bic=fit_bic, labels=labels, n_iter=n_iter, converged=converged)


def select_model(data: FunctionalDataset, K_grid: Sequence[int],
                 configs: Sequence[ParsimonyConfig],
                 family_pairs: Sequence[Tuple[str, str]],
                 thresholds: Sequence[float] = (0.2,),
                 n_starts: int = 1, seed: int = 0, max_iter: int = 200,
                 tol: float = 1e-6, init: str = "kmeans",
                 verbose: bool = False) -> FitResult:
    """Exhaustive BIC search over the model grid; failed cells are skipped."""
    if not (len(K_grid) and len(configs) and len(family_pairs) and len(thresholds)):
        raise ValueError("all grids must be nonempty")
    best: Optional[FitResult] = None
    table: List[Dict] = []
    for K in K_grid:
        for config in configs:
            for fx, fy in family_pairs:
                for thr in thresholds:
                    row = {"K": K, "flm_variant": config.flm_variant,
                           "sigma_y_family": config.sigma_y_family,
                           "family_x": fx, "family_y": fy, "threshold": thr}
                    try:
                        res = fit(data, K, config, fx, fy, n_starts=n_starts,
                                  seed=seed, threshold=thr, max_iter=max_iter,
                                  tol=tol, init=init, verbose=verbose)
                    except FitError as exc:
                        row.update(bic=None, status=str(exc))
                        table.append(row)
                        continue
                    row.update(bic=res.bic, status="ok")
                    table.append(row)
                    if best is None or res.bic > best.bic:
                        best = res
    if best is None:
        raise FitError("every grid cell failed")
    best.bic_table = table
    return best
