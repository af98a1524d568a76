"""The three skewed multivariate families (VG, ST, NIG) in unified log form.

Each family is a normal variance-mean mixture V = mu + W*alpha + sqrt(W)*U
with U ~ N(0, Sigma) and a positive mixing law W that depends on the family:
Gamma(psi, psi) for VG, InvGamma(nu/2, nu/2) for ST, InvGaussian(1, kappa)
for NIG.  The conditional law of W given V = v is GIG in all three cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .gig import GigParams
from .special import log_bessel_k

__all__ = [
    "VG",
    "ST",
    "NIG",
    "SkewFamily",
    "SkewParams",
    "UnifiedConstants",
    "unified_constants",
    "skew_log_density",
    "conditional_gig",
    "sample_skew",
    "sample_mixing",
    "unified_log_core",
]

# Bessel argument below which the small-argument expansion of K is used.
_SMALL_BESSEL_ARG = 1e-8


@dataclass(frozen=True)
class VG:
    psi: float

    def __post_init__(self):
        if not self.psi > 0.0:
            raise ValueError("VG concentration psi must be > 0")

    @property
    def concentration(self) -> float:
        return self.psi


@dataclass(frozen=True)
class ST:
    nu: float

    def __post_init__(self):
        if not self.nu > 0.0:
            raise ValueError("ST concentration nu must be > 0")

    @property
    def concentration(self) -> float:
        return self.nu


@dataclass(frozen=True)
class NIG:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError("NIG concentration kappa must be > 0")

    @property
    def concentration(self) -> float:
        return self.kappa


SkewFamily = Union[VG, ST, NIG]


@dataclass(frozen=True)
class UnifiedConstants:
    """Family- and dimension-specific constants of the unified density."""

    p1: float
    p2: float
    p3: float
    p4: float


def unified_constants(family: SkewFamily, d: int) -> UnifiedConstants:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if isinstance(family, VG):
        psi = family.psi
        return UnifiedConstants(0.0, 2.0 * psi, (psi - d / 2.0) / 2.0,
                                psi * np.log(psi) - gammaln(psi) + np.log(2.0))
    if isinstance(family, ST):
        nu = family.nu
        return UnifiedConstants(nu, 0.0, -(nu + d) / 4.0,
                                (nu / 2.0) * np.log(nu / 2.0) - gammaln(nu / 2.0) + np.log(2.0))
    if isinstance(family, NIG):
        kappa = family.kappa
        return UnifiedConstants(1.0, kappa**2, -(1.0 + d) / 4.0,
                                kappa + 0.5 * np.log(2.0 / np.pi))
    raise TypeError(f"unknown skew family: {family!r}")


@dataclass(frozen=True)
class SkewParams:
    """One cluster's skewed-distribution parameters."""

    mu: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray
    family: SkewFamily

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", sigma)
        d = mu.shape[0]
        if mu.ndim != 1 or alpha.shape != (d,) or sigma.shape != (d, d):
            raise ValueError("inconsistent dimensions in SkewParams")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma)[0] <= 0.0:
            raise ValueError("sigma must be positive definite")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def unified_log_core(delta, rho, dalpha, c: UnifiedConstants):
    """Shared exponent of the unified density, without the Gaussian constant.

    Computes dalpha + p3*log(delta+p1) - p3*log(rho+p2) + p4
    + log K_{2 p3}(sqrt((rho+p2)(delta+p1))), with small-Bessel-argument
    asymptotics so the result stays finite at delta -> 0 (and, for ST, at
    rho -> 0) whenever 2 p3 != 0.  Broadcasts over delta/dalpha arrays.
    """
    delta = np.asarray(delta, dtype=float)
    dalpha = np.asarray(dalpha, dtype=float)
    u = rho + c.p2
    v = delta + c.p1
    z2 = u * v
    order = 2.0 * c.p3

    small = z2 < _SMALL_BESSEL_ARG**2
    out = np.empty(np.broadcast_shapes(delta.shape, dalpha.shape), dtype=float)
    any_small = np.any(small)
    if any_small:
        if abs(order) < 1e-12:
            raise ValueError("density limit undefined: VG with psi = d/2 at delta = 0")
        # K_eta(z) ~ Gamma(|eta|)/2 * (z/2)^(-|eta|); the divergent log factors
        # cancel against the p3*log terms, leaving one finite branch per sign.
        const = gammaln(abs(order)) - np.log(2.0) + abs(order) * np.log(2.0) + c.p4
        if c.p3 > 0:
            branch = -order * np.log(u) + const
        else:
            with np.errstate(divide="ignore"):
                branch = order * np.log(v) + const
        vals = np.broadcast_to(np.asarray(dalpha + branch, dtype=float), out.shape)
        out[small] = vals[small]
    big = ~small
    if np.any(big):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.sqrt(z2)
            lk = log_bessel_k(order, np.where(big, z, 1.0))
            term = (dalpha + c.p3 * np.log(np.where(big, v, 1.0))
                    - c.p3 * np.log(u) + c.p4 + lk)
        vals = np.broadcast_to(np.asarray(term, dtype=float), out.shape)
        out[big] = vals[big]
    return out[()] if out.ndim == 0 else out


def _quad_forms(v: np.ndarray, p: SkewParams):
    """(delta, rho, dalpha, logdet) via a Cholesky factorization of Sigma."""
    try:
        chol = linalg.cho_factor(p.sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError("sigma is not positive definite") from exc
    L = chol[0]
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    diff = np.atleast_2d(v) - p.mu
    sol_diff = linalg.solve_triangular(L, diff.T, lower=True)
    sol_alpha = linalg.solve_triangular(L, p.alpha, lower=True)
    delta = np.sum(sol_diff**2, axis=0)
    rho = float(np.dot(sol_alpha, sol_alpha))
    dalpha = sol_diff.T @ sol_alpha
    return delta, rho, dalpha, logdet


def skew_log_density(v, params: SkewParams):
    """log density of the skewed family at v; v may be (d,) or (n, d)."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    if v.shape[-1] != params.dim:
        raise ValueError("dimension mismatch between v and params")
    delta, rho, dalpha, logdet = _quad_forms(v, params)
    c = unified_constants(params.family, params.dim)
    core = unified_log_core(delta, rho, dalpha, c)
    out = core - 0.5 * params.dim * np.log(2.0 * np.pi) - 0.5 * logdet
    return float(out[0]) if single else out


def conditional_gig(v, params: SkewParams) -> GigParams:
    """Conditional law of the latent mixing variable W given V = v."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != params.dim:
        raise ValueError("v must be a vector of the params dimension")
    delta, rho, _, _ = _quad_forms(v, params)
    delta = float(delta[0])
    d = params.dim
    fam = params.family
    if isinstance(fam, VG):
        return GigParams(rho + 2.0 * fam.psi, delta, fam.psi - d / 2.0)
    if isinstance(fam, ST):
        return GigParams(rho, delta + fam.nu, -(fam.nu + d) / 2.0)
    if isinstance(fam, NIG):
        return GigParams(rho + fam.kappa**2, delta + 1.0, -(1.0 + d) / 2.0)
    raise TypeError(f"unknown skew family: {fam!r}")


def sample_mixing(family: SkewFamily, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of the positive mixing variable W for one family."""
    if isinstance(family, VG):
        return rng.gamma(shape=family.psi, scale=1.0 / family.psi, size=n)
    if isinstance(family, ST):
        return 1.0 / rng.gamma(shape=family.nu / 2.0, scale=2.0 / family.nu, size=n)
    if isinstance(family, NIG):
        # InvGaussian(1, kappa) has mean 1/kappa and shape 1.
        return rng.wald(1.0 / family.kappa, 1.0, size=n)
    raise TypeError(f"unknown skew family: {family!r}")


def sample_skew(params: SkewParams, n: int, seed: int) -> np.ndarray:
    """n draws of V = mu + W*alpha + sqrt(W)*chol(Sigma)*z; seed-deterministic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    w = sample_mixing(params.family, n, rng)
    z = rng.standard_normal((n, params.dim))
    chol = np.linalg.cholesky(params.sigma)
    return params.mu + w[:, None] * params.alpha + np.sqrt(w)[:, None] * (z @ chol.T)
