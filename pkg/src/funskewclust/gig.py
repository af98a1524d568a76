"""Generalized inverse Gaussian laws and their conditional-expectation queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .special import digamma, dlog_bessel_k_dlambda, log_bessel_k

__all__ = [
    "GigParams",
    "gig_expectations",
    "gig_moments",
    "gamma_expectations",
    "invgamma_expectations",
    "gig_log_pdf",
]


@dataclass(frozen=True)
class GigParams:
    """Parameters (a, b, lambda) of a GIG law.

    b = 0 with lam > 0 is the Gamma degenerate case; a = 0 is rejected here
    (the inverse-Gamma degenerate case is handled at the call sites that can
    reach it).
    """

    a: float
    b: float
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.isfinite(self.lam)):
            raise ValueError("GigParams requires finite parameters")
        if self.a <= 0.0:
            raise ValueError("GigParams requires a > 0")
        if self.b < 0.0:
            raise ValueError("GigParams requires b >= 0")
        if self.b == 0.0 and self.lam <= 0.0:
            raise ValueError("GigParams with b = 0 requires lambda > 0")


def gig_moments(a, b, lam):
    """(E[W], E[1/W], E[log W]) for W ~ GIG(a, b, lam); broadcasts over a, b.

    Bessel ratios are computed as exp of log differences so that large
    arguments neither overflow nor underflow.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.sqrt(a * b)
    log_k = log_bessel_k(lam, x)
    half_log_ba = 0.5 * (np.log(b) - np.log(a))
    e_w = np.exp(half_log_ba + log_bessel_k(lam + 1.0, x) - log_k)
    # E[W^p] = (b/a)^{p/2} K_{lam+p}/K_lam; the p = -1 form avoids the
    # cancellation of the equivalent K_{lam+1}/K_lam - 2 lam/b recurrence.
    e_inv_w = np.exp(-half_log_ba + log_bessel_k(lam - 1.0, x) - log_k)
    e_log_w = half_log_ba + dlog_bessel_k_dlambda(lam, x)
    return e_w, e_inv_w, e_log_w


def gig_expectations(p: GigParams):
    """(E[W], E[1/W], E[log W]) for a single GIG law; requires b > 0."""
    if p.b <= 0.0:
        raise ValueError("gig_expectations requires b > 0; use gamma_expectations")
    e_w, e_inv_w, e_log_w = gig_moments(p.a, p.b, p.lam)
    return float(e_w), float(e_inv_w), float(e_log_w)


def gamma_expectations(a, lam):
    """Moments of the b = 0 degenerate case: W ~ Gamma(shape=lam, rate=a/2)."""
    a = np.asarray(a, dtype=float)
    lam = float(lam)
    if lam <= 0.0:
        raise ValueError("gamma_expectations requires lambda > 0")
    rate = a / 2.0
    e_w = lam / rate
    e_inv_w = rate / (lam - 1.0) if lam > 1.0 else np.inf * np.ones_like(rate)
    e_log_w = digamma(lam) - np.log(rate)
    return e_w, e_inv_w, e_log_w


def invgamma_expectations(b, lam):
    """Moments of the a = 0 degenerate case: W ~ InvGamma(shape=-lam, rate=b/2)."""
    b = np.asarray(b, dtype=float)
    lam = float(lam)
    if lam >= 0.0:
        raise ValueError("invgamma_expectations requires lambda < 0")
    shape = -lam
    scale = b / 2.0
    e_w = scale / (shape - 1.0) if shape > 1.0 else np.inf * np.ones_like(scale)
    e_inv_w = shape / scale
    e_log_w = np.log(scale) - digamma(shape)
    return e_w, e_inv_w, e_log_w


def gig_log_pdf(w, p: GigParams):
    """log density of GIG(a, b, lam) at w > 0."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("gig_log_pdf requires w > 0")
    x = np.sqrt(p.a * p.b)
    return (0.5 * p.lam * (np.log(p.a) - np.log(p.b))
            + (p.lam - 1.0) * np.log(w)
            - np.log(2.0) - log_bessel_k(p.lam, x)
            - 0.5 * (p.a * w + p.b / w))
