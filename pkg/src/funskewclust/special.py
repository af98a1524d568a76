"""Scaled modified Bessel functions of the third kind and related helpers.

All density work elsewhere in the package happens in the log domain, so the
primitives here return logarithms directly.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sp

__all__ = ["log_bessel_k", "dlog_bessel_k_dlambda", "digamma"]

# Step for the finite-difference order derivative of log K_lambda.
_FD_STEP = 1e-4


def _log_kv_debye(lam: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Uniform asymptotic (Debye) expansion of log K_lam(x) for large |lam|.

    Two correction terms; relative accuracy ~1e-10 for |lam| >= 50.
    """
    lam = np.abs(lam)
    z = x / lam
    s = np.sqrt(1.0 + z * z)
    eta = s + np.log(z / (1.0 + s))
    t = 1.0 / s
    u1 = (3.0 * t - 5.0 * t**3) / 24.0
    u2 = (81.0 * t**2 - 462.0 * t**4 + 385.0 * t**6) / 1152.0
    # The polynomial terms enter with alternating signs for K.
    series = 1.0 - u1 / lam + u2 / lam**2
    return 0.5 * np.log(np.pi / (2.0 * lam)) - lam * eta - 0.25 * np.log1p(z * z) + np.log(series)


def log_bessel_k(lam, x):
    """log K_lam(x) for x > 0, overflow-safe via the exponentially scaled kve.

    Symmetric in lam (K_lam = K_{-lam}).  Falls back to a large-order
    asymptotic expansion where kve itself overflows.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(x))):
        raise ValueError("log_bessel_k requires finite arguments")
    if np.any(x <= 0.0):
        raise ValueError("log_bessel_k requires x > 0")
    lam = np.abs(lam)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.log(sp.kve(lam, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        lam_b, x_b = np.broadcast_arrays(lam, x)
        out = np.where(bad, 0.0, out)
        out = np.asarray(out, dtype=float)
        fixed = _log_kv_debye(lam_b[bad], x_b[bad])
        if out.ndim == 0:
            out = fixed.reshape(())
        else:
            out[bad] = fixed
    return out[()] if out.ndim == 0 else out


def dlog_bessel_k_dlambda(lam, x):
    """d/dlam log K_lam(x) by central finite difference on the log scale."""
    h = _FD_STEP
    return (log_bessel_k(np.asarray(lam, dtype=float) + h, x)
            - log_bessel_k(np.asarray(lam, dtype=float) - h, x)) / (2.0 * h)


def digamma(x):
    """Digamma function for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("digamma requires finite x > 0")
    out = sp.digamma(x)
    return out[()] if out.ndim == 0 else out
