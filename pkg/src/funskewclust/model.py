"""Domain types for the mixture model, parsimony configuration, parameter counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .skewdist import NIG, ST, VG, SkewFamily

__all__ = [
    "FLM_VARIANTS",
    "SIGMA_Y_FAMILIES",
    "XClusterParams",
    "YClusterParams",
    "ParsimonyConfig",
    "ClusterModel",
    "FitResult",
    "count_free_params",
    "sigma_y_project",
    "sigma_x_from_parts",
    "family_from_name",
    "family_name",
]

# FLM covariance variants: a varying by index (Akj) or common within cluster
# (Ak) or common overall (A); b per cluster (Bk) or common (B).
FLM_VARIANTS = ("AkjBkQkDk", "AkjBQkDk", "AkBkQkDk", "AkBQkDk", "ABkQkDk", "ABQkDk")

# The 8 response-covariance families with closed-form M-steps.
SIGMA_Y_FAMILIES = ("EII", "VII", "EEI", "VEI", "EVI", "VVI", "EEE", "VVV")

# Eigenvalue floor below which a fitted model is treated as spurious.
SPURIOUS_EIGENVALUE = 1e-20


def family_from_name(name: str, concentration: float) -> SkewFamily:
    name = name.upper()
    if name == "VG":
        return VG(concentration)
    if name == "ST":
        return ST(concentration)
    if name == "NIG":
        return NIG(concentration)
    raise ValueError(f"unknown family name {name!r}")


def family_name(family: SkewFamily) -> str:
    return type(family).__name__


@dataclass(frozen=True)
class XClusterParams:
    """Covariate-side parameters of one cluster.

    The scatter matrix is never stored explicitly: it is represented through
    the orthonormal leading directions U (in the W^{1/2}-transformed space),
    their variances a, and the shared complement variance b, so that
    Sigma_X = W^{-1/2} Q D Q^T W^{-1/2}.
    """

    mu_x: np.ndarray
    alpha_x: np.ndarray
    u: np.ndarray
    a: np.ndarray
    b: float
    family_x: SkewFamily

    def __post_init__(self):
        object.__setattr__(self, "mu_x", np.asarray(self.mu_x, dtype=float))
        object.__setattr__(self, "alpha_x", np.asarray(self.alpha_x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        r, d = self.u.shape
        if not 1 <= d < r:
            raise ValueError("intrinsic dimension must satisfy 1 <= d < R_X")
        if self.mu_x.shape != (r,) or self.alpha_x.shape != (r,) or self.a.shape != (d,):
            raise ValueError("inconsistent covariate-side dimensions")
        if np.linalg.norm(self.u.T @ self.u - np.eye(d)) > 1e-8:
            raise ValueError("U must have orthonormal columns")
        if np.any(np.diff(self.a) > 1e-10):
            raise ValueError("subspace variances must be sorted descending")
        if not (self.b > 0.0 and np.all(self.a > 0.0)):
            raise ValueError("variances must be positive")

    @property
    def d(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class YClusterParams:
    """Response-side regression parameters of one cluster.

    gamma_star packs the regression block and the intercept column:
    (R_Y x (R_X + 1)).
    """

    gamma_star: np.ndarray
    alpha_y: np.ndarray
    sigma_y: np.ndarray
    family_y: SkewFamily

    def __post_init__(self):
        object.__setattr__(self, "gamma_star", np.asarray(self.gamma_star, dtype=float))
        object.__setattr__(self, "alpha_y", np.asarray(self.alpha_y, dtype=float))
        object.__setattr__(self, "sigma_y", np.asarray(self.sigma_y, dtype=float))
        ry = self.gamma_star.shape[0]
        if self.alpha_y.shape != (ry,) or self.sigma_y.shape != (ry, ry):
            raise ValueError("inconsistent response-side dimensions")
        if not np.allclose(self.sigma_y, self.sigma_y.T, atol=1e-8):
            raise ValueError("sigma_y must be symmetric")
        if np.linalg.eigvalsh(self.sigma_y)[0] <= SPURIOUS_EIGENVALUE:
            raise ValueError("sigma_y is numerically singular (spurious cluster)")

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_star[:, :-1]

    @property
    def gamma_0(self) -> np.ndarray:
        return self.gamma_star[:, -1]


@dataclass(frozen=True)
class ParsimonyConfig:
    flm_variant: str = "AkjBkQkDk"
    sigma_y_family: str = "VVV"
    common_psi_x: bool = False
    common_psi_y: bool = False

    def __post_init__(self):
        if self.flm_variant not in FLM_VARIANTS:
            raise ValueError(f"unknown FLM variant {self.flm_variant!r}")
        if self.sigma_y_family not in SIGMA_Y_FAMILIES:
            raise ValueError(f"unsupported sigma_y family {self.sigma_y_family!r}")


@dataclass(frozen=True)
class ClusterModel:
    pi: np.ndarray
    x_params: List[XClusterParams]
    y_params: List[YClusterParams]
    parsimony: ParsimonyConfig

    def __post_init__(self):
        object.__setattr__(self, "pi", np.asarray(self.pi, dtype=float))
        k = self.pi.shape[0]
        if len(self.x_params) != k or len(self.y_params) != k:
            raise ValueError("per-cluster parameter lists must match K")
        if abs(self.pi.sum() - 1.0) > 1e-12 or np.any(self.pi <= 0.0):
            raise ValueError("mixing weights must be positive and sum to 1")

    @property
    def K(self) -> int:
        return self.pi.shape[0]


@dataclass
class FitResult:
    model: ClusterModel
    t: np.ndarray
    loglik_trace: np.ndarray
    bic: float
    labels: np.ndarray
    n_iter: int
    converged: bool
    bic_table: list = field(default_factory=list)


def sigma_x_from_parts(x: XClusterParams, w_sqrt_inv: np.ndarray) -> np.ndarray:
    """Explicit Sigma_X = W^{-1/2} Q D Q^T W^{-1/2} (tests and oracles only)."""
    r, d = x.u.shape
    # Q D Q^T = b I + U (diag(a) - b I) U^T since the complement shares b.
    core = x.b * np.eye(r) + x.u @ np.diag(x.a - x.b) @ x.u.T
    return w_sqrt_inv @ core @ w_sqrt_inv


def _flm_param_count(variant: str, K: int, dims: Sequence[int]) -> int:
    a_style, b_style = variant[:-4].replace("B", " B").split()
    if a_style == "Akj":
        n_a = sum(dims)
    elif a_style == "Ak":
        n_a = K
    else:  # A
        n_a = 1
    n_b = K if b_style == "Bk" else 1
    return n_a + n_b


def _sigma_y_param_count(family: str, K: int, p: int) -> int:
    full = p * (p + 1) // 2
    return {
        "EII": 1,
        "VII": K,
        "EEI": p,
        "VEI": K + (p - 1),
        "EVI": 1 + K * (p - 1),
        "VVI": K * p,
        "EEE": full,
        "VVV": K * full,
    }[family]


def count_free_params(K: int, r_x: int, r_y: int, dims: Sequence[int],
                      parsimony: ParsimonyConfig) -> int:
    """Free-parameter count tau entering the BIC penalty."""
    if len(dims) != K:
        raise ValueError("need one intrinsic dimension per cluster")
    tau = (K - 1) + K * r_x + K * r_x  # pi, mu_X, alpha_X
    tau += sum(d * (r_x - (d + 1) / 2) for d in dims)  # subspace orientations
    tau = int(round(tau))
    tau += _flm_param_count(parsimony.flm_variant, K, dims)
    tau += K * r_y * (r_x + 1)  # regression + intercept
    tau += K * r_y  # alpha_Y
    tau += _sigma_y_param_count(parsimony.sigma_y_family, K, r_y)
    tau += (1 if parsimony.common_psi_x else K) + (1 if parsimony.common_psi_y else K)
    return tau


def _det_normalized(diag_vals: np.ndarray) -> float:
    """Geometric mean of a positive diagonal, via logs for stability."""
    return float(np.exp(np.mean(np.log(diag_vals))))


def sigma_y_project(s_list: Sequence[np.ndarray], n_k: Sequence[float],
                    family: str) -> List[np.ndarray]:
    """Project unconstrained per-cluster scatter estimates onto a family.

    s_list holds the VVV-update outputs; n_k the soft cluster sizes.  Returns
    the constrained Sigma_Y estimates, following the closed-form constrained
    Gaussian covariance estimators (VEI uses the standard short alternation).
    """
    if family not in SIGMA_Y_FAMILIES:
        raise ValueError(f"unsupported sigma_y family {family!r}")
    s_list = [np.asarray(s, dtype=float) for s in s_list]
    n_k = np.asarray(n_k, dtype=float)
    if np.any(n_k <= 0.0):
        raise ValueError("cluster weights must be positive")
    K = len(s_list)
    p = s_list[0].shape[0]
    n = n_k.sum()

    if family == "VVV":
        return list(s_list)
    if family == "EEE":
        pooled = sum(nk * s for nk, s in zip(n_k, s_list)) / n
        return [pooled.copy() for _ in range(K)]

    diags = [np.clip(np.diag(s), SPURIOUS_EIGENVALUE, None) for s in s_list]
    if family == "VVI":
        return [np.diag(d) for d in diags]
    if family == "EEI":
        pooled = sum(nk * d for nk, d in zip(n_k, diags)) / n
        return [np.diag(pooled) for _ in range(K)]
    if family == "EII":
        lam = sum(nk * d.sum() for nk, d in zip(n_k, diags)) / (n * p)
        return [lam * np.eye(p) for _ in range(K)]
    if family == "VII":
        return [(d.sum() / p) * np.eye(p) for d in diags]
    if family == "EVI":
        # Common volume, cluster-specific unit-determinant diagonal shapes.
        gmeans = np.array([_det_normalized(d) for d in diags])
        lam = float(np.sum(n_k * gmeans) / n)
        return [lam * np.diag(d / g) for d, g in zip(diags, gmeans)]
    # VEI: common shape, cluster-specific volumes; short fixed-point.
    lam = np.array([d.mean() for d in diags])
    shape = np.ones(p)
    for _ in range(50):
        weighted = sum(nk * d / lk for nk, d, lk in zip(n_k, diags, lam))
        shape_new = weighted / _det_normalized(weighted)
        lam_new = np.array([np.mean(d / shape_new) for d in diags])
        if np.allclose(lam_new, lam, rtol=1e-12) and np.allclose(shape_new, shape, rtol=1e-12):
            lam, shape = lam_new, shape_new
            break
        lam, shape = lam_new, shape_new
    return [lk * np.diag(shape) for lk in lam]
