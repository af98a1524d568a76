"""B-spline smoothing of raw curves and the Gram-matrix metric.

Curves are converted once into basis-coefficient matrices; all model fitting
happens in that coefficient space, with distances measured through the Gram
matrix of inner products between the basis functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.interpolate import BSpline

__all__ = [
    "BSplineBasis",
    "CurveSet",
    "FunctionalDataset",
    "eval_basis",
    "fit_coefficients",
    "gram_matrix",
    "sqrt_psd",
]


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis on a closed interval."""

    degree: int
    interior_knots: np.ndarray
    domain: Tuple[float, float]

    def __post_init__(self):
        knots = np.asarray(self.interior_knots, dtype=float)
        object.__setattr__(self, "interior_knots", knots)
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must be a nondegenerate interval")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if knots.size and (np.any(np.diff(knots) <= 0) or knots[0] <= lo or knots[-1] >= hi):
            raise ValueError("interior knots must be sorted strictly inside the domain")

    @classmethod
    def with_n_basis(cls, n_basis: int, degree: int = 3,
                     domain: Tuple[float, float] = (0.0, 1.0)) -> "BSplineBasis":
        """Basis with equally spaced interior knots giving n_basis functions."""
        n_interior = n_basis - degree - 1
        if n_interior < 0:
            raise ValueError("n_basis must be at least degree + 1")
        lo, hi = domain
        knots = np.linspace(lo, hi, n_interior + 2)[1:-1]
        return cls(degree=degree, interior_knots=knots, domain=domain)

    @property
    def n_basis(self) -> int:
        return self.interior_knots.size + self.degree + 1

    @property
    def full_knots(self) -> np.ndarray:
        lo, hi = self.domain
        return np.concatenate([np.full(self.degree + 1, lo),
                               self.interior_knots,
                               np.full(self.degree + 1, hi)])

    @property
    def breakpoints(self) -> np.ndarray:
        lo, hi = self.domain
        return np.concatenate([[lo], self.interior_knots, [hi]])

    def to_dict(self) -> dict:
        return {"degree": self.degree,
                "interior_knots": self.interior_knots.tolist(),
                "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: dict) -> "BSplineBasis":
        return cls(degree=int(d["degree"]),
                   interior_knots=np.asarray(d["interior_knots"], dtype=float),
                   domain=(float(d["domain"][0]), float(d["domain"][1])))


def eval_basis(basis: BSplineBasis, t) -> np.ndarray:
    """Design matrix of the basis functions at the points t (|t| x n_basis)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = basis.domain
    if np.any(t < lo) or np.any(t > hi):
        raise ValueError("evaluation points outside the basis domain")
    mat = BSpline.design_matrix(t, basis.full_knots, basis.degree,
                                extrapolate=False).toarray()
    return mat


@dataclass(frozen=True)
class CurveSet:
    """Raw discretized curves: per curve and variable, times and values.

    samples maps (curve_id, variable) -> (t, values); roles maps each variable
    name to "X" or "Y".
    """

    samples: Dict[Tuple[str, str], Tuple[np.ndarray, np.ndarray]]
    roles: Dict[str, str]

    def __post_init__(self):
        for var, role in self.roles.items():
            if role not in ("X", "Y"):
                raise ValueError(f"variable {var!r} has invalid role {role!r}")
        for (cid, var), (t, vals) in self.samples.items():
            t = np.asarray(t, dtype=float)
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"curve {cid!r}, variable {var!r}: times must be strictly increasing")
            if t.shape != np.asarray(vals).shape:
                raise ValueError(f"curve {cid!r}, variable {var!r}: time/value length mismatch")

    @property
    def curve_ids(self) -> List[str]:
        seen: Dict[str, None] = {}
        for cid, _ in self.samples:
            seen.setdefault(cid, None)
        return list(seen)

    def variables(self, role: str) -> List[str]:
        return [v for v, r in self.roles.items() if r == role]


@dataclass(frozen=True)
class FunctionalDataset:
    """Coefficient matrices plus the Gram metric; immutable once built."""

    c_x: np.ndarray
    c_y: np.ndarray
    w_x: np.ndarray
    w_x_sqrt: np.ndarray
    bases_x: List[BSplineBasis]
    bases_y: List[BSplineBasis]
    curve_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.c_x.shape[0] != self.c_y.shape[0]:
            raise ValueError("C_X and C_Y must have the same number of rows")
        rx = sum(b.n_basis for b in self.bases_x)
        ry = sum(b.n_basis for b in self.bases_y)
        if self.c_x.shape[1] != rx or self.c_y.shape[1] != ry:
            raise ValueError("coefficient widths do not match basis sizes")
        if self.w_x.shape != (rx, rx):
            raise ValueError("W_X has wrong shape")

    @property
    def n(self) -> int:
        return self.c_x.shape[0]

    @property
    def r_x(self) -> int:
        return self.c_x.shape[1]

    @property
    def r_y(self) -> int:
        return self.c_y.shape[1]


def sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix."""
    m = np.asarray(m, dtype=float)
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("matrix must be symmetric")
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < -1e-10 * max(1.0, abs(vals[-1])):
        raise ValueError("matrix must be positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gram_matrix(bases: List[BSplineBasis]) -> np.ndarray:
    """Block-diagonal matrix of basis inner products, exact per knot span.

    Gauss-Legendre with ceil((2*degree+1)/2)+1 nodes per span integrates the
    piecewise-polynomial products exactly.
    """
    blocks = []
    for basis in bases:
        n_nodes = int(np.ceil((2 * basis.degree + 1) / 2)) + 1
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        g = np.zeros((basis.n_basis, basis.n_basis))
        bp = basis.breakpoints
        for lo, hi in zip(bp[:-1], bp[1:]):
            half = 0.5 * (hi - lo)
            t = lo + half * (nodes + 1.0)
            phi = eval_basis(basis, t)
            g += half * (phi.T * weights) @ phi
        blocks.append(0.5 * (g + g.T))
    out = np.zeros((sum(b.shape[0] for b in blocks),) * 2)
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out[pos:pos + k, pos:pos + k] = b
        pos += k
    return out


def _smooth_one(t: np.ndarray, vals: np.ndarray, basis: BSplineBasis, label: str) -> np.ndarray:
    design = eval_basis(basis, t)
    if t.size < basis.n_basis:
        raise ValueError(f"{label}: {t.size} points cannot determine {basis.n_basis} coefficients")
    coef, _, rank, _ = np.linalg.lstsq(design, vals, rcond=None)
    if rank < basis.n_basis:
        raise ValueError(f"{label}: rank-deficient smoothing design (too few distinct times)")
    return coef


def fit_coefficients(curves: CurveSet, bases_x: Dict[str, BSplineBasis],
                     bases_y: Dict[str, BSplineBasis]) -> FunctionalDataset:
    """Per-curve OLS smoothing into coefficient space, variable-major layout."""
    vars_x = curves.variables("X")
    vars_y = curves.variables("Y")
    if set(bases_x) != set(vars_x) or set(bases_y) != set(vars_y):
        raise ValueError("bases must be given for exactly the X and Y variables")
    ids = curves.curve_ids
    rows_x, rows_y = [], []
    for cid in ids:
        cx = [
            _smooth_one(np.asarray(curves.samples[(cid, var)][0], dtype=float),
                        np.asarray(curves.samples[(cid, var)][1], dtype=float),
                        bases_x[var], f"curve {cid!r}, variable {var!r}")
            for var in vars_x
        ]
        cy = [
            _smooth_one(np.asarray(curves.samples[(cid, var)][0], dtype=float),
                        np.asarray(curves.samples[(cid, var)][1], dtype=float),
                        bases_y[var], f"curve {cid!r}, variable {var!r}")
            for var in vars_y
        ]
        rows_x.append(np.concatenate(cx))
        rows_y.append(np.concatenate(cy))
    basis_list_x = [bases_x[v] for v in vars_x]
    basis_list_y = [bases_y[v] for v in vars_y]
    w_x = gram_matrix(basis_list_x)
    return FunctionalDataset(c_x=np.asarray(rows_x), c_y=np.asarray(rows_y),
                             w_x=w_x, w_x_sqrt=sqrt_psd(w_x),
                             bases_x=basis_list_x, bases_y=basis_list_y,
                             curve_ids=ids)
