"""File formats: long-format curve CSV, label/BIC tables, result JSON."""

from __future__ import annotations

import csv
import json
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .funbasis import BSplineBasis, CurveSet, FunctionalDataset
from .model import (ClusterModel, FitResult, ParsimonyConfig, XClusterParams,
                    YClusterParams, family_from_name, family_name)

__all__ = [
    "CurveCsvError",
    "read_curves_csv",
    "write_curves_csv",
    "write_truth_csv",
    "read_truth_csv",
    "write_labels_csv",
    "write_bic_table_csv",
    "result_to_json",
    "result_from_json",
]

_CURVE_HEADER = ["curve_id", "variable", "role", "t", "value"]


class CurveCsvError(ValueError):
    """Malformed curve CSV; message names the offending line."""


def read_curves_csv(path: str) -> CurveSet:
    """Parse the long-format curve file into a CurveSet."""
    rows: Dict[Tuple[str, str], List[Tuple[float, float]]] = {}
    roles: Dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CurveCsvError(f"{path}: empty file") from None
        if [h.strip() for h in header] != _CURVE_HEADER:
            raise CurveCsvError(
                f"{path}: line 1: expected header {','.join(_CURVE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise CurveCsvError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            cid, var, role, t_s, v_s = (f.strip() for f in row)
            if role not in ("X", "Y"):
                raise CurveCsvError(f"{path}: line {lineno}: role must be X or Y, got {role!r}")
            if var in roles and roles[var] != role:
                raise CurveCsvError(f"{path}: line {lineno}: variable {var!r} has conflicting roles")
            roles[var] = role
            try:
                t = float(t_s)
                v = float(v_s)
            except ValueError:
                raise CurveCsvError(f"{path}: line {lineno}: non-numeric t or value") from None
            rows.setdefault((cid, var), []).append((t, v))
    if not rows:
        raise CurveCsvError(f"{path}: no data rows")
    samples = {}
    for key, pts in rows.items():
        pts.sort(key=lambda p: p[0])
        t = np.array([p[0] for p in pts])
        v = np.array([p[1] for p in pts])
        samples[key] = (t, v)
    try:
        return CurveSet(samples=samples, roles=roles)
    except ValueError as exc:
        raise CurveCsvError(f"{path}: {exc}") from exc


def write_curves_csv(path: str, curves: CurveSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CURVE_HEADER)
        for (cid, var), (t, vals) in curves.samples.items():
            role = curves.roles[var]
            for ti, vi in zip(t, vals):
                writer.writerow([cid, var, role, repr(float(ti)), repr(float(vi))])


def write_truth_csv(path: str, curve_ids: Sequence[str], labels: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve_id", "label"])
        for cid, lab in zip(curve_ids, labels):
            writer.writerow([cid, int(lab)])


def read_truth_csv(path: str) -> Dict[str, int]:
    out: Dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["curve_id", "label"]:
            raise CurveCsvError(f"{path}: expected header curve_id,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise CurveCsvError(f"{path}: line {lineno}: expected 2 fields")
            out[row[0].strip()] = int(row[1])
    return out


def write_labels_csv(path: str, curve_ids: Sequence[str], labels: np.ndarray,
                     t: np.ndarray) -> None:
    """Hard labels plus the posterior responsibility row for every curve."""
    K = t.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve_id", "label"] + [f"posterior_{k}" for k in range(K)])
        for i, cid in enumerate(curve_ids):
            writer.writerow([cid, int(labels[i])] + [repr(float(x)) for x in t[i]])


def write_bic_table_csv(path: str, table: List[dict]) -> None:
    cols = ["K", "flm_variant", "sigma_y_family", "family_x", "family_y",
            "threshold", "bic", "status"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in table:
            writer.writerow([
                row.get(c, "") if row.get(c) is not None else "" for c in cols])


def _mat(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=float)
    return {"dims": list(m.shape), "data": m.ravel(order="C").tolist()}


def _unmat(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=float).reshape(d["dims"], order="C")


def _family_dict(family) -> dict:
    return {"name": family_name(family), "concentration": family.concentration}


def result_to_json(result: FitResult, data: Optional[FunctionalDataset] = None) -> str:
    """Serialize a fit (and optionally its dataset context) to JSON text.

    Matrices are stored row-major with explicit dims; the dataset context
    (coefficients, bases, curve ids) enables downstream curve reconstruction.
    """
    model = result.model
    doc = {
        "bic": result.bic,
        "n_iter": result.n_iter,
        "converged": result.converged,
        "loglik_trace": [float(x) for x in result.loglik_trace],
        "labels": [int(x) for x in result.labels],
        "posteriors": _mat(result.t),
        "bic_table": result.bic_table,
        "model": {
            "pi": [float(x) for x in model.pi],
            "parsimony": {
                "flm_variant": model.parsimony.flm_variant,
                "sigma_y_family": model.parsimony.sigma_y_family,
                "common_psi_x": model.parsimony.common_psi_x,
                "common_psi_y": model.parsimony.common_psi_y,
            },
            "clusters": [
                {
                    "mu_x": _mat(x.mu_x), "alpha_x": _mat(x.alpha_x),
                    "u": _mat(x.u), "a": _mat(x.a), "b": x.b,
                    "family_x": _family_dict(x.family_x),
                    "gamma_star": _mat(y.gamma_star), "alpha_y": _mat(y.alpha_y),
                    "sigma_y": _mat(y.sigma_y),
                    "family_y": _family_dict(y.family_y),
                }
                for x, y in zip(model.x_params, model.y_params)
            ],
        },
    }
    if data is not None:
        doc["dataset"] = {
            "curve_ids": list(data.curve_ids),
            "c_x": _mat(data.c_x),
            "c_y": _mat(data.c_y),
            "bases_x": [b.to_dict() for b in data.bases_x],
            "bases_y": [b.to_dict() for b in data.bases_y],
        }
    return json.dumps(doc, indent=2, sort_keys=True)


def result_from_json(text: str):
    """Inverse of result_to_json; returns (FitResult, dataset dict or None)."""
    doc = json.loads(text)
    clusters = doc["model"]["clusters"]
    x_params = [XClusterParams(
        mu_x=_unmat(c["mu_x"]).ravel(), alpha_x=_unmat(c["alpha_x"]).ravel(),
        u=_unmat(c["u"]), a=_unmat(c["a"]).ravel(), b=float(c["b"]),
        family_x=family_from_name(c["family_x"]["name"], c["family_x"]["concentration"]),
    ) for c in clusters]
    y_params = [YClusterParams(
        gamma_star=_unmat(c["gamma_star"]), alpha_y=_unmat(c["alpha_y"]).ravel(),
        sigma_y=_unmat(c["sigma_y"]),
        family_y=family_from_name(c["family_y"]["name"], c["family_y"]["concentration"]),
    ) for c in clusters]
    parsimony = ParsimonyConfig(**doc["model"]["parsimony"])
    model = ClusterModel(pi=np.asarray(doc["model"]["pi"]), x_params=x_params,
                         y_params=y_params, parsimony=parsimony)
    result = FitResult(
        model=model, t=_unmat(doc["posteriors"]),
        loglik_trace=np.asarray(doc["loglik_trace"], dtype=float),
        bic=float(doc["bic"]), labels=np.asarray(doc["labels"], dtype=int),
        n_iter=int(doc["n_iter"]), converged=bool(doc["converged"]),
        bic_table=doc.get("bic_table", []),
    )
    dataset = None
    if "dataset" in doc:
        ds = doc["dataset"]
        dataset = {
            "curve_ids": ds["curve_ids"],
            "c_x": _unmat(ds["c_x"]),
            "c_y": _unmat(ds["c_y"]),
            "bases_x": [BSplineBasis.from_dict(b) for b in ds["bases_x"]],
            "bases_y": [BSplineBasis.from_dict(b) for b in ds["bases_y"]],
        }
    return result, dataset
