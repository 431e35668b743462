"""Versioned JSON/CSV formats for families, selections and campaign results."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .bases import Basis
from .calibration import JumpCurve
from .selection import EstimatorFamily, ModelEstimate, SelectionResult, StateSelection, Variant

SCHEMA_VERSION = "1.0"

RESULT_COLUMNS = ("method", "variant", "calibration", "n", "rep", "state", "M_selected",
                  "l2_error", "oracle_error", "oracle_M")


class SchemaError(ValueError):
    pass


def check_version(doc: dict) -> None:
    v = str(doc.get("schema_version", ""))
    if v.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported schema_version {v!r}")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def family_to_dict(family: EstimatorFamily) -> dict:
    models = []
    for M in family.model_grid:
        e = family.models[M]
        models.append({"M": M, "pi": e.pi.tolist(), "Q": e.Q.tolist(),
                       "O_rowmajor": e.O.ravel().tolist(), "diagnostics": _jsonable(e.diagnostics)})
    return {
        "schema_version": SCHEMA_VERSION,
        "basis": family.basis.to_dict(),
        "n": int(family.n),
        "K": int(family.K),
        "method": family.method,
        "reference_model": family.reference_model,
        "aligned": bool(family.aligned),
        "models": models,
        "failures": {str(k): v for k, v in family.failures.items()},
    }


def family_from_dict(doc: dict) -> EstimatorFamily:
    check_version(doc)
    try:
        K = int(doc["K"])
        models = {}
        for m in doc["models"]:
            M = int(m["M"])
            O = np.asarray(m["O_rowmajor"], dtype=float).reshape(M, K)
            models[M] = ModelEstimate(O, np.asarray(m["pi"], float), np.asarray(m["Q"], float),
                                      doc["method"], m.get("diagnostics", {}))
        return EstimatorFamily(
            basis=Basis.from_dict(doc["basis"]), K=K, n=int(doc["n"]), method=doc["method"],
            models=models, aligned=bool(doc.get("aligned", False)),
            reference_model=doc.get("reference_model"),
            failures={int(k): v for k, v in doc.get("failures", {}).items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed family document: {exc}") from exc


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(doc), indent=1))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_family(family: EstimatorFamily, path) -> None:
    write_json(path, family_to_dict(family))


def load_family(path) -> EstimatorFamily:
    return family_from_dict(read_json(path))


def selection_to_dict(result: SelectionResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "variant": result.variant.value,
        "sigma": _jsonable(result.sigma),
        "per_state": [
            {"state": k, "M_hat": s.M_hat, "A_curve": _jsonable(s.A_curve),
             "criterion_curve": _jsonable(s.criterion_curve)}
            for k, s in enumerate(result.per_state)
        ],
    }


def selection_from_dict(doc: dict) -> SelectionResult:
    check_version(doc)

    def curve(d):
        return {int(k): float(v) for k, v in d.items()}

    per_state = [StateSelection(int(s["M_hat"]), curve(s["A_curve"]), curve(s["criterion_curve"]))
                 for s in doc["per_state"]]
    return SelectionResult(Variant(doc["variant"]), per_state, doc.get("sigma"))


def write_selection_csv(result: SelectionResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "M", "A", "criterion"])
        for k, s in enumerate(result.per_state):
            for M in sorted(s.A_curve):
                w.writerow([k, M, repr(s.A_curve[M]), repr(s.criterion_curve[M])])


def write_jump_curves_csv(curves: list[JumpCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "rho", "M_hat"])
        for c in curves:
            for rho, M in zip(c.rho_grid, c.M_hat_of_rho):
                w.writerow([c.state, repr(float(rho)), int(M)])


def write_cv_csv(E_curve: dict, M_hat: int, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["M", "E_VC", "selected"])
        for M in sorted(E_curve):
            w.writerow([M, repr(float(E_curve[M])), int(M == M_hat)])


def write_results_csv(rows, path, append: bool = False) -> None:
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in RESULT_COLUMNS})


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"results file lacks columns {sorted(missing)}")
        rows = []
        for r in reader:
            rows.append({**r, "n": int(float(r["n"])), "rep": int(r["rep"]),
                         "M_selected": int(r["M_selected"]), "l2_error": float(r["l2_error"]),
                         "oracle_error": float(r["oracle_error"]), "oracle_M": int(r["oracle_M"])})
    return rows
