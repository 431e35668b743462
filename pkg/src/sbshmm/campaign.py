"""Simulation campaign: configuration, one replication, and rate summaries."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .bases import Basis
from .calibration import calibrated_selection
from .crossval import cv_select
from .selection import align_family
from .simulation import GroundTruth, error_report, match_to_truth, benchmark_truth, rate_report, sample_hmm
from .spectral import spectral_family

log = logging.getLogger(__name__)


@dataclass
class SimConfig:
    n_grid: list = field(default_factory=lambda: [50_000, 100_000, 200_000, 400_000, 800_000])
    reps: int = 10
    m: int = 20
    M_min: int = 3
    M_max: int = 300
    basis: str = "trig"
    variants: list = field(default_factory=lambda: ["standard"])
    calibrations: list = field(default_factory=lambda: ["eachjump"])
    cv: bool = False
    folds: int = 10
    gap: int = 30
    seed: int = 0
    retries: str = "ceil(2 log n + 2 log M)"

    def __post_init__(self):
        if not 1 <= self.M_min <= self.M_max:
            raise ValueError("need 1 <= M_min <= M_max")
        if self.reps < 1 or not self.n_grid:
            raise ValueError("need at least one n and one replication")

    @property
    def model_grid(self) -> list[int]:
        return list(range(self.M_min, self.M_max + 1))

    def to_dict(self) -> dict:
        return {"schema_version": "1.0", **dataclasses.asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names - {"schema_version"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in names})


def replication_seed(seed: int, n: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(n), int(rep)]).generate_state(1)[0])


def replicate_family(config: SimConfig, n: int, rep: int, truth: GroundTruth | None = None):
    """Observations, aligned spectral family and truth-to-family permutation of one replication."""
    truth = benchmark_truth() if truth is None else truth
    s = replication_seed(config.seed, n, rep)
    y = sample_hmm(truth, n, seed=s)
    basis = Basis(config.basis, config.M_max)
    family = align_family(spectral_family(y, basis, truth.K, config.model_grid, m=config.m, seed=s))
    return y, family, match_to_truth(family, truth)


def selection_rows(config: SimConfig, family, perm, truth: GroundTruth, n: int, rep: int) -> list[dict]:
    rows = []
    for variant in config.variants:
        for cal in config.calibrations:
            sel, _ = calibrated_selection(family, "spectral", cal, variant)
            for k, err in enumerate(error_report(family, truth, sel, perm)):
                rows.append({"method": "spectral", "variant": variant, "calibration": cal,
                             "n": n, "rep": rep, "state": truth.names[k],
                             "M_selected": sel.per_state[int(perm[k])].M_hat,
                             "l2_error": err.l2_error, "oracle_error": err.oracle_error,
                             "oracle_M": err.oracle_M})
    return rows


def run_replication(config: SimConfig, n: int, rep: int, truth: GroundTruth | None = None) -> list[dict]:
    """Sample, fit the spectral family, select with every configured rule, score."""
    truth = benchmark_truth() if truth is None else truth
    y, family, perm = replicate_family(config, n, rep, truth)
    rows = selection_rows(config, family, perm, truth, n, rep)
    s = replication_seed(config.seed, n, rep)
    if config.cv:
        cv = cv_select(y, family.basis, config.model_grid, truth.K, config.folds, config.gap, config.m, s)
        if cv.M_hat not in family.models:
            log.warning("CV picked M=%d, which failed on the full data", cv.M_hat)
        for k, err in enumerate(error_report(family, truth, None, perm)):
            rows.append({"method": "cv", "variant": "none", "calibration": "none", "n": n,
                         "rep": rep, "state": truth.names[k], "M_selected": cv.M_hat,
                         "l2_error": err.errors.get(cv.M_hat, float("nan")), "oracle_error": err.oracle_error,
                         "oracle_M": err.oracle_M})
    return rows


def run_campaign(config: SimConfig, truth: GroundTruth | None = None, progress=None) -> list[dict]:
    rows = []
    for n in config.n_grid:
        for rep in range(config.reps):
            rows.extend(run_replication(config, n, rep, truth))
            if progress is not None:
                progress(n, rep)
    return rows


def rates_from_rows(rows, n_min=None, method="spectral", variant=None, calibration=None):
    """Per-state slope of log error on log n over all matching rows."""
    keep = [r for r in rows if r["method"] == method
            and (variant is None or r["variant"] == variant)
            and (calibration is None or r["calibration"] == calibration)]
    points: dict = {}
    for r in keep:
        points.setdefault(r["state"], []).append((int(r["n"]), float(r["l2_error"])))
    return rate_report(points, n_min)
