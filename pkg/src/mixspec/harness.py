"""Replicated experiments comparing empirical error with the certificates.

Each replication simulates one record, runs the streaming estimator through
the checkpoint list and records ``||Phi_k - zbar||_F`` against the exact mean
``zbar``. Replication ``r`` draws only from the stream seeded by
``(seed, r)``, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds
from .estimators import RunningEstimate, WindowSpec, data_budget, make_window, reduce_frequency
from .exceptions import InvalidSpecError, MixspecError
from .mixing import LinearProcessModel, MarkovChainModel, MixingProfile, filter_profile, markov_profile
from .models import CHUNK, autocovariance, data_chunks, expected_estimate

log = logging.getLogger(__name__)

DESK_CHECKPOINTS = (4, 16, 64, 256, 1024, 10**4, 10**5)
FULL_CHECKPOINTS = DESK_CHECKPOINTS + (10**6, 10**7)
RESULT_HEADER = ("k", "median_err", "quantile_err", "max_err", "epsilon", "bias_bound", "exceedances", "R", "nu", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    model: object
    spec: WindowSpec
    freq: float = 0.5
    checkpoints: tuple = DESK_CHECKPOINTS
    replications: int = 200
    nu: float = 0.1
    q_grid: tuple = bounds.DEFAULT_Q_GRID
    seed: int = 0
    innovation: str = "gaussian"
    profile: Optional[MixingProfile] = None
    tail_tol: float = 1e-12

    def __post_init__(self):
        if not isinstance(self.model, (MarkovChainModel, LinearProcessModel)):
            raise InvalidSpecError(f"unsupported model type {type(self.model).__name__}")
        cps = tuple(int(c) for c in self.checkpoints)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise InvalidSpecError(f"checkpoints must be strictly increasing: {cps}")
        if cps and cps[0] < 4:
            raise InvalidSpecError(f"checkpoints must all be >= 4, got {cps[0]}")
        object.__setattr__(self, "checkpoints", cps)
        if int(self.replications) < 1:
            raise InvalidSpecError(f"need at least one replication, got {self.replications}")
        object.__setattr__(self, "replications", int(self.replications))
        if not 0 < self.nu < 1:
            raise InvalidSpecError(f"nu must lie in (0, 1), got {self.nu}")
        if int(self.seed) < 0:
            raise InvalidSpecError(f"seed must be nonnegative, got {self.seed}")
        object.__setattr__(self, "freq", reduce_frequency(self.freq))
        object.__setattr__(self, "q_grid", tuple(float(q) for q in self.q_grid))

    @property
    def n(self) -> int:
        return 1 if isinstance(self.model, MarkovChainModel) else self.model.n

    @property
    def samples_per_replication(self) -> int:
        return data_budget(self.checkpoints[-1], self.spec.segment_len, self.spec.hop) if self.checkpoints else 0

    def mixing_profile(self) -> MixingProfile:
        if self.profile is not None:
            return self.profile
        if isinstance(self.model, MarkovChainModel):
            return markov_profile(self.model)
        return filter_profile(self.model)


@dataclass
class ExperimentResult:
    checkpoints: np.ndarray
    median: np.ndarray
    quantile: np.ndarray
    max: np.ndarray
    epsilon: np.ndarray
    bias_bound: float = float("nan")
    exceedances: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    replications: int = 0
    nu: float = float("nan")
    seed: int = 0
    z_bar: Optional[np.ndarray] = None
    errors: Optional[np.ndarray] = None
    fit: Optional[bounds.PowerLawFit] = None

    def failing_checkpoints(self) -> list[int]:
        """Checkpoints whose (1 - nu)-quantile error exceeds the radius."""
        return [int(k) for k, qe, e in zip(self.checkpoints, self.quantile, self.epsilon) if not qe <= e]

    @property
    def passed(self) -> bool:
        return not self.failing_checkpoints()

    @property
    def max_dominated(self) -> bool:
        return bool(np.all(self.max <= self.epsilon))

    @property
    def margin(self) -> float:
        """Smallest ratio ``epsilon / max error`` over checkpoints."""
        return float(np.min(self.epsilon / self.max)) if len(self.checkpoints) else math.inf


def _replication_errors(cfg: ExperimentConfig, r: int, z_bar: np.ndarray, w: np.ndarray) -> np.ndarray:
    est = RunningEstimate(cfg.spec, cfg.freq, cfg.n, cfg.checkpoints, window=w)
    for block in data_chunks(cfg.model, cfg.samples_per_replication, (cfg.seed, r), cfg.innovation, CHUNK):
        est.push(block)
    snaps = est.snapshots
    if len(snaps) != len(cfg.checkpoints):
        raise MixspecError(f"replication {r}: only {len(snaps)} of {len(cfg.checkpoints)} checkpoints reached")
    err = np.array([np.linalg.norm(x.matrix - z_bar) for x in snaps])
    bad = ~np.isfinite(err)
    if bad.any():
        k = [cfg.checkpoints[i] for i in np.flatnonzero(bad)]
        raise FloatingPointError(f"replication {r} (seed {(cfg.seed, r)}): non-finite error at checkpoints {k}")
    return err


def exact_mean(cfg: ExperimentConfig) -> np.ndarray:
    return expected_estimate(autocovariance(cfg.model), cfg.spec, cfg.freq)


def run_replication(cfg: ExperimentConfig, r: int, z_bar: Optional[np.ndarray] = None) -> np.ndarray:
    """Frobenius errors at every checkpoint for replication ``r``."""
    if z_bar is None:
        z_bar = exact_mean(cfg)
    return _replication_errors(cfg, r, z_bar, make_window(cfg.spec, cfg.freq))


def _worker(args):
    cfg, r, z_bar = args
    return run_replication(cfg, r, z_bar)


def certificates(cfg: ExperimentConfig):
    """Power-law fit, radius per checkpoint and bias bound for ``cfg``."""
    profile = cfg.mixing_profile()
    fit = bounds.fit_power_law(profile, cfg.spec.segment_len, cfg.spec.hop, cfg.q_grid)
    eps = np.array([bounds.confidence_radius(fit, k, cfg.nu) for k in cfg.checkpoints])
    try:
        bias = bounds.bias_bound(profile, cfg.spec, cfg.tail_tol)
    except MixspecError as exc:
        log.warning("bias bound unavailable: %s", exc)
        bias = float("nan")
    return fit, eps, bias


def aggregate(cfg: ExperimentConfig, errors: np.ndarray, z_bar=None, certs=None) -> ExperimentResult:
    """Summaries of an (R, checkpoints) error array in canonical replication order."""
    errors = np.asarray(errors, dtype=float).reshape(cfg.replications, len(cfg.checkpoints))
    fit, eps, bias = certs if certs is not None else certificates(cfg)
    if len(cfg.checkpoints):
        med = np.median(errors, axis=0)
        qnt = np.quantile(errors, 1 - cfg.nu, axis=0)
        mx = errors.max(axis=0)
        exc = (errors > eps[None, :]).sum(axis=0)
    else:
        med = qnt = mx = np.zeros(0)
        exc = np.zeros(0, dtype=int)
    return ExperimentResult(
        np.array(cfg.checkpoints, dtype=int), med, qnt, mx, eps, bias, exc,
        cfg.replications, cfg.nu, cfg.seed, z_bar, errors, fit,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1, order: Optional[Sequence[int]] = None) -> ExperimentResult:
    """Run every replication and aggregate.

    ``order`` permutes the execution order only; results are always reduced
    in replication-index order.
    """
    z_bar = exact_mean(cfg)
    certs = certificates(cfg)
    idx = list(range(cfg.replications)) if order is None else [int(i) for i in order]
    if sorted(idx) != list(range(cfg.replications)):
        raise InvalidSpecError("order must be a permutation of the replication indices")
    log.info("running %d replications x %d samples", cfg.replications, cfg.samples_per_replication)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_worker, [(cfg, r, z_bar) for r in idx], chunksize=max(1, len(idx) // (4 * workers))))
    else:
        w = make_window(cfg.spec, cfg.freq)
        out = [_replication_errors(cfg, r, z_bar, w) for r in idx]
    by_rep = dict(zip(idx, out))
    errors = np.stack([by_rep[r] for r in range(cfg.replications)]) if cfg.checkpoints else np.zeros((cfg.replications, 0))
    return aggregate(cfg, errors, z_bar, certs)


def slope_fit(result: ExperimentResult) -> float:
    """Least-squares slope of ``ln(median error)`` against ``ln(k)``."""
    k = np.asarray(result.checkpoints, dtype=float)
    med = np.asarray(result.median, dtype=float)
    if k.size < 3:
        raise InvalidSpecError(f"slope fit needs >= 3 checkpoints, got {k.size}")
    if k.max() / k.min() < 100:
        raise InvalidSpecError("slope fit needs checkpoints spanning at least two decades")
    if np.any(med <= 0):
        raise InvalidSpecError("median errors must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(k), np.log(med), 1)
    return float(slope)


def export_result(result: ExperimentResult, path) -> None:
    """Write one CSV row per checkpoint with header :data:`RESULT_HEADER`."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RESULT_HEADER)
            for i, k in enumerate(result.checkpoints):
                w.writerow([
                    int(k), repr(float(result.median[i])), repr(float(result.quantile[i])),
                    repr(float(result.max[i])), repr(float(result.epsilon[i])), repr(float(result.bias_bound)),
                    int(result.exceedances[i]), int(result.replications), repr(float(result.nu)), int(result.seed),
                ])
    except OSError as exc:
        raise OSError(f"cannot write result file {path}: {exc}") from exc


def read_result(path) -> ExperimentResult:
    """Inverse of :func:`export_result` (raw errors and ``zbar`` are not stored)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != RESULT_HEADER:
        raise InvalidSpecError(f"{path}: missing or unexpected header")
    body = rows[1:]
    col = lambda j, t=float: np.array([t(r[j]) for r in body], dtype=t)  # noqa: E731
    first = body[0] if body else None
    return ExperimentResult(
        checkpoints=col(0, int), median=col(1), quantile=col(2), max=col(3), epsilon=col(4),
        bias_bound=float(first[5]) if first else float("nan"),
        exceedances=col(6, int),
        replications=int(first[7]) if first else 0,
        nu=float(first[8]) if first else float("nan"),
        seed=int(first[9]) if first else 0,
    )
