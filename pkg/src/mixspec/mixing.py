"""Upper bounds on the L-mixing statistics of a data process.

A :class:`MixingProfile` bundles three functions of the moment order ``q``:

* ``moment_bound(q)``  bounds ``sup_t ||y_t||_{L_q}``,
* ``gamma_sum(q)``     bounds the discrete mixing constant ``sum_tau gamma_q(tau)``,
* ``gamma_seq(tau, q)`` bounds the per-lag dependence coefficient ``gamma_q(tau)``.

Profiles are built for finite-state Markov chains (:func:`markov_profile`),
causal linear filters of sub-Gaussian noise (:func:`filter_profile`), or from
user tables (:func:`table_profile`). They always describe the discrete-time
process; conversion to the continuous-time constant happens in :mod:`mixspec.bounds`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    DomainError,
    InvalidSpecError,
    NotUniformlyErgodicError,
    ProfileRangeError,
)


def _check_q(q):
    q = float(q)
    if not q >= 1.0:
        raise DomainError(f"moment order q must be >= 1, got {q}")
    return q


@dataclass(frozen=True)
class MixingProfile:
    """Bounds on ``M_q``, ``Gamma_{d,q}`` and ``gamma_q(tau)`` for one process.

    Parameters
    ----------
    moment_bound, gamma_sum : callable
        ``q -> bound``, nondecreasing in ``q``.
    gamma_seq : callable
        ``(tau, q) -> bound``, nonincreasing in ``tau``.
    label : str
        Human-readable description.
    gamma_tail : callable, optional
        ``(T, q) -> bound`` on ``sum_{tau >= T} gamma_seq(tau, q)``. When absent
        the certified remainder ``gamma_sum(q) - sum_{tau < T} gamma_seq(tau, q)``
        is used.
    support : int, optional
        Lag count after which the tail bound cannot be refined further
        (finite impulse response or end of a table).
    info : dict
        Extra fields reported alongside the profile.
    """

    moment_bound: Callable[[float], float]
    gamma_sum: Callable[[float], float]
    gamma_seq: Callable[[int, float], float]
    label: str = ""
    gamma_tail: Optional[Callable[[int, float], float]] = None
    support: Optional[int] = None
    info: dict = field(default_factory=dict)

    def tail(self, T: int, q: float) -> float:
        """Upper bound on ``sum_{tau >= T} gamma_seq(tau, q)``."""
        if self.gamma_tail is not None:
            return float(self.gamma_tail(T, q))
        partial = math.fsum(self.gamma_seq(t, q) for t in range(T))
        return max(0.0, self.gamma_sum(q) - partial)

    def rows(self, q_grid):
        """``(q, M_q, Gamma_{d,q})`` rows for export."""
        return [(float(q), self.moment_bound(q), self.gamma_sum(q)) for q in q_grid]


# ---------------------------------------------------------------------------
# Markov chains


def stationary_distribution(P) -> np.ndarray:
    """Solve ``mu P = mu``, ``sum(mu) = 1`` by least squares."""
    P = np.asarray(P, dtype=float)
    S = P.shape[0]
    A = np.vstack([P.T - np.eye(S), np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(A, b, rcond=None)
    # one step of iterative refinement
    r = b - A @ mu
    mu = mu + np.linalg.lstsq(A, r, rcond=None)[0]
    mu = np.where(np.abs(mu) < 1e-15, 0.0, mu)
    return mu


def _check_stochastic(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise InvalidSpecError(f"transition matrix must be square, got shape {P.shape}")
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise InvalidSpecError("transition matrix has negative or non-finite entries")
    dev = np.max(np.abs(P.sum(axis=1) - 1.0))
    if dev > 1e-12:
        raise InvalidSpecError(f"transition matrix rows do not sum to 1 (max deviation {dev:.3g})")
    return P


def doeblin_coefficient(P, mu) -> float:
    """Largest ``delta`` with ``P(x, .) >= delta * mu(.)`` for every state ``x``.

    Computed as ``min_{x,y} P(x, y) / mu(y)`` over all pairs.
    """
    P = _check_stochastic(P)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (P.shape[0],):
        raise InvalidSpecError(f"stationary distribution has shape {mu.shape}, expected ({P.shape[0]},)")
    if np.any(mu <= 0):
        raise InvalidSpecError("stationary distribution must be strictly positive")
    resid = np.max(np.abs(mu @ P - mu))
    if resid > 1e-9 or abs(mu.sum() - 1.0) > 1e-9:
        raise InvalidSpecError(f"mu is not stationary for P (residual {resid:.3g})")
    delta = float(np.min(P / mu[None, :]))
    if delta <= 0:
        raise NotUniformlyErgodicError(
            "some transition probability is zero, so the one-step Doeblin coefficient vanishes"
        )
    return min(delta, 1.0)


@dataclass(frozen=True)
class MarkovChainModel:
    """Finite-state chain observed through a real value per state.

    ``mu`` is solved from ``P`` when not given. ``delta`` is the Doeblin
    coefficient, ``g_mean`` the stationary mean and ``g_max`` the largest
    absolute centred value.
    """

    P: np.ndarray
    g: np.ndarray
    mu: Optional[np.ndarray] = None
    delta: float = field(init=False)
    g_mean: float = field(init=False)
    g_max: float = field(init=False)

    def __post_init__(self):
        P = _check_stochastic(self.P).copy()
        g = np.asarray(self.g, dtype=float).ravel().copy()
        if g.shape != (P.shape[0],):
            raise InvalidSpecError(f"need one value per state ({P.shape[0]}), got {g.size}")
        mu = stationary_distribution(P) if self.mu is None else np.asarray(self.mu, dtype=float).copy()
        if np.any(mu < 0) or abs(mu.sum() - 1) > 1e-12:
            raise InvalidSpecError("stationary distribution must be nonnegative and sum to 1")
        if np.max(np.abs(mu @ P - mu)) > 1e-12:
            raise InvalidSpecError("mu is not stationary for P")
        for a in (P, g, mu):
            a.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "delta", doeblin_coefficient(P, mu))
        g_mean = float(mu @ g)
        object.__setattr__(self, "g_mean", g_mean)
        object.__setattr__(self, "g_max", float(np.max(np.abs(g - g_mean))))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def centered_values(self) -> np.ndarray:
        return self.g - self.g_mean


def two_state_example() -> MarkovChainModel:
    """Two-state chain ``P = [[0.3, 0.7], [0.5, 0.5]]`` observed as its state index."""
    return MarkovChainModel(np.array([[0.3, 0.7], [0.5, 0.5]]), np.array([0.0, 1.0]))


def markov_profile(model: MarkovChainModel) -> MixingProfile:
    """Profile of the centred measurements of a uniformly ergodic chain.

    ``M_q = g_max``, ``Gamma_{d,q} = 4 g_max / (1 - (1-delta)^(1/q))`` and
    ``gamma_q(tau) = min(2 g_max, 4 g_max (1-delta)^(tau/q))``.
    """
    delta = model.delta
    if not 0 < delta <= 1:
        raise InvalidSpecError(f"Doeblin coefficient must lie in (0, 1], got {delta}")
    g = model.g_max
    a = 1.0 - delta

    def moment_bound(q):
        _check_q(q)
        return g

    def gamma_sum(q):
        q = _check_q(q)
        return 4.0 * g / (1.0 - a ** (1.0 / q))

    def gamma_seq(tau, q):
        q = _check_q(q)
        return min(2.0 * g, 4.0 * g * a ** (tau / q))

    def gamma_tail(T, q):
        q = _check_q(q)
        return 4.0 * g * a ** (T / q) / (1.0 - a ** (1.0 / q))

    return MixingProfile(
        moment_bound,
        gamma_sum,
        gamma_seq,
        label=f"markov(S={model.n_states}, delta={delta:.6g}, g_max={g:.6g})",
        gamma_tail=gamma_tail,
        info={"delta": delta, "g_max": g},
    )


# ---------------------------------------------------------------------------
# Linear filters of sub-Gaussian noise


@dataclass(frozen=True)
class LinearProcessModel:
    """``y[k] = sum_l h[l] zeta[k-l]`` with independent sigma-sub-Gaussian ``zeta``.

    ``h`` is stored as an array of shape (taps, n, m). Scalar taps are accepted.
    """

    h: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim == 1:
            h = h[:, None, None]
        elif h.ndim == 2:
            raise InvalidSpecError("impulse response must be a list of scalars or of n x m matrices")
        if h.ndim != 3 or h.shape[0] < 1:
            raise InvalidSpecError(f"impulse response must be nonempty, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise InvalidSpecError("impulse response has non-finite taps")
        if not self.sigma > 0:
            raise InvalidSpecError(f"sigma must be positive, got {self.sigma}")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[2]

    @property
    def taps(self) -> int:
        return self.h.shape[0]

    @property
    def tap_norms(self) -> np.ndarray:
        return np.linalg.norm(self.h, ord=2, axis=(1, 2))

    @property
    def weighted_norm_sum(self) -> float:
        """``sum_l ||h[l]||_2 (l + 1)``, finite by construction."""
        return float(np.sum(self.tap_norms * np.arange(1, self.taps + 1)))


def filter_profile(model: LinearProcessModel) -> MixingProfile:
    """Profile of a causal filter driven by sigma-sub-Gaussian innovations.

    With ``C(q) = 8 m sigma sqrt(q)``: ``M_q = C(q) sum ||h[l]||``,
    ``Gamma_{d,q} = C(q) sum ||h[l]|| (l+1)``, ``gamma_q(tau) = C(q) sum_{p>=tau} ||h[p]||``.
    """
    norms = model.tap_norms
    taps = len(norms)
    # suffix[t] = sum_{p >= t} ||h[p]||
    suffix = np.concatenate([np.cumsum(norms[::-1])[::-1], [0.0]])
    total = float(suffix[0])
    weighted = model.weighted_norm_sum
    scale = 8.0 * model.m * model.sigma

    def moment_bound(q):
        return scale * math.sqrt(_check_q(q)) * total

    def gamma_sum(q):
        return scale * math.sqrt(_check_q(q)) * weighted

    def gamma_seq(tau, q):
        c = scale * math.sqrt(_check_q(q))
        return c * float(suffix[tau]) if tau < taps else 0.0

    def gamma_tail(T, q):
        c = scale * math.sqrt(_check_q(q))
        if T >= taps:
            return 0.0
        p = np.arange(T, taps)
        return c * float(np.sum(norms[T:] * (p - T + 1)))

    return MixingProfile(
        moment_bound,
        gamma_sum,
        gamma_seq,
        label=f"filter(taps={taps}, m={model.m}, sigma={model.sigma:.6g})",
        gamma_tail=gamma_tail,
        support=taps,
        info={"truncation_length": taps, "weighted_norm_sum": weighted},
    )


# ---------------------------------------------------------------------------
# Tables


def table_profile(q_grid, moment, gamma_sum, gamma_seq=None, label="table") -> MixingProfile:
    """Profile from tabulated bounds on an increasing ``q`` grid.

    A query at ``q`` uses the entry of the smallest grid point ``>= q``;
    queries above the grid raise :class:`ProfileRangeError`. Lags past the
    ``gamma_seq`` table are bounded by the untabulated part of ``Gamma_{d,q}``.

    Parameters
    ----------
    q_grid : sequence of float
        Strictly increasing, all ``>= 1``.
    moment, gamma_sum : sequence of float
        ``M_q`` and ``Gamma_{d,q}`` at each grid point.
    gamma_seq : array_like, optional
        Shape (lags, len(q_grid)); ``gamma_q(tau)`` for ``tau = 0..lags-1``.
    """
    q_grid = np.asarray(q_grid, dtype=float).ravel()
    moment = np.asarray(moment, dtype=float).ravel()
    gsum = np.asarray(gamma_sum, dtype=float).ravel()
    if q_grid.size == 0:
        raise InvalidSpecError("table profile needs at least one grid point")
    if moment.shape != q_grid.shape or gsum.shape != q_grid.shape:
        raise InvalidSpecError("moment and gamma_sum tables must match the q grid")
    if q_grid[0] < 1 or np.any(np.diff(q_grid) <= 0):
        raise InvalidSpecError("q grid must be strictly increasing and start at >= 1")
    if np.any(moment < 0) or np.any(gsum < 0) or not np.all(np.isfinite(np.r_[moment, gsum])):
        raise InvalidSpecError("tabulated bounds must be finite and nonnegative")
    if np.any(np.diff(moment) < 0) or np.any(np.diff(gsum) < 0):
        raise InvalidSpecError("tabulated M_q and Gamma_{d,q} must be nondecreasing in q")

    seq = None
    if gamma_seq is not None:
        seq = np.asarray(gamma_seq, dtype=float)
        if seq.ndim == 1:
            seq = seq[:, None].repeat(q_grid.size, axis=1)
        if seq.ndim != 2 or seq.shape[1] != q_grid.size or seq.shape[0] < 1:
            raise InvalidSpecError(f"gamma_seq table must have shape (lags, {q_grid.size})")
        if np.any(seq < 0) or np.any(np.diff(seq, axis=0) > 0):
            raise InvalidSpecError("gamma_seq must be nonnegative and nonincreasing in the lag")
        if np.any(seq.sum(axis=0) > gsum * (1 + 1e-9)):
            raise InvalidSpecError("gamma_seq sums exceed the tabulated Gamma_{d,q}")
        if np.any(seq[0] > 2 * moment * (1 + 1e-12)):
            raise InvalidSpecError("gamma_seq at lag 0 exceeds 2 M_q")

    def column(q):
        q = _check_q(q)
        j = int(np.searchsorted(q_grid, q, side="left"))
        if j >= q_grid.size:
            raise ProfileRangeError(f"q = {q} lies above the table maximum {q_grid[-1]}")
        return j

    def moment_bound(q):
        return float(moment[column(q)])

    def gamma_sum_fn(q):
        return float(gsum[column(q)])

    def remainder(j):
        # bound on the sum of the untabulated coefficients of column j
        done = math.fsum(seq[:, j]) if seq is not None else 0.0
        return max(0.0, float(gsum[j]) - done)

    def gamma_seq_fn(tau, q):
        j = column(q)
        if seq is not None and tau < seq.shape[0]:
            return float(seq[tau, j])
        # nonnegative, nonincreasing terms: each is at most the remaining sum
        cap = min(2.0 * float(moment[j]), remainder(j))
        return min(cap, float(seq[-1, j])) if seq is not None else cap

    def gamma_tail(T, q):
        j = column(q)
        lags = 0 if seq is None else seq.shape[0]
        if T >= lags:
            return remainder(j)
        return max(0.0, float(gsum[j]) - math.fsum(seq[:T, j]))

    return MixingProfile(
        moment_bound,
        gamma_sum_fn,
        gamma_seq_fn,
        label=label,
        gamma_tail=gamma_tail,
        support=0 if seq is None else seq.shape[0],
        info={"q_max": float(q_grid[-1])},
    )
