"""Synthetic data and exact second-order oracles.

Simulators draw from a counter-based generator (Philox) seeded through
:class:`numpy.random.SeedSequence`, so a replication seeded with
``(master_seed, r)`` is reproducible independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from .estimators import TimeSeries, WindowSpec, make_window, reduce_frequency
from .exceptions import DomainError, InvalidSpecError
from .mixing import LinearProcessModel, MarkovChainModel

CHUNK = 1 << 16
INNOVATIONS = ("gaussian", "rademacher")


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int or a tuple of nonnegative ints."""
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(x) for x in np.atleast_1d(seed)]
    if any(x < 0 for x in entropy):
        raise InvalidSpecError(f"seeds must be nonnegative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# ---------------------------------------------------------------------------
# Markov chains


def markov_state_chunks(model: MarkovChainModel, N: int, seed, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Yield the state path ``X_0 .. X_{N-1}`` in blocks, starting from ``mu``."""
    if N < 0:
        raise InvalidSpecError(f"sample count must be >= 0, got {N}")
    if N == 0:
        return
    rng = make_rng(seed)
    S = model.n_states
    cum = np.cumsum(model.P, axis=1)
    x = min(int(np.searchsorted(np.cumsum(model.mu), rng.random(), side="right")), S - 1)
    emitted = 0
    while emitted < N:
        b = min(chunk, N - emitted)
        u = rng.random(b)
        # next state from every possible current state, then walk the path
        nxt = [np.minimum(np.searchsorted(cum[s], u, side="right"), S - 1).tolist() for s in range(S)]
        path = [0] * b
        for t in range(b):
            path[t] = x
            x = nxt[x][t]
        emitted += b
        yield np.asarray(path, dtype=np.intp)


def simulate_markov_states(model: MarkovChainModel, N: int, seed) -> np.ndarray:
    chunks = list(markov_state_chunks(model, N, seed))
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.intp)


def markov_chunks(model: MarkovChainModel, N: int, seed, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Centred measurements ``g(X_t) - g_mean`` as (b, 1) blocks."""
    centred = model.centered_values
    for states in markov_state_chunks(model, N, seed, chunk):
        yield centred[states][:, None]


def simulate_markov(model: MarkovChainModel, N: int, seed) -> TimeSeries:
    """Stationary path of the chain observed through the centred values."""
    states = simulate_markov_states(model, N, seed)
    return TimeSeries(model.centered_values[states][:, None], mean_shifted=True)


# ---------------------------------------------------------------------------
# Linear processes


def _innovations(rng, shape, sigma, kind):
    if kind == "gaussian":
        return sigma * rng.standard_normal(shape)
    if kind == "rademacher":
        return np.where(rng.random(shape) < 0.5, -sigma, sigma)
    raise InvalidSpecError(f"unknown innovation family {kind!r}; expected one of {INNOVATIONS}")


def linear_chunks(
    model: LinearProcessModel, N: int, seed, innovation: str = "gaussian", chunk: int = CHUNK
) -> Iterator[np.ndarray]:
    """Filtered innovations in (b, n) blocks with ``taps - 1`` warm-up draws."""
    if N < 0:
        raise InvalidSpecError(f"sample count must be >= 0, got {N}")
    if innovation not in INNOVATIONS:
        raise InvalidSpecError(f"unknown innovation family {innovation!r}; expected one of {INNOVATIONS}")
    if N == 0:
        return
    rng = make_rng(seed)
    T = model.taps - 1
    h = model.h
    history = _innovations(rng, (T, model.m), model.sigma, innovation)
    emitted = 0
    while emitted < N:
        b = min(chunk, N - emitted)
        zeta = np.concatenate([history, _innovations(rng, (b, model.m), model.sigma, innovation)])
        y = np.zeros((b, model.n))
        for lag in range(model.taps):
            y += zeta[T - lag : T - lag + b] @ h[lag].T
        history = zeta[len(zeta) - T :] if T else zeta[:0]
        emitted += b
        yield y


def simulate_linear_process(model: LinearProcessModel, N: int, seed, innovation: str = "gaussian") -> TimeSeries:
    """``y[k] = sum_l h[l] zeta[k-l]`` with Gaussian (std sigma) or +-sigma innovations."""
    chunks = list(linear_chunks(model, N, seed, innovation))
    data = np.concatenate(chunks) if chunks else np.zeros((0, model.n))
    return TimeSeries(data, mean_shifted=True)


def data_chunks(model, N: int, seed, innovation: str = "gaussian", chunk: int = CHUNK):
    if isinstance(model, MarkovChainModel):
        return markov_chunks(model, N, seed, chunk)
    return linear_chunks(model, N, seed, innovation, chunk)


def simulate(model, N: int, seed, innovation: str = "gaussian") -> TimeSeries:
    if isinstance(model, MarkovChainModel):
        return simulate_markov(model, N, seed)
    return simulate_linear_process(model, N, seed, innovation)


# ---------------------------------------------------------------------------
# Oracles


@dataclass(frozen=True)
class AutocovarianceSequence:
    """``R[k] = E[y[i+k] y[i]^T]`` with envelope ``||R[k]|| <= envelope * decay_rate^|k|``.

    ``max_lag`` is set when ``R[k] = 0`` for ``|k| > max_lag``.
    """

    func: Callable[[int], np.ndarray]
    decay_rate: float
    envelope: float
    n: int = 1
    max_lag: Optional[int] = None

    def __call__(self, lag: int) -> np.ndarray:
        lag = int(lag)
        if lag < 0:
            return self.func(-lag).T
        return self.func(lag)


def markov_autocovariance(model: MarkovChainModel) -> AutocovarianceSequence:
    """Exact autocovariance of the centred measurements.

    ``R[k] = sum_{i,j} mu_i (P^k)_{ij} gc_i gc_j`` by repeated matrix-vector
    products. The envelope comes from the eigen-decomposition of ``P``.
    """
    P = model.P
    gc = model.centered_values
    weighted = model.mu * gc
    cache = [gc.copy()]

    def func(k):
        while len(cache) <= k:
            cache.append(P @ cache[-1])
        return np.array([[float(weighted @ cache[k])]])

    lam, V = np.linalg.eig(P)
    order = np.argsort(-np.abs(lam))
    lam, V = lam[order], V[:, order]
    rest = np.abs(lam[1:])
    rho = float(rest.max()) if rest.size else 0.0
    coef = np.linalg.solve(V, gc.astype(complex))
    proj = np.array([np.sum(weighted * V[:, j]) for j in range(len(lam))])
    contrib = np.abs(coef * proj)
    envelope = float(np.sum(contrib[1:]))
    envelope = max(envelope * (1 + 1e-9), abs(func(0)[0, 0]))
    return AutocovarianceSequence(func, min(rho, 1.0), envelope, n=1)


def linear_autocovariance(model: LinearProcessModel) -> AutocovarianceSequence:
    """``R[k] = sigma^2 sum_l h[l+k] h[l]^T``, zero beyond the filter length."""
    h = model.h
    taps = model.taps
    s2 = model.sigma**2
    table = [s2 * sum(h[lag + k] @ h[lag].T for lag in range(taps - k)) for k in range(taps)]

    def func(k):
        return table[k].copy() if k < taps else np.zeros((model.n, model.n))

    rate = 0.5
    envelope = max(np.linalg.norm(table[k], 2) / rate**k for k in range(taps))
    return AutocovarianceSequence(func, rate, float(envelope), n=model.n, max_lag=taps - 1)


def autocovariance(model) -> AutocovarianceSequence:
    if isinstance(model, MarkovChainModel):
        return markov_autocovariance(model)
    return linear_autocovariance(model)


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density ``Phi(s) = sum_k exp(-2j pi s k) R[k]`` truncated at ``truncation_lag``."""

    lags: np.ndarray
    truncation_lag: int

    def __call__(self, s: float) -> np.ndarray:
        s = reduce_frequency(s)
        k = np.arange(1, self.truncation_lag + 1)
        ph = np.exp(-2j * np.pi * s * k)[:, None, None]
        R = self.lags
        out = R[0].astype(complex) + np.sum(ph * R[1:] + np.conj(ph) * np.swapaxes(R[1:], 1, 2), axis=0)
        return 0.5 * (out + out.conj().T)


def true_psd(R: AutocovarianceSequence, tol: float = 1e-14) -> SpectralDensity:
    """Spectral density with the lag sum cut where the envelope remainder drops below ``tol``."""
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    rho = R.decay_rate
    if R.max_lag is not None:
        T = R.max_lag
    else:
        if not rho < 1:
            raise DomainError(f"decay rate {rho} >= 1: the lag sum does not converge")
        if rho == 0 or R.envelope == 0:
            T = 0
        else:
            # two-sided remainder 2 C rho^(T+1) / (1 - rho) < tol
            T = max(0, math.ceil(math.log(tol * (1 - rho) / (2 * R.envelope)) / math.log(rho)))
    lags = np.stack([np.asarray(R(k), dtype=float) for k in range(T + 1)])
    return SpectralDensity(lags, T)


def expected_estimate(R: AutocovarianceSequence, spec: WindowSpec, s: float) -> np.ndarray:
    """Exact mean of one rank-one term, ``sum_{k,l} w_k conj(w_l) R[k-l]``."""
    w = make_window(spec, s)
    M = spec.segment_len
    out = np.zeros((R.n, R.n), dtype=complex)
    for d in range(-(M - 1), M):
        if d >= 0:
            coef = np.sum(w[d:] * np.conj(w[: M - d]))
        else:
            coef = np.sum(w[: M + d] * np.conj(w[-d:]))
        out += coef * R(d)
    return 0.5 * (out + out.conj().T)
