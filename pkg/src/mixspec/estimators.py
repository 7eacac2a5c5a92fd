"""Bartlett and Welch spectral estimates at a single frequency.

Estimates are evaluated by direct summation: every segment of the record is
projected onto the unit window vector ``w(s)`` and the resulting rank-one
matrices are averaged, either in one pass (:func:`batch_estimate`) or with
the running-mean recursion ``x <- x + (z - x) / (k + 1)``
(:func:`streaming_update`, :func:`streaming_run`).

Inputs are assumed to be zero mean. Nothing here subtracts a sample mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import InsufficientDataError, InvalidSpecError

BARTLETT = "bartlett"
WELCH = "welch"
METHODS = (BARTLETT, WELCH)


def hann_window(segment_len: int) -> np.ndarray:
    """Symmetric Hann taper without the zero endpoints.

    ``v[i] = 0.5 * (1 - cos(2*pi*(i + 1) / (M + 1)))`` for ``i = 0..M-1``.
    """
    if segment_len < 1:
        raise InvalidSpecError(f"segment length must be >= 1, got {segment_len}")
    i = np.arange(segment_len)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * (i + 1) / (segment_len + 1)))


@dataclass(frozen=True)
class WindowSpec:
    """Estimator family, segment length, hop and window shape.

    For Bartlett the hop must equal the segment length and the window is
    forced to all ones.
    """

    method: str
    segment_len: int
    hop: int | None = None
    window: tuple[float, ...] | None = None

    def __post_init__(self):
        method = str(self.method).lower()
        if method not in METHODS:
            raise InvalidSpecError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "method", method)
        M = int(self.segment_len)
        if M < 1:
            raise InvalidSpecError(f"segment length must be >= 1, got {self.segment_len}")
        object.__setattr__(self, "segment_len", M)
        hop = M if self.hop is None else int(self.hop)
        if hop < 1:
            raise InvalidSpecError(f"hop must be >= 1, got {self.hop}")
        if method == BARTLETT and hop != M:
            raise InvalidSpecError(f"Bartlett requires hop == segment length ({hop} != {M})")
        object.__setattr__(self, "hop", hop)

        if method == BARTLETT or self.window is None:
            v = (1.0,) * M
        else:
            v = tuple(float(x) for x in np.asarray(self.window, dtype=float).ravel())
        if len(v) != M:
            raise InvalidSpecError(f"window has length {len(v)}, segment length is {M}")
        if not all(math.isfinite(x) for x in v):
            raise InvalidSpecError("window contains non-finite entries")
        if not any(v):
            raise InvalidSpecError("window vector is identically zero")
        object.__setattr__(self, "window", v)

    @classmethod
    def bartlett(cls, segment_len: int) -> "WindowSpec":
        return cls(BARTLETT, segment_len)

    @classmethod
    def welch(cls, window, hop: int) -> "WindowSpec":
        window = np.asarray(window, dtype=float)
        return cls(WELCH, len(window), hop, tuple(window))

    @classmethod
    def hann(cls, segment_len: int, hop: int) -> "WindowSpec":
        return cls.welch(hann_window(segment_len), hop)

    @property
    def weights(self) -> np.ndarray:
        return np.array(self.window, dtype=float)

    @property
    def overlap_ratio(self) -> float:
        """Segment length over hop, the ``M/K`` factor in the bounds."""
        return self.segment_len / self.hop


@dataclass(frozen=True)
class TimeSeries:
    """A record of ``N`` real samples of dimension ``n`` stored as an (N, n) array."""

    data: np.ndarray
    mean_shifted: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise InvalidSpecError(f"time series must be 1-D or 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise InvalidSpecError("sample dimension must be >= 1")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SegmentVector:
    value: np.ndarray
    index: int
    freq: float


@dataclass(frozen=True)
class SpectralEstimate:
    """Hermitian ``n x n`` estimate at frequency ``freq`` from ``segments`` segments."""

    matrix: np.ndarray
    segments: int
    freq: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def value(self) -> float:
        """Real scalar value for one-dimensional data."""
        if self.n != 1:
            raise ValueError("value is only defined for scalar series")
        return float(self.matrix[0, 0].real)


@dataclass(frozen=True)
class EstimatorState:
    """Running-mean state after ``k`` segments; ``k = 0`` is the zero matrix."""

    current: SpectralEstimate
    k: int = field(default=0)

    @classmethod
    def initial(cls, n: int, freq: float = 0.0) -> "EstimatorState":
        zero = np.zeros((n, n), dtype=complex)
        return cls(SpectralEstimate(zero, 0, freq), 0)

    @property
    def matrix(self) -> np.ndarray:
        return self.current.matrix


def reduce_frequency(s: float) -> float:
    """Map ``s`` onto [-1/2, 1/2] using the unit period of ``w(s)``."""
    s = float(s)
    if not math.isfinite(s):
        raise InvalidSpecError(f"frequency must be finite, got {s}")
    return s - round(s)


def data_budget(k: int, segment_len: int, hop: int) -> int:
    """Samples needed for ``k`` segments: indices ``0 .. (k-1)*hop + segment_len - 1``."""
    if k < 1:
        raise InvalidSpecError(f"segment count must be >= 1, got {k}")
    return (k - 1) * hop + (segment_len - 1) + 1


def make_window(spec: WindowSpec, s: float) -> np.ndarray:
    """Unit-norm complex window ``w_k(s) = v_k / ||v|| * exp(-2j*pi*k*s)``."""
    s = reduce_frequency(s)
    v = spec.weights
    v = v / np.linalg.norm(v)
    phase = 2.0 * np.pi * s * np.arange(spec.segment_len)
    return v * (np.cos(phase) - 1j * np.sin(phase))


def _check_length(y: TimeSeries, spec: WindowSpec, first: int, count: int):
    need = data_budget(first + count, spec.segment_len, spec.hop)
    if len(y) < need:
        raise InsufficientDataError(need, len(y))


def segment_vectors(y: TimeSeries, spec: WindowSpec, s: float, count: int, first: int = 0) -> np.ndarray:
    """Windowed sums for segments ``first .. first+count-1`` as a (count, n) complex array."""
    if count < 0 or first < 0:
        raise InvalidSpecError("segment index and count must be nonnegative")
    if count == 0:
        return np.zeros((0, y.n), dtype=complex)
    _check_length(y, spec, first, count)
    w = make_window(spec, s)
    M, K = spec.segment_len, spec.hop
    start = first * K
    stop = start + (count - 1) * K + M
    # (count, n, M) strided view, no copy
    blocks = sliding_window_view(y.data[start:stop], M, axis=0)[::K]
    return blocks @ w


def segment_transform(y: TimeSeries, spec: WindowSpec, s: float, i: int) -> SegmentVector:
    """The windowed sum of segment ``i``, i.e. samples ``i*K .. i*K + M - 1``."""
    value = segment_vectors(y, spec, s, 1, first=i)[0]
    if not np.all(np.isfinite(value)):
        raise InvalidSpecError(f"segment {i} produced a non-finite value")
    return SegmentVector(value, int(i), reduce_frequency(s))


def rank_one_terms(yhat: np.ndarray) -> np.ndarray:
    """Stack of outer products ``yhat_i yhat_i^*`` with shape (L, n, n)."""
    yhat = np.atleast_2d(yhat)
    return yhat[:, :, None] * np.conj(yhat[:, None, :])


def _hermitian(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _compensated_mean(terms: np.ndarray) -> np.ndarray:
    L, n, _ = terms.shape
    flat = terms.reshape(L, n * n)
    out = np.empty(n * n, dtype=complex)
    for j in range(n * n):
        out[j] = complex(math.fsum(flat[:, j].real), math.fsum(flat[:, j].imag)) / L
    return out.reshape(n, n)


def batch_estimate(y: TimeSeries, spec: WindowSpec, s: float, L: int) -> SpectralEstimate:
    """Average of the first ``L`` rank-one segment terms.

    Sums are exactly rounded (``math.fsum``) per entry before dividing by ``L``.
    """
    s = reduce_frequency(s)
    if L < 0:
        raise InvalidSpecError(f"segment count must be >= 0, got {L}")
    if L == 0:
        return SpectralEstimate(np.zeros((y.n, y.n), dtype=complex), 0, s)
    terms = rank_one_terms(segment_vectors(y, spec, s, L))
    return SpectralEstimate(_hermitian(_compensated_mean(terms)), L, s)


def streaming_update(state: EstimatorState, z) -> EstimatorState:
    """One step of ``x_{k+1} = x_k + (z_k - x_k) / (k + 1)``."""
    z = np.asarray(z, dtype=complex)
    x = state.matrix
    if z.shape != x.shape:
        raise InvalidSpecError(f"term has shape {z.shape}, state has shape {x.shape}")
    alpha = 1.0 / (state.k + 1)
    new = x + alpha * (z - x)
    return EstimatorState(SpectralEstimate(new, state.k + 1, state.current.freq), state.k + 1)


def _check_checkpoints(checkpoints) -> list[int]:
    cps = [int(c) for c in checkpoints]
    if any(c < 0 for c in cps):
        raise InvalidSpecError("checkpoints must be nonnegative")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise InvalidSpecError(f"checkpoints must be strictly increasing: {cps}")
    return cps


class RunningEstimate:
    """Online estimate fed with consecutive blocks of samples.

    Completed segments are folded into the running mean with the same
    arithmetic as :func:`streaming_update`; a snapshot is stored each time the
    segment count reaches a checkpoint. Segments beyond the last checkpoint
    are ignored.
    """

    def __init__(self, spec: WindowSpec, s: float, n: int, checkpoints, window=None):
        self.spec = spec
        self.freq = reduce_frequency(s)
        self.n = int(n)
        self.checkpoints = _check_checkpoints(checkpoints)
        self._w = make_window(spec, s) if window is None else window
        self._buf = np.zeros((0, self.n))
        self._x = [0.0] * (2 * self.n * self.n)
        self.k = 0
        self.snapshots: list[SpectralEstimate] = []
        while len(self.snapshots) < len(self.checkpoints) and self.checkpoints[len(self.snapshots)] == 0:
            self.snapshots.append(SpectralEstimate(np.zeros((self.n, self.n), dtype=complex), 0, self.freq))

    @property
    def done(self) -> bool:
        return len(self.snapshots) == len(self.checkpoints)

    def push(self, samples) -> None:
        samples = np.asarray(samples, dtype=float).reshape(-1, self.n)
        if self.done:
            return
        buf = np.concatenate([self._buf, samples]) if len(self._buf) else samples
        M, K = self.spec.segment_len, self.spec.hop
        avail = (len(buf) - M) // K + 1 if len(buf) >= M else 0
        count = min(avail, self.checkpoints[-1] - self.k)
        if count > 0:
            blocks = sliding_window_view(buf[: (count - 1) * K + M], M, axis=0)[::K]
            terms = rank_one_terms(blocks @ self._w)
            self._advance(terms.reshape(count, -1).view(float))
        self._buf = buf[count * K:].copy() if count > 0 else buf.copy()

    def _advance(self, cols: np.ndarray) -> None:
        b = cols.shape[0]
        k0 = self.k
        stops = [c - k0 for c in self.checkpoints if k0 < c <= k0 + b]
        snaps = np.empty((len(stops), cols.shape[1]))
        for j in range(cols.shape[1]):
            col = cols[:, j].tolist()
            x = self._x[j]
            pos = 0
            for c, stop in enumerate(stops + [b]):
                for t in range(pos, stop):
                    x = x + (1.0 / (k0 + t + 1)) * (col[t] - x)
                if c < len(stops):
                    snaps[c, j] = x
                pos = stop
            self._x[j] = x
        self.k = k0 + b
        n = self.n
        for row, stop in zip(snaps.view(complex), stops):
            self.snapshots.append(SpectralEstimate(row.reshape(n, n), k0 + stop, self.freq))

    @property
    def state(self) -> EstimatorState:
        x = np.array(self._x).view(complex).reshape(self.n, self.n)
        return EstimatorState(SpectralEstimate(x, self.k, self.freq), self.k)


def streaming_run(y: TimeSeries, spec: WindowSpec, s: float, checkpoints) -> list[SpectralEstimate]:
    """Run the recursion over the record and snapshot it after each checkpoint count."""
    cps = _check_checkpoints(checkpoints)
    if not cps:
        return []
    if cps[-1] > 0:
        _check_length(y, spec, 0, cps[-1])
    run = RunningEstimate(spec, s, y.n, cps)
    run.push(y.data)
    return run.snapshots
