"""Error certificates for Bartlett/Welch estimates of L-mixing data.

Mixing constants of the data are pushed through the windowed sum (segment
vector) and the outer product, giving the moment constant ``b_q`` of the
deviation bound ``||Phi_k - E Phi_k||_{L_q} <= b_q log2(log2 k) / sqrt(k)``.
A power law ``b_q <= c q^r`` turns that into a radius holding with
probability ``1 - nu``. Bias bounds use the per-lag coefficients ``gamma_2``.

Wherever a continuous-time constant ``Gamma_q`` appears it is replaced by
``2 * Gamma_{d,q}``; that conversion lives only in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import WELCH, WindowSpec, data_budget  # noqa: F401  (re-exported)
from .exceptions import DomainError, InvalidSpecError, NonSummableError
from .mixing import MixingProfile

DEFAULT_Q_GRID = (1.0, 2.0, 4.0, 8.0)
MAX_TAIL_TERMS = 10**6


def _check_q(q):
    q = float(q)
    if not q >= 1:
        raise DomainError(f"moment order q must be >= 1, got {q}")
    return q


def _ratio(segment_len, hop):
    if segment_len < 1 or hop < 1:
        raise DomainError(f"segment length and hop must be >= 1, got M={segment_len}, K={hop}")
    return segment_len / hop


def continuous_gamma(profile: MixingProfile, q: float) -> float:
    """Continuous-time mixing constant of the piecewise-constant embedding, ``2 Gamma_{d,q}``."""
    return 2.0 * profile.gamma_sum(q)


@dataclass(frozen=True)
class PropagatedConstants:
    q: float
    MqYhat: float
    GammaDqYhat: float
    MqZ: float
    GammaDqZ: float
    segment_len: int
    hop: int


def segment_mixing(profile: MixingProfile, q: float, segment_len: int, hop: int):
    """Moment and mixing bounds for the windowed segment sums.

    Returns
    -------
    (M_q(yhat), Gamma_{d,q}(yhat))
    """
    q = _check_q(q)
    ratio = _ratio(segment_len, hop)
    q2 = max(q, 2.0)
    m_hat = 2.0 * math.sqrt(2.0 * (q2 - 1.0) * profile.moment_bound(q2) * profile.gamma_sum(q2))
    g_hat = 2.0 * ratio * m_hat + continuous_gamma(profile, q)
    return m_hat, g_hat


def outer_product_mixing(profile: MixingProfile, q: float, segment_len: int, hop: int):
    """Moment and mixing bounds for the rank-one terms ``yhat yhat^*``.

    Returns
    -------
    (M_q(z), Gamma_{d,q}(z))
    """
    q = _check_q(q)
    ratio = _ratio(segment_len, hop)
    prod = profile.moment_bound(2 * q) * profile.gamma_sum(2 * q)
    m_z = 8.0 * (2 * q - 1) * prod
    inner = 4.0 * ratio * math.sqrt(2.0 * (2 * q - 1) * prod) + continuous_gamma(profile, 2 * q)
    g_z = 48.0 * (2 * q - 1) * prod * inner
    return m_z, g_z


def propagate(profile: MixingProfile, q: float, segment_len: int, hop: int) -> PropagatedConstants:
    m_hat, g_hat = segment_mixing(profile, q, segment_len, hop)
    m_z, g_z = outer_product_mixing(profile, q, segment_len, hop)
    return PropagatedConstants(float(q), m_hat, g_hat, m_z, g_z, segment_len, hop)


def deviation_constant(profile: MixingProfile, q: float, segment_len: int, hop: int) -> float:
    """Constant ``b_q`` of the ``L_q`` deviation bound.

    Uses the data constants at order ``4q``::

        A   = M_{4q} * Gamma_{d,4q}
        b_q = 128 (4q-1) sqrt(3(2q-1)) A (4 (M/K) sqrt(2(4q-1) A) + 2 Gamma_{d,4q})^(1/2)
              + 8 (4q-1) A
    """
    q = _check_q(q)
    ratio = _ratio(segment_len, hop)
    m4 = profile.moment_bound(4 * q)
    g4 = profile.gamma_sum(4 * q)
    A = m4 * g4
    inner = 4.0 * ratio * math.sqrt(2.0 * (4 * q - 1) * A) + 2.0 * g4
    return 128.0 * (4 * q - 1) * math.sqrt(3.0 * (2 * q - 1)) * A * math.sqrt(inner) + 8.0 * (4 * q - 1) * A


def _check_k(k):
    if int(k) != k or k < 4:
        raise DomainError(f"the deviation bound is only asserted for integer k >= 4, got {k}")
    return int(k)


def loglog_rate(k: int) -> float:
    """``log2(log2 k) / sqrt(k)``."""
    k = _check_k(k)
    return math.log2(math.log2(k)) / math.sqrt(k)


def deviation_bound(profile: MixingProfile, q: float, segment_len: int, hop: int, k: int) -> float:
    """``b_q log2(log2 k) / sqrt(k)``, the ``L_q`` bound on the deviation after ``k`` segments."""
    rate = loglog_rate(k)
    return deviation_constant(profile, q, segment_len, hop) * rate


@dataclass(frozen=True)
class PowerLawFit:
    """``b_q <= c q^r`` certified on ``q_grid``.

    ``audited`` holds the refinement points used to extend the certificate
    to the whole interval between the grid endpoints (empty for a grid-only fit).
    """

    c: float
    r: float
    q_grid: tuple
    residual: float
    audited: tuple = ()


def _dense(q_grid, factor=100):
    q = np.asarray(q_grid, dtype=float)
    pts = [q[0]]
    for a, b in zip(q[:-1], q[1:]):
        pts.extend(np.geomspace(a, b, factor + 1)[1:])
    pts[-1] = q[-1]
    return np.asarray(pts)


def power_law_cover(q_grid, values, cover_points=(), cover_values=()) -> PowerLawFit:
    """Cover tabulated ``b_q`` by ``c q^r``.

    ``r`` is the largest log-log slope between consecutive grid points (at
    least 1e-6); ``c`` is the smallest constant with ``cover_values[i] <= c
    cover_points[i]^r`` for every grid point and every optional extra pair.
    """
    q = np.asarray(q_grid, dtype=float)
    b = np.asarray(values, dtype=float)
    if q.size < 2:
        raise InvalidSpecError("power-law fit needs at least two grid points")
    if q[0] < 1 or np.any(np.diff(q) <= 0):
        raise InvalidSpecError(f"q grid must be sorted, strictly increasing and >= 1: {q.tolist()}")
    if np.any(~(b > 0)):
        raise InvalidSpecError("b_q must be strictly positive to fit a power law")
    slopes = np.log(b[1:] / b[:-1]) / np.log(q[1:] / q[:-1])
    r = max(float(np.max(slopes)), 1e-6)
    cq = np.concatenate([q, np.asarray(cover_points, dtype=float)])
    cb = np.concatenate([b, np.asarray(cover_values, dtype=float)])
    c = float(np.max(cb / cq**r))
    residual = float(np.max(b - c * q**r))
    return PowerLawFit(c, r, tuple(q.tolist()), residual, tuple(np.asarray(cover_points, dtype=float).tolist()))


def fit_power_law(profile: MixingProfile, segment_len: int, hop: int, q_grid=DEFAULT_Q_GRID) -> PowerLawFit:
    """Power-law envelope of ``b_q`` valid for every ``q`` between the grid endpoints.

    ``r`` comes from the grid. Since ``b_q`` is nondecreasing in ``q``, the
    envelope holds on ``[q_j, q_{j+1}]`` whenever ``b(q_{j+1}) <= c q_j^r``;
    ``c`` is raised to satisfy this on a 100x geometric refinement.
    """
    q = np.asarray(q_grid, dtype=float)
    if q.size < 2 or np.any(np.diff(q) <= 0):
        raise InvalidSpecError(f"q grid must be sorted with >= 2 points: {q.tolist()}")
    b = [deviation_constant(profile, x, segment_len, hop) for x in q]
    dense = _dense(q)
    dense_b = [deviation_constant(profile, x, segment_len, hop) for x in dense]
    return power_law_cover(q, b, dense[:-1], dense_b[1:])


def dominance_gap(fit: PowerLawFit, fn, points) -> float:
    """``max(fn(q) - c q^r)`` over ``points``; nonpositive when the fit dominates."""
    return max(fn(q) - fit.c * q**fit.r for q in points)


def confidence_radius(fit: PowerLawFit, k: int, nu: float) -> float:
    """Radius exceeded by ``||Phi_k - E Phi_k||_F`` with probability at most ``nu``::

        c * log2(log2 k) / sqrt(k) * e^r * max(1, (ln(1/nu))^r / r^r)
    """
    if not 0 < nu < 1:
        raise DomainError(f"confidence level nu must lie in (0, 1), got {nu}")
    rate = loglog_rate(k)
    r = fit.r
    spread = max(1.0, (math.log(1.0 / nu) / r) ** r)
    return fit.c * rate * math.exp(r) * spread


# ---------------------------------------------------------------------------
# Bias


def window_autocorrelation(v, lag: int) -> float:
    """``sum_{i=lag}^{M-1} v[i-lag] v[i] / ||v||^2``."""
    v = np.asarray(v, dtype=float)
    return float(np.dot(v[: len(v) - lag], v[lag:]) / np.dot(v, v))


def _bias_bound(profile: MixingProfile, segment_len: int, weight, tail_tol: float) -> float:
    if segment_len < 1:
        raise DomainError(f"segment length must be >= 1, got {segment_len}")
    if not tail_tol > 0:
        raise DomainError(f"tail tolerance must be positive, got {tail_tol}")
    m2 = profile.moment_bound(2)
    g = lambda tau: profile.gamma_seq(tau, 2)  # noqa: E731

    # |k| < M, both signs of the lag
    head = weight(0) * g(0) + 2.0 * math.fsum(weight(t) * g(t) for t in range(1, segment_len))

    # |k| >= M
    T = segment_len
    partial = []
    while True:
        rem = profile.tail(T, 2)
        if rem <= tail_tol or (profile.support is not None and T >= profile.support):
            break
        if T - segment_len >= MAX_TAIL_TERMS:
            raise NonSummableError(
                f"lag tail still {rem:.3g} after {MAX_TAIL_TERMS} terms; gamma_2 does not look summable"
            )
        partial.append(g(T))
        T += 1
    tail = 2.0 * (math.fsum(partial) + rem)
    return 2.0 * m2 * (tail + head)


def bias_bound_bartlett(profile: MixingProfile, segment_len: int, tail_tol: float = 1e-12) -> float:
    """Spectral-norm bound on ``Phi(s) - E Phi_k(s)`` for the Bartlett estimator.

    ``2 M_2 sum_{|k|>=M} gamma_2(|k|) + (2 M_2 / M) sum_{|k|<M} |k| gamma_2(|k|)``.
    """
    return _bias_bound(profile, segment_len, lambda t: t / segment_len, tail_tol)


def bias_bound_welch(profile: MixingProfile, segment_len: int, v, tail_tol: float = 1e-12) -> float:
    """Bias bound for the Welch estimator with window ``v``, lag weights taken as printed.

    ``2 M_2 sum_{|k|>=M} gamma_2(|k|) + 2 M_2 sum_{|k|<M} gamma_2(|k|) a(|k|)``
    where ``a`` is :func:`window_autocorrelation`.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size != segment_len:
        raise InvalidSpecError(f"window length {v.size} does not match segment length {segment_len}")
    if not np.any(v):
        raise InvalidSpecError("window vector is identically zero")
    acf = [window_autocorrelation(v, t) for t in range(segment_len)]
    return _bias_bound(profile, segment_len, lambda t: acf[t], tail_tol)


def bias_bound(profile: MixingProfile, spec: WindowSpec, tail_tol: float = 1e-12) -> float:
    """Dispatch on the estimator family of ``spec``."""
    if spec.method == WELCH:
        return bias_bound_welch(profile, spec.segment_len, spec.weights, tail_tol)
    return bias_bound_bartlett(profile, spec.segment_len, tail_tol)


# ---------------------------------------------------------------------------
# Report

REPORT_FIELDS = ("k", "nu", "q", "b_q", "variance_bound", "c", "r", "epsilon", "bias_bound")


@dataclass(frozen=True)
class BoundReport:
    bq: float
    variance_bound: float
    epsilon: float
    bias_bound: float
    k: int
    nu: float
    s: float
    q: float
    fit: PowerLawFit
    label: str = ""
    method: str = ""

    def row(self):
        return (self.k, self.nu, self.q, self.bq, self.variance_bound, self.fit.c, self.fit.r, self.epsilon, self.bias_bound)

    def render(self) -> str:
        lines = [
            f"profile         : {self.label}",
            f"estimator       : {self.method}",
            f"frequency s     : {self.s:g} (bounds do not depend on s)",
            f"segments k      : {self.k}",
            f"moment order q  : {self.q:g}",
            f"b_q             : {self.bq:.6e}",
            f"L_q deviation   : {self.variance_bound:.6e}",
            f"power law       : b_q <= {self.fit.c:.6e} * q^{self.fit.r:.6f}  (grid {list(self.fit.q_grid)})",
            f"radius (nu={self.nu:g}) : {self.epsilon:.6e}",
            f"bias bound      : {self.bias_bound:.6e}  (M_q taken at q = 2)",
        ]
        return "\n".join(lines)


def bound_report(
    profile: MixingProfile,
    spec: WindowSpec,
    k: int,
    nu: float,
    q: float = 1.0,
    s: float = 0.5,
    q_grid=DEFAULT_Q_GRID,
    tail_tol: float = 1e-12,
) -> BoundReport:
    """All certificates for one configuration."""
    M, K = spec.segment_len, spec.hop
    bq = deviation_constant(profile, q, M, K)
    var = bq * loglog_rate(k)
    fit = fit_power_law(profile, M, K, q_grid)
    eps = confidence_radius(fit, k, nu)
    bias = bias_bound(profile, spec, tail_tol)
    return BoundReport(bq, var, eps, bias, int(k), float(nu), float(s), float(q), fit, profile.label, spec.method)
