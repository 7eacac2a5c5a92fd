"""Readers and writers for series, estimates, models, profiles and configs.

Model and experiment files are TOML. A Markov model may also be given as a
CSV whose rows are ``P[i, 0], ..., P[i, S-1], g[i]``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import tomli

from .estimators import SpectralEstimate, TimeSeries, WindowSpec, hann_window
from .exceptions import DataFileError, InvalidSpecError
from .mixing import LinearProcessModel, MarkovChainModel, MixingProfile, table_profile


class ModelFileError(InvalidSpecError):
    """A model, profile or config file is malformed; the message names the field."""


# ---------------------------------------------------------------------------
# Time series and estimates


def read_timeseries_csv(path, header: bool = False) -> TimeSeries:
    """One sample per row, one column per component."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        return TimeSeries(np.zeros((0, 1)))
    if len({len(r) for r in rows}) != 1:
        raise DataFileError(f"{path}: rows have differing column counts")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise DataFileError(f"{path}: non-numeric sample ({exc})") from exc
    return TimeSeries(data)


def write_timeseries_csv(series: TimeSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in series.data:
            w.writerow([repr(float(x)) for x in row])


def _upper_index(n):
    # column-major upper triangle: (0,0), (0,1), (1,1), (0,2), ...
    return [(i, j) for j in range(n) for i in range(j + 1)]


def estimate_header(n: int) -> list[str]:
    cols = ["k", "s"]
    for i, j in _upper_index(n):
        cols += [f"re_{i + 1}{j + 1}", f"im_{i + 1}{j + 1}"]
    return cols


def write_estimates_csv(estimates, path) -> None:
    """Rows ``k, s, re(Phi_11), im(Phi_11), ...`` over the column-major upper triangle."""
    estimates = list(estimates)
    n = estimates[0].n if estimates else 1
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(estimate_header(n))
        for est in estimates:
            row = [est.segments, repr(float(est.freq))]
            for i, j in _upper_index(n):
                z = est.matrix[i, j]
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)


def read_estimates_csv(path) -> list[SpectralEstimate]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for r in rows[1:]:
        m = (len(r) - 2) // 2
        n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
        mat = np.zeros((n, n), dtype=complex)
        for c, (i, j) in enumerate(_upper_index(n)):
            mat[i, j] = complex(float(r[2 + 2 * c]), float(r[3 + 2 * c]))
            if i != j:
                mat[j, i] = np.conj(mat[i, j])
        out.append(SpectralEstimate(mat, int(r[0]), float(r[1])))
    return out


# ---------------------------------------------------------------------------
# Models


def _field(table, key, where):
    if key not in table:
        raise ModelFileError(f"{where}: missing field '{key}'")
    return table[key]


def _array(value, key, where, ndim=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{where}: field '{key}' is not a numeric array") from exc
    if ndim is not None and arr.ndim != ndim:
        raise ModelFileError(f"{where}: field '{key}' must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def model_from_dict(doc: dict, where: str = "model"):
    """Build a model from a parsed ``[markov]`` or ``[linear]`` table."""
    if "markov" in doc:
        t = doc["markov"]
        P = _array(_field(t, "transition", f"{where} [markov]"), "markov.transition", where, 2)
        g = _array(_field(t, "values", f"{where} [markov]"), "markov.values", where, 1)
        mu = t.get("stationary")
        mu = None if mu is None else _array(mu, "markov.stationary", where, 1)
        try:
            return MarkovChainModel(P, g, mu)
        except InvalidSpecError as exc:
            raise ModelFileError(f"{where}: field 'markov': {exc}") from exc
    if "linear" in doc:
        t = doc["linear"]
        h = _array(_field(t, "impulse_response", f"{where} [linear]"), "linear.impulse_response", where)
        sigma = t.get("sigma", 1.0)
        try:
            return LinearProcessModel(h, float(sigma))
        except (InvalidSpecError, TypeError, ValueError) as exc:
            raise ModelFileError(f"{where}: field 'linear': {exc}") from exc
    raise ModelFileError(f"{where}: expected a [markov] or [linear] table")


def load_model(path):
    """Read a Markov or linear model from TOML, or a Markov model from CSV."""
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"model file {path} does not exist")
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        try:
            arr = np.array([[float(c) for c in r] for r in rows])
        except ValueError as exc:
            raise ModelFileError(f"{path}: non-numeric entry ({exc})") from exc
        if arr.ndim != 2 or arr.shape[1] != arr.shape[0] + 1:
            raise ModelFileError(f"{path}: expected S rows of S transition probabilities plus a value")
        try:
            return MarkovChainModel(arr[:, :-1], arr[:, -1])
        except InvalidSpecError as exc:
            raise ModelFileError(f"{path}: field 'transition': {exc}") from exc
    try:
        doc = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    return model_from_dict(doc, str(path))


def innovation_from_dict(doc: dict) -> str:
    return str(doc.get("linear", {}).get("innovation", "gaussian"))


# ---------------------------------------------------------------------------
# Profiles


def write_profile_csv(profile: MixingProfile, q_grid, path, lags: int = 0) -> None:
    """Rows ``q, M_q, Gamma_dq`` and, if ``lags > 0``, ``gamma_0 .. gamma_{lags-1}``."""
    header = ["q", "M_q", "Gamma_dq"] + [f"gamma_{t}" for t in range(lags)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for q, m, g in profile.rows(q_grid):
            w.writerow([repr(q), repr(float(m)), repr(float(g))] + [repr(float(profile.gamma_seq(t, q))) for t in range(lags)])


def read_profile_csv(path) -> MixingProfile:
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"profile file {path} does not exist")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or [c.strip() for c in rows[0][:3]] != ["q", "M_q", "Gamma_dq"]:
        raise ModelFileError(f"{path}: header must start with q,M_q,Gamma_dq")
    try:
        arr = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ModelFileError(f"{path}: non-numeric entry ({exc})") from exc
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ModelFileError(f"{path}: no profile rows")
    seq = arr[:, 3:].T if arr.shape[1] > 3 else None
    try:
        return table_profile(arr[:, 0], arr[:, 1], arr[:, 2], seq, label=f"table({path.name})")
    except InvalidSpecError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Window specs and experiment configs


def window_spec(method: str, segment_len: int, hop=None, window: str = "rect") -> WindowSpec:
    """Resolve ``window`` as ``rect``, ``hann`` or a path to a one-column CSV."""
    method = method.lower()
    if method == "bartlett":
        return WindowSpec("bartlett", segment_len, hop)
    if window == "rect":
        v = np.ones(segment_len)
    elif window == "hann":
        v = hann_window(segment_len)
    else:
        p = Path(window)
        if not p.exists():
            raise ModelFileError(f"window file {p} does not exist")
        v = np.loadtxt(p, delimiter=",", ndmin=1)
    return WindowSpec(method, segment_len, hop, tuple(v))


def load_config(path) -> dict:
    """Parse an experiment TOML file into keyword arguments and a model."""
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"config file {path} does not exist")
    try:
        doc = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    out = {}
    for key in ("seed", "replications", "nu", "freq", "checkpoints", "q_grid", "profile", "workers"):
        if key in doc:
            out[key] = doc[key]
    est = doc.get("estimator", {})
    for key in ("method", "segment_len", "hop", "window"):
        if key in est:
            out[key] = est[key]
    if "model" in doc:
        model_path = Path(doc["model"])
        if not model_path.is_absolute():
            model_path = path.parent / model_path
        out["model"] = load_model(model_path)
    elif "markov" in doc or "linear" in doc:
        out["model"] = model_from_dict(doc, str(path))
        out["innovation"] = innovation_from_dict(doc)
    if "profile" in out and not Path(out["profile"]).is_absolute():
        out["profile"] = str(path.parent / out["profile"])
    return out
