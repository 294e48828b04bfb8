"""Frequency-domain baseline: H1 FRF estimation, LSCF pole fitting and stabilization diagrams."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import (
    IllConditionedFitError,
    IncompatibleRecordsError,
    InvalidDataError,
    InvalidInputError,
    SegmentationError,
)
from .modal import Pole, StabilitySweep, cluster_poles, make_clusters
from .numkit import eig_general
from .snapshots import SnapshotMatrix

# roots outside this annulus, or more than this damped, are mathematical poles
MIN_ROOT_MODULUS = 1e-8
MAX_ROOT_MODULUS = 1.0 + 1e-6
MAX_DAMPING = 0.5


@dataclass(frozen=True)
class FrfSet:
    frequencies_hz: np.ndarray
    responses: np.ndarray
    weights: np.ndarray
    sampling_period: float
    channel_labels: tuple = ()

    def __post_init__(self):
        f = np.asarray(self.frequencies_hz, dtype=float)
        h = np.atleast_2d(np.asarray(self.responses, dtype=complex))
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if np.any(np.diff(f) <= 0):
            raise InvalidDataError("FRF frequencies must be strictly ascending")
        if h.shape != (h.shape[0], f.size) or w.shape != h.shape:
            raise InvalidDataError(f"responses {h.shape} / weights {w.shape} do not match {f.size} lines")
        if not np.all(np.isfinite(w)):
            raise InvalidDataError("FRF weights must be finite")
        if not self.sampling_period > 0:
            raise InvalidInputError("sampling period must be positive")
        labels = tuple(self.channel_labels) or tuple(f"ch{i + 1}" for i in range(h.shape[0]))
        object.__setattr__(self, "frequencies_hz", f)
        object.__setattr__(self, "responses", h)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_outputs(self) -> int:
        return self.responses.shape[0]

    def band(self, f_lo: float, f_hi: float) -> "FrfSet":
        sel = (self.frequencies_hz >= f_lo) & (self.frequencies_hz <= f_hi)
        return FrfSet(self.frequencies_hz[sel], self.responses[:, sel], self.weights[:, sel],
                      self.sampling_period, self.channel_labels)

    def write_csv(self, path, preamble=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            header = ["frequency_hz"]
            for lab in self.channel_labels:
                header += [f"re_{lab}", f"im_{lab}", f"weight_{lab}"]
            w.writerow(header)
            for k, f in enumerate(self.frequencies_hz):
                row = [repr(float(f))]
                for o in range(self.n_outputs):
                    h = self.responses[o, k]
                    row += [repr(float(h.real)), repr(float(h.imag)), repr(float(self.weights[o, k]))]
                w.writerow(row)


def read_frf_csv(path, sampling_period: float | None = None) -> FrfSet:
    """Read an FRF table written by :meth:`FrfSet.write_csv`.

    Without ``sampling_period`` the top line is taken as the Nyquist
    frequency, T_s = 1 / (2 f_max).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header[0] != "frequency_hz" or (len(header) - 1) % 3:
        raise InvalidDataError(f"{path}: not an FRF table (header {header[:4]}...)")
    labels = tuple(h[3:] for h in header[1::3])
    f = body[:, 0]
    re, im, wt = body[:, 1::3].T, body[:, 2::3].T, body[:, 3::3].T
    ts = sampling_period if sampling_period is not None else 1.0 / (2.0 * f[-1])
    return FrfSet(f, re + 1j * im, wt, ts, labels)


@dataclass(frozen=True)
class SegmentSpec:
    """Welch averaging: segment length in samples (None = whole record), overlap fraction, window."""

    length: int | None = None
    overlap: float = 0.5
    window: str = "hann"


def estimate_frf(force: SnapshotMatrix, response: SnapshotMatrix,
                 averaging: SegmentSpec = SegmentSpec()) -> FrfSet:
    """H1 estimate H = S_fx / S_ff with segment-averaged spectra.

    Weights are the ordinary coherence when at least two segments are
    averaged, otherwise 1.
    """
    if force.n_channels != 1:
        raise IncompatibleRecordsError(f"force record must have one channel, got {force.n_channels}")
    if not np.isclose(force.dt, response.dt, rtol=1e-9, atol=0):
        raise IncompatibleRecordsError(f"force dt {force.dt} differs from response dt {response.dt}")
    if force.n_samples != response.n_samples:
        raise IncompatibleRecordsError(
            f"force has {force.n_samples} samples, response {response.n_samples}"
        )
    n = force.n_samples
    nperseg = n if averaging.length is None else int(averaging.length)
    if nperseg > n:
        raise SegmentationError(f"segment length {nperseg} exceeds record length {n}")
    if nperseg < 2:
        raise SegmentationError("segment length must be at least 2")
    noverlap = min(int(round(averaging.overlap * nperseg)), nperseg - 1)
    n_segments = 1 + (n - nperseg) // (nperseg - noverlap)

    fs = 1.0 / force.dt
    kw = dict(fs=fs, window=averaging.window, nperseg=nperseg, noverlap=noverlap, detrend=False)
    f, sff = scipy.signal.welch(force.data[0], **kw)
    _, sfx = scipy.signal.csd(force.data[0][None, :], response.data, **kw)
    _, sxx = scipy.signal.welch(response.data, **kw)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = sfx / sff
        if n_segments >= 2:
            coh = np.abs(sfx) ** 2 / (sff * sxx)
            weights = np.nan_to_num(coh, nan=0.0, posinf=0.0)
        else:
            weights = np.ones(h.shape)
    keep = sff > 0
    return FrfSet(f[keep], h[:, keep], weights[:, keep], force.dt, response.channel_labels)


@dataclass(frozen=True)
class LscfPole:
    s: complex
    frequency_hz: float
    damping_ratio: float
    stable: bool


@dataclass(frozen=True)
class LscfPoleSet:
    order: int
    poles: list
    denominator: np.ndarray = field(repr=False, default=None)


def _normal_blocks(frf: FrfSet, order: int):
    """Real reduced normal-equation blocks R_o, S_o, T_o for the basis exp(-j p w T_s)."""
    omega = 2 * np.pi * frf.frequencies_hz
    basis = np.exp(-1j * np.outer(omega, np.arange(order + 1)) * frf.sampling_period)
    r = np.empty((frf.n_outputs, order + 1, order + 1))
    s = np.empty_like(r)
    t = np.empty_like(r)
    for o in range(frf.n_outputs):
        gw = basis * frf.weights[o][:, None]
        gh = gw * frf.responses[o][:, None]
        r[o] = np.real(gw.conj().T @ gw)
        s[o] = -np.real(gw.conj().T @ gh)
        t[o] = np.real(gh.conj().T @ gh)
    return r, s, t


def _solve_denominator(r, s, t, order: int) -> np.ndarray:
    n = order + 1
    m = np.zeros((n, n))
    try:
        for ro, so, to in zip(r[:, :n, :n], s[:, :n, :n], t[:, :n, :n]):
            m += to - so.T @ np.linalg.solve(ro, so)
        # a_N = 1 removes the trivial solution
        # noiseless data leaves M nearly singular past the true order yet the
        # solve stays usable, so only exact singularity is rejected
        a = np.linalg.solve(m[:order, :order], -m[:order, order])
        if not np.all(np.isfinite(a)):
            raise np.linalg.LinAlgError("non-finite denominator coefficients")
    except np.linalg.LinAlgError as exc:
        raise IllConditionedFitError(
            f"LSCF normal equations are rank deficient at order {order} ({exc}); "
            "lower the order or restrict the frequency band"
        ) from None
    return np.append(a, 1.0)


def _poles_from_denominator(a: np.ndarray, ts: float, keep_unstable: bool,
                            f_max: float = np.inf) -> list:
    """Roots z of sum_p a_p z^(N-p) via the companion matrix, mapped to s = log(z)/T_s.

    Poles above ``f_max`` (the highest fitted line) are band-edge artefacts
    and are dropped along with the annulus and damping filters.
    """
    a = np.asarray(a, dtype=float)
    lead = np.flatnonzero(a)[0]
    a = a[lead:]
    if a.size < 2:
        return []
    companion = np.zeros((a.size - 1, a.size - 1))
    companion[0] = -a[1:] / a[0]
    companion[1:, :-1] += np.eye(a.size - 2)
    z = eig_general(companion).values
    poles = []
    for root in z:
        mod = abs(root)
        if mod <= MIN_ROOT_MODULUS:
            continue
        s = complex(np.log(root)) / ts
        if s.imag <= 0:
            continue
        freq = abs(s) / (2 * np.pi)
        zeta = -s.real / abs(s)
        if abs(zeta) > MAX_DAMPING or freq > f_max:
            continue
        stable = bool(mod <= MAX_ROOT_MODULUS)
        if not stable and not keep_unstable:
            continue
        poles.append(LscfPole(s, freq, zeta, stable))
    return sorted(poles, key=lambda p: p.frequency_hz)


def lscf_fit(frf: FrfSet, order: int, keep_unstable: bool = False) -> LscfPoleSet:
    """Fit a common-denominator rational model of the given order and return its physical poles.

    :param frf: measured FRFs and their weights
    :param order: polynomial order N_p
    :param keep_unstable: report roots outside the unit circle (flagged
        ``stable=False``) instead of discarding them
    """
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    if frf.frequencies_hz.size <= 2 * (order + 1):
        raise InvalidInputError(
            f"{frf.frequencies_hz.size} frequency lines are too few for order {order}"
        )
    r, s, t = _normal_blocks(frf, order)
    a = _solve_denominator(r, s, t, order)
    return LscfPoleSet(order, _poles_from_denominator(a, frf.sampling_period, keep_unstable,
                                                  frf.frequencies_hz[-1]), a)


def _longest_run(orders) -> int:
    orders = sorted(set(int(o) for o in orders))
    best = run = 0
    prev = None
    for o in orders:
        run = run + 1 if prev is not None and o == prev + 1 else 1
        best = max(best, run)
        prev = o
    return best


def stabilization_diagram(frf: FrfSet, max_order: int, threshold: float = 0.01,
                          min_run: int = 5, keep_unstable: bool = False) -> StabilitySweep:
    """Poles for orders 1..max_order with order-to-order stability labels.

    A pole at order N is stable when a pole at order N - 1 lies within
    ``threshold`` (relative) in frequency.  Stable poles are clustered
    across orders; a cluster counts as a physical mode when its orders
    include a run of ``min_run`` consecutive values.
    """
    if max_order < 2:
        raise InvalidInputError(f"max_order must be >= 2, got {max_order}")
    if frf.frequencies_hz.size <= 2 * (max_order + 1):
        raise InvalidInputError(
            f"{frf.frequencies_hz.size} frequency lines are too few for order {max_order}"
        )
    r, s, t = _normal_blocks(frf, max_order)
    per_order = []
    prev = np.array([])
    for order in range(1, max_order + 1):
        try:
            a = _solve_denominator(r, s, t, order)
            found = _poles_from_denominator(a, frf.sampling_period, keep_unstable,
                                                  frf.frequencies_hz[-1])
        except IllConditionedFitError:
            found = []
        poles = []
        for p in found:
            ok = prev.size > 0 and np.min(np.abs(prev - p.frequency_hz) / prev) <= threshold
            poles.append(Pole(axis_value=float(order), frequency_hz=p.frequency_hz,
                              damping_ratio=p.damping_ratio, source="lscf", stable=bool(ok)))
        per_order.append(poles)
        prev = np.array([p.frequency_hz for p in found])

    stable_poles = [p for step in per_order for p in step if p.stable]
    clusters = make_clusters(cluster_poles(stable_poles, threshold))
    for c in clusters:
        c.stable = _longest_run(p.axis_value for p in c.members) >= min_run
    orders = np.arange(1, max_order + 1, dtype=float)
    return StabilitySweep("polynomial_order", orders, per_order, clusters)
