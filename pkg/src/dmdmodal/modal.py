"""Cross-method modal metrics: MAC, pseudo-stability sweeps, pole selection, POD pairing."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dmd import DmdOptions, dmd_decompose
from .errors import (
    DecimationError,
    IncompatibleModesError,
    InvalidInputError,
    InvalidSweepError,
    PerturbationTooLargeError,
    UndefinedMacError,
)
from .itd import itd_extract
from .numkit import svd_truncate
from .snapshots import SnapshotMatrix, build_pair, decimate, remove_mean

# relative frequency tolerance for clustering, and fraction of eligible steps a cluster must span
CLUSTER_TOLERANCE = 0.01
STABLE_FRACTION = 0.8
MIN_MEMBERS = 3


def mac(a, b) -> float:
    """Modal assurance criterion |a* b|^2 / ((a* a)(b* b))."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        raise IncompatibleModesError(f"mode lengths differ: {a.size} vs {b.size}")
    aa = np.vdot(a, a).real
    bb = np.vdot(b, b).real
    if aa == 0 or bb == 0:
        raise UndefinedMacError("MAC is undefined for a zero vector")
    return float(min(abs(np.vdot(a, b)) ** 2 / (aa * bb), 1.0))


@dataclass(frozen=True)
class MacMatrix:
    values: np.ndarray
    row_labels: tuple
    column_labels: tuple

    def write_csv(self, path, percent: bool = True, preamble=()) -> None:
        scale = 100.0 if percent else 1.0
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["mode", *self.column_labels])
            for label, row in zip(self.row_labels, self.values):
                w.writerow([label, *(f"{scale * v:.6f}" for v in row)])


def mac_matrix(modes_a, modes_b, row_labels=None, column_labels=None) -> MacMatrix:
    """MAC between every column of ``modes_a`` and every column of ``modes_b``."""
    a = np.atleast_2d(np.asarray(modes_a, dtype=complex))
    b = np.atleast_2d(np.asarray(modes_b, dtype=complex))
    if a.shape[0] != b.shape[0]:
        raise IncompatibleModesError(
            f"mode sets have {a.shape[0]} and {b.shape[0]} channels"
        )
    na = np.einsum("ij,ij->j", a.conj(), a).real
    nb = np.einsum("ij,ij->j", b.conj(), b).real
    if np.any(na == 0) or np.any(nb == 0):
        raise UndefinedMacError("MAC is undefined for a zero vector")
    values = np.minimum(np.abs(a.conj().T @ b) ** 2 / np.outer(na, nb), 1.0)
    for i in range(min(a.shape[1], b.shape[1])):
        if a[:, i].shape == b[:, i].shape and np.array_equal(a[:, i], b[:, i]):
            values[i, i] = 1.0
    rows = tuple(row_labels) if row_labels is not None else tuple(range(1, a.shape[1] + 1))
    cols = tuple(column_labels) if column_labels is not None else tuple(range(1, b.shape[1] + 1))
    return MacMatrix(values, rows, cols)


def oscillatory(result, min_frequency_hz: float = 0.0) -> np.ndarray:
    """Indices of positive-frequency members of conjugate pairs above ``min_frequency_hz``."""
    s = np.asarray(result.continuous_eigs)
    f = np.asarray(result.frequencies_hz)
    return np.flatnonzero((s.imag > 0) & (f > min_frequency_hz))


def match_modes(frequencies_hz, reference_hz) -> np.ndarray:
    """For each reference frequency, the index of the nearest candidate frequency."""
    f = np.asarray(frequencies_hz, dtype=float)
    if f.size == 0:
        raise IncompatibleModesError("no candidate poles to match")
    return np.array([int(np.nanargmin(np.abs(f - r))) for r in np.asarray(reference_hz, float)])


def percentage_error(value, reference):
    return 100.0 * np.abs(np.asarray(value) - np.asarray(reference)) / np.abs(reference)


@dataclass
class Pole:
    axis_value: float
    frequency_hz: float
    damping_ratio: float
    amplitude: float = math.nan
    source: str = ""
    mode: np.ndarray | None = field(default=None, repr=False)
    stable: bool = False
    cluster_id: int = -1


@dataclass
class Cluster:
    cluster_id: int
    mean_frequency: float
    mean_damping: float
    member_count: int
    spread: float
    members: list = field(repr=False)
    stable: bool = False


@dataclass
class StabilitySweep:
    axis_name: str
    axis_values: np.ndarray
    poles_per_step: list
    clusters: list

    @property
    def stable_clusters(self) -> list:
        return [c for c in self.clusters if c.stable]

    def write_csv(self, path, axis_header: str | None = None, preamble=()) -> None:
        """One row per pole: axis value, frequency, damping, stable flag, cluster id."""
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow([axis_header or "axis_value", "frequency_hz", "zeta", "stable_flag", "cluster_id"])
            for poles in self.poles_per_step:
                for p in poles:
                    w.writerow([f"{p.axis_value:.12g}", f"{p.frequency_hz:.12g}",
                                f"{p.damping_ratio:.12g}", int(p.stable), p.cluster_id])


def cluster_poles(poles, tolerance: float = CLUSTER_TOLERANCE) -> list:
    """Group poles across sweep steps by relative frequency.

    Scanning upward in frequency, each unassigned pole anchors a window
    [f, f (1 + tolerance)]; from every step inside the window the pole
    nearest the window median joins the cluster.  Clusters therefore never
    hold two poles from the same step and their spread is at most
    ``tolerance`` times the anchor frequency.
    """
    ordered = sorted(poles, key=lambda p: (p.frequency_hz, p.axis_value))
    assigned = [False] * len(ordered)
    groups = []
    for i, anchor in enumerate(ordered):
        if assigned[i]:
            continue
        hi = anchor.frequency_hz * (1.0 + tolerance)
        window = [j for j in range(i, len(ordered))
                  if not assigned[j] and ordered[j].frequency_hz <= hi]
        centre = float(np.median([ordered[j].frequency_hz for j in window]))
        best = {}
        for j in window:
            p = ordered[j]
            k = best.get(p.axis_value)
            if k is None or abs(p.frequency_hz - centre) < abs(ordered[k].frequency_hz - centre):
                best[p.axis_value] = j
        chosen = sorted(set(best.values()) | {i})
        # the anchor always belongs to its own cluster; drop a same-step rival
        chosen = [j for j in chosen if j == i or ordered[j].axis_value != anchor.axis_value]
        for j in chosen:
            assigned[j] = True
        groups.append([ordered[j] for j in chosen])
    return groups


def make_clusters(groups) -> list:
    clusters = []
    for members in sorted(groups, key=lambda g: np.mean([p.frequency_hz for p in g])):
        f = np.array([p.frequency_hz for p in members])
        z = np.array([p.damping_ratio for p in members])
        cid = len(clusters)
        for p in members:
            p.cluster_id = cid
        clusters.append(Cluster(
            cluster_id=cid,
            mean_frequency=float(f.mean()),
            mean_damping=float(np.nanmean(z)) if np.any(np.isfinite(z)) else math.nan,
            member_count=len(members),
            spread=float(f.max() - f.min()),
            members=sorted(members, key=lambda p: p.axis_value),
        ))
    return clusters


def decimation_factor(master_fs: float, fs: float) -> int:
    ratio = master_fs / fs
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        valid = ", ".join(f"{master_fs / k:.6g}" for k in range(1, 11))
        raise DecimationError(
            f"{fs:g} Hz is not reachable by decimating {master_fs:g} Hz; valid rates include {valid}, ..."
        )
    return factor


def divisor_grid(master_fs: float, max_factor: int) -> np.ndarray:
    """Ascending rates master_fs / k for k = max_factor .. 1."""
    return np.array([master_fs / k for k in range(max_factor, 0, -1)])


def _identify(snap, method, options):
    if method == "dmd":
        return dmd_decompose(build_pair(snap, options.augment), options)
    if method == "itd":
        return itd_extract(snap)
    raise InvalidInputError(f"unknown method {method!r}")


def pseudo_stability_sweep(
    master: SnapshotMatrix,
    fs_grid,
    method: str = "dmd",
    options: DmdOptions = DmdOptions(),
    *,
    remove_offset: bool = False,
    tolerance: float = CLUSTER_TOLERANCE,
    stable_fraction: float = STABLE_FRACTION,
    min_members: int = MIN_MEMBERS,
    min_frequency_hz: float = 0.0,
) -> StabilitySweep:
    """Identify poles at each sampling rate in ``fs_grid`` and cluster them.

    Each rate is realised by decimating ``master``.  A cluster is stable when
    it has at least ``min_members`` members and spans at least
    ``stable_fraction`` of the steps whose rate exceeds twice its frequency.
    """
    grid = np.asarray(fs_grid, dtype=float).ravel()
    if grid.size == 0:
        raise InvalidSweepError("sampling-frequency grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise InvalidSweepError("sampling-frequency grid must be strictly ascending")
    factors = [decimation_factor(master.sampling_frequency, fs) for fs in grid]

    per_step = []
    for fs, factor in zip(grid, factors):
        snap = decimate(master, factor)
        if remove_offset:
            snap = remove_mean(snap)
        result = _identify(snap, method, options)
        amps = getattr(result, "amplitudes", None)
        poles = []
        for i in oscillatory(result, min_frequency_hz):
            poles.append(Pole(
                axis_value=float(fs),
                frequency_hz=float(result.frequencies_hz[i]),
                damping_ratio=float(result.damping_ratios[i]),
                amplitude=float(amps[i]) if amps is not None else math.nan,
                source=method,
                mode=result.modes[:, i],
            ))
        per_step.append(poles)

    clusters = make_clusters(cluster_poles([p for step in per_step for p in step], tolerance))
    for c in clusters:
        eligible = int(np.count_nonzero(grid > 2.0 * c.mean_frequency))
        needed = max(min_members, math.ceil(stable_fraction * eligible - 1e-9))
        c.stable = eligible > 0 and c.member_count >= needed
        for p in c.members:
            p.stable = c.stable
    return StabilitySweep("sampling_frequency_hz", grid, per_step, clusters)


@dataclass(frozen=True)
class SelectedPole:
    frequency_hz: float
    damping_ratio: float
    mode: np.ndarray | None
    axis_value: float
    cluster_id: int

    def as_dict(self) -> dict:
        out = {"frequency_hz": self.frequency_hz, "damping_ratio": self.damping_ratio,
               "axis_value": self.axis_value, "cluster_id": self.cluster_id}
        if self.mode is not None:
            out["mode"] = [[float(z.real), float(z.imag)] for z in np.asarray(self.mode, complex)]
        return out


def select_stable_poles(sweep: StabilitySweep, policy: str = "nearest-mean") -> list:
    """One representative per stable cluster: the member nearest the cluster mean frequency.

    Ties go to the member at the lower axis value.
    """
    if policy != "nearest-mean":
        raise InvalidInputError(f"unknown selection policy {policy!r}")
    if not sweep.poles_per_step:
        raise InvalidSweepError("sweep is empty")
    out = []
    for c in sweep.stable_clusters:
        best = min(c.members, key=lambda p: (abs(p.frequency_hz - c.mean_frequency), p.axis_value))
        out.append(SelectedPole(best.frequency_hz, best.damping_ratio, best.mode,
                                best.axis_value, c.cluster_id))
    return sorted(out, key=lambda p: p.frequency_hz)


def eigenvalue_sensitivity(mu: complex, delta_mu: complex, fs: float) -> complex:
    """Shift of the continuous eigenvalue, fs log(1 + delta_mu / mu).

    For small relative perturbations |delta_s| ~ fs |delta_mu / mu|, i.e. the
    error in s grows in proportion to the sampling frequency.
    """
    if mu == 0:
        raise InvalidInputError("mu must be nonzero")
    ratio = complex(delta_mu) / complex(mu)
    if abs(ratio) >= 1.0:
        raise PerturbationTooLargeError(f"|delta_mu / mu| = {abs(ratio):.3g} >= 1")
    return fs * complex(np.log1p(ratio))


@dataclass(frozen=True)
class PodPairs:
    """Two POD modes per reference mode, labelled #1/#2 by singular value."""

    indices: np.ndarray
    mac_values: np.ndarray
    pod_modes: np.ndarray
    singular_values: np.ndarray


def pod_modes(snap: SnapshotMatrix, augment: bool = True):
    """Left singular vectors of the snapshot matrix restricted to the physical channels."""
    x = build_pair(snap, augment).x if augment else snap.data
    svd = svd_truncate(x)
    return svd.left_vectors[: snap.n_channels], svd.singular_values


def pod_pairs(reference_modes, snap: SnapshotMatrix, augment: bool = True) -> PodPairs:
    """Attach to each reference mode the two POD modes that resemble it most.

    Of the two, the one with the larger singular value is POD #1.
    """
    u, sv = pod_modes(snap, augment)
    macs = mac_matrix(reference_modes, u).values
    idx = np.sort(np.argsort(-macs, axis=1)[:, :2], axis=1)
    vals = np.take_along_axis(macs, idx, axis=1)
    return PodPairs(indices=idx, mac_values=vals, pod_modes=u, singular_values=sv)
