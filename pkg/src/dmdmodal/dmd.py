"""Exact dynamic mode decomposition and eigenvalue conversion."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, NoSignalError, OverTruncationError, SingularEigenvalueError
from .numkit import TruncationPolicy, eig_general, fix_phase, pair_conjugates, svd_truncate
from .snapshots import SnapshotPair

# |log mu| below this is rounding noise around mu = 1; treated as s = 0
UNIT_EIGENVALUE_TOLERANCE = 8 * np.finfo(float).eps

# default for noiseless synthetic data; measured data needs a user-chosen threshold
DEFAULT_TRUNCATION = TruncationPolicy("rel", 1e-10)


@dataclass(frozen=True)
class DmdOptions:
    truncation: TruncationPolicy = DEFAULT_TRUNCATION
    augment: bool = True
    sort: str = "frequency"

    def __post_init__(self):
        if self.sort not in ("frequency", "amplitude"):
            raise InvalidInputError(f"sort must be 'frequency' or 'amplitude', got {self.sort!r}")

    def as_dict(self) -> dict:
        return {"truncation": str(self.truncation), "augment": self.augment, "sort": self.sort}


class ContinuousPole(NamedTuple):
    s: complex
    frequency_hz: float
    damping_ratio: float
    nyquist_ambiguous: bool


def discrete_to_continuous(mu: complex, dt: float) -> ContinuousPole:
    """Map a discrete eigenvalue to s = log(mu)/dt, frequency and damping.

    The principal branch is used, so frequencies are limited to the Nyquist
    rate of ``dt``.  The damping ratio is NaN when s = 0.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    mu = complex(mu)
    if mu == 0:
        raise SingularEigenvalueError("eigenvalue mu = 0 has no continuous counterpart")
    log_mu = cmath.log(mu)
    if abs(log_mu) <= UNIT_EIGENVALUE_TOLERANCE:
        log_mu = 0j
    s = log_mu / dt
    mag = abs(s)
    zeta = -s.real / mag if mag > 0 else math.nan
    return ContinuousPole(s, mag / (2 * math.pi), zeta, mu.imag == 0 and mu.real < 0)


def continuous_eigs(mu, dt: float):
    """Vectorised :func:`discrete_to_continuous`; returns (s, f, zeta)."""
    mu = np.asarray(mu, dtype=complex)
    if np.any(mu == 0):
        raise SingularEigenvalueError("eigenvalue mu = 0 has no continuous counterpart")
    log_mu = np.log(mu)
    log_mu[np.abs(log_mu) <= UNIT_EIGENVALUE_TOLERANCE] = 0
    s = log_mu / dt
    mag = np.abs(s)
    with np.errstate(invalid="ignore", divide="ignore"):
        zeta = np.where(mag > 0, -s.real / mag, np.nan)
    return s, mag / (2 * np.pi), zeta


@dataclass(frozen=True)
class DmdResult:
    """Eigenvalues, modal parameters and modes from one decomposition.

    ``modes`` holds the physical block (first ``n_channels`` rows of the
    state-space modes) as unit-norm, phase-fixed columns; ``initial_amplitudes``
    are expressed in that normalisation.  ``state_modes`` keeps the full
    (possibly augmented) modes.
    """

    discrete_eigs: np.ndarray
    continuous_eigs: np.ndarray
    frequencies_hz: np.ndarray
    damping_ratios: np.ndarray
    modes: np.ndarray
    initial_amplitudes: np.ndarray
    retained_rank: int
    dt: float
    state_modes: np.ndarray | None = None
    singular_values: np.ndarray | None = None
    discarded_energy: float = 0.0
    options: dict = field(default_factory=dict)
    method: str = "dmd"

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.initial_amplitudes)

    @property
    def n_channels(self) -> int:
        return self.modes.shape[0]


def _physical_modes(state_modes, n_channels, amplitudes):
    block = state_modes[:n_channels]
    phys = fix_phase(block)
    # phys = block * c column-wise; amplitudes transform by 1/c
    scale = np.ones(block.shape[1], dtype=complex)
    for i in range(block.shape[1]):
        k = np.argmax(np.abs(block[:, i]))
        if block[k, i] != 0:
            scale[i] = phys[k, i] / block[k, i]
    return phys, amplitudes / scale


def _ordering(s, amplitudes, how):
    if how == "amplitude":
        return np.lexsort((-s.imag, np.abs(s), -np.abs(amplitudes)))
    return np.lexsort((-s.imag, np.abs(s)))


def dmd_decompose(pair: SnapshotPair, options: DmdOptions = DmdOptions()) -> DmdResult:
    """Exact DMD of a snapshot pair.

    Projects the best-fit propagator onto the retained POD basis,
    A~ = U* Y V Sigma^-1, eigendecomposes it and lifts the eigenvectors
    with phi = U w.  Amplitudes are the least-squares fit of the first
    snapshot onto the modes.
    """
    if pair.x.shape[1] < 2:
        raise InvalidInputError("need at least 2 snapshot columns")
    if not np.any(pair.x):
        raise NoSignalError("snapshot matrix is identically zero")
    svd = svd_truncate(pair.x, options.truncation)
    if svd.rank == 0:
        raise OverTruncationError(f"truncation {options.truncation} removed every singular value")

    u, sig, v = svd.left_vectors, svd.singular_values, svd.right_vectors
    a_tilde = u.conj().T @ pair.y @ v / sig
    eig = eig_general(a_tilde)
    mu = eig.values

    state = fix_phase(u @ eig.vectors)
    real_data = not np.iscomplexobj(pair.x)
    if real_data:
        mu, state = pair_conjugates(mu, state)
    q0 = np.linalg.lstsq(state, pair.x[:, 0], rcond=None)[0]
    modes, amps = _physical_modes(state, pair.n_channels, q0)

    s, f, zeta = continuous_eigs(mu, pair.dt)
    order = _ordering(s, amps, options.sort)
    return DmdResult(
        discrete_eigs=mu[order],
        continuous_eigs=s[order],
        frequencies_hz=f[order],
        damping_ratios=zeta[order],
        modes=modes[:, order],
        initial_amplitudes=amps[order],
        retained_rank=svd.rank,
        dt=pair.dt,
        state_modes=state[:, order],
        singular_values=sig,
        discarded_energy=svd.discarded_energy,
        options=options.as_dict(),
    )


def reconstruct(result: DmdResult, k: int, return_residue: bool = False):
    """Snapshot ``k`` rebuilt as sum_i mu_i**k phi_i q0_i.

    Returns the real part; with ``return_residue`` also the norm of the
    discarded imaginary part.
    """
    if k < 0:
        raise InvalidInputError(f"sample index must be >= 0, got {k}")
    x = result.modes @ (result.discrete_eigs**k * result.initial_amplitudes)
    if return_residue:
        return x.real, float(np.linalg.norm(x.imag))
    return x.real


def _pairs(values):
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, dtype=complex)]


def _finite_or_none(values):
    return [float(v) if np.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def result_to_dict(result) -> dict:
    """JSON-ready dictionary for a DMD or ITD result."""
    modes = np.asarray(result.modes)
    out = {
        "method": result.method,
        "dt": result.dt,
        "retained_rank": int(getattr(result, "retained_rank", modes.shape[1])),
        "discrete_eigs": _pairs(result.discrete_eigs),
        "continuous_eigs": _pairs(result.continuous_eigs),
        "frequencies_hz": _finite_or_none(result.frequencies_hz),
        "damping_ratios": _finite_or_none(result.damping_ratios),
        "modes": [_pairs(modes[:, i]) for i in range(modes.shape[1])],
        "options": dict(getattr(result, "options", {})),
    }
    amps = getattr(result, "initial_amplitudes", None)
    if amps is not None:
        out["initial_amplitudes"] = _pairs(amps)
    return out


@dataclass(frozen=True)
class LoadedResult:
    """Identification result read back from JSON (see :func:`result_to_dict`)."""

    method: str
    dt: float
    discrete_eigs: np.ndarray
    continuous_eigs: np.ndarray
    frequencies_hz: np.ndarray
    damping_ratios: np.ndarray
    modes: np.ndarray
    initial_amplitudes: np.ndarray | None
    retained_rank: int
    options: dict


def result_from_dict(data: dict) -> LoadedResult:
    def cplx(rows):
        return np.array([complex(re, im) for re, im in rows], dtype=complex)

    modes = np.array([cplx(col) for col in data["modes"]], dtype=complex).T
    amps = data.get("initial_amplitudes")
    return LoadedResult(
        method=data["method"],
        dt=float(data["dt"]),
        discrete_eigs=cplx(data["discrete_eigs"]),
        continuous_eigs=cplx(data["continuous_eigs"]),
        frequencies_hz=np.array([np.nan if v is None else v for v in data["frequencies_hz"]]),
        damping_ratios=np.array([np.nan if v is None else v for v in data["damping_ratios"]]),
        modes=modes,
        initial_amplitudes=None if amps is None else cplx(amps),
        retained_rank=int(data["retained_rank"]),
        options=dict(data.get("options", {})),
    )
