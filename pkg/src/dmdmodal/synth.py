"""Analytic benchmark generators.

Closed-form SDOF free decay, modal-superposition step response of
proportionally damped MDOF systems, analytic receptance FRFs, cantilever
beam shapes and multiplicative measurement noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotUnderdampedError, UnsupportedDampingError
from .lscf import FrfSet
from .snapshots import SnapshotMatrix


@dataclass(frozen=True)
class SdofParams:
    mass: float
    damping: float
    stiffness: float
    x0: float = 1.0
    v0: float = 0.0

    def __post_init__(self):
        if self.mass <= 0 or self.stiffness <= 0 or self.damping < 0:
            raise InvalidInputError("need mass > 0, stiffness > 0 and damping >= 0")

    @property
    def natural_frequency(self) -> float:
        """Undamped natural angular frequency [rad/s]."""
        return math.sqrt(self.stiffness / self.mass)

    @property
    def damping_ratio(self) -> float:
        return self.damping / (2.0 * math.sqrt(self.mass * self.stiffness))

    @property
    def damped_frequency(self) -> float:
        return self.natural_frequency * math.sqrt(1.0 - self.damping_ratio**2)


# 50 Hz, 1 % damping
SDOF_PAPER = SdofParams(mass=1.0, damping=6.2832, stiffness=9.8696e4, x0=1.0, v0=0.0)


def sdof_response(params: SdofParams, times) -> np.ndarray:
    """Free decay x(t) of an underdamped oscillator."""
    zeta = params.damping_ratio
    if zeta >= 1.0:
        raise NotUnderdampedError(f"damping ratio {zeta:.4g} >= 1")
    t = np.asarray(times, dtype=float)
    wn = params.natural_frequency
    wd = params.damped_frequency
    return np.exp(-zeta * wn * t) * (
        params.x0 * np.cos(wd * t) + (params.v0 + zeta * wn * params.x0) / wd * np.sin(wd * t)
    )


def sdof_paper_snapshots(n: int = 1024, duration: float = 1.0) -> SnapshotMatrix:
    """Displacement of the 50 Hz oscillator at ``n`` instants spanning [0, duration] inclusive."""
    dt = duration / (n - 1)
    t = dt * np.arange(n)
    return SnapshotMatrix(sdof_response(SDOF_PAPER, t)[None, :], dt=dt, channel_labels=("x1",))


@dataclass(frozen=True)
class MdofSystem:
    mass_matrix: np.ndarray
    damping_matrix: np.ndarray
    stiffness_matrix: np.ndarray
    force_pattern: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.mass_matrix, dtype=float))
        c = np.atleast_2d(np.asarray(self.damping_matrix, dtype=float))
        k = np.atleast_2d(np.asarray(self.stiffness_matrix, dtype=float))
        f = np.atleast_1d(np.asarray(self.force_pattern, dtype=float))
        n = m.shape[0]
        for name, mat in (("mass", m), ("damping", c), ("stiffness", k)):
            if mat.shape != (n, n):
                raise InvalidInputError(f"{name} matrix has shape {mat.shape}, expected {(n, n)}")
            if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise InvalidInputError(f"{name} matrix is not symmetric")
        if f.shape != (n,):
            raise InvalidInputError(f"force pattern has shape {f.shape}, expected {(n,)}")
        if np.linalg.eigvalsh(m).min() <= 0:
            raise InvalidInputError("mass matrix is not positive definite")
        if np.linalg.eigvalsh(k).min() < -1e-12 * np.abs(k).max():
            raise InvalidInputError("stiffness matrix is not positive semidefinite")
        for name, val in (("mass_matrix", m), ("damping_matrix", c),
                          ("stiffness_matrix", k), ("force_pattern", f)):
            object.__setattr__(self, name, val)

    @property
    def n_dof(self) -> int:
        return self.mass_matrix.shape[0]

    @property
    def proportional_factor(self) -> float | None:
        """alpha with C = alpha K, or None when damping is not stiffness-proportional."""
        k, c = self.stiffness_matrix, self.damping_matrix
        alpha = float(np.sum(c * k) / np.sum(k * k))
        if np.linalg.norm(c - alpha * k) <= 1e-10 * max(np.linalg.norm(c), np.finfo(float).tiny):
            return alpha
        return None

    def to_dict(self) -> dict:
        return {
            "mass_matrix": self.mass_matrix.tolist(),
            "damping_matrix": self.damping_matrix.tolist(),
            "stiffness_matrix": self.stiffness_matrix.tolist(),
            "force_pattern": self.force_pattern.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MdofSystem":
        return cls(data["mass_matrix"], data["damping_matrix"],
                   data["stiffness_matrix"], data["force_pattern"])


def chain_system(masses, k: float = 1.0, c: float = 0.01, force_dof: int = -1) -> MdofSystem:
    """Fixed-free spring chain with equal springs ``k`` and damping C = (c/k) K."""
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    n = masses.size
    kmat = np.zeros((n, n))
    for i in range(n):
        kmat[i, i] = 2 * k if i < n - 1 else k
        if i + 1 < n:
            kmat[i, i + 1] = kmat[i + 1, i] = -k
    f = np.zeros(n)
    f[force_dof] = 1.0
    return MdofSystem(np.diag(masses), (c / k) * kmat, kmat, f)


def chain6_paper() -> MdofSystem:
    """Six unit masses, k = 1, c = 0.01, unit step force on the last mass."""
    return chain_system(np.ones(6), k=1.0, c=0.01)


@dataclass(frozen=True)
class ModalGroundTruth:
    frequencies_hz: np.ndarray
    damping_ratios: np.ndarray
    mode_matrix: np.ndarray

    @property
    def angular_frequencies(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies_hz

    def to_dict(self) -> dict:
        return {
            "frequencies_hz": self.frequencies_hz.tolist(),
            "damping_ratios": self.damping_ratios.tolist(),
            "mode_matrix": self.mode_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModalGroundTruth":
        return cls(np.asarray(data["frequencies_hz"], dtype=float),
                   np.asarray(data["damping_ratios"], dtype=float),
                   np.asarray(data["mode_matrix"], dtype=float))


def modal_ground_truth(system: MdofSystem) -> ModalGroundTruth:
    """Undamped modes of K phi = w^2 M phi, mass-normalised, with zeta_i = alpha w_i / 2."""
    alpha = system.proportional_factor
    if alpha is None:
        raise UnsupportedDampingError("damping matrix is not proportional to stiffness (C = alpha K)")
    w2, phi = scipy.linalg.eigh(system.stiffness_matrix, system.mass_matrix)
    w2 = np.clip(w2, 0.0, None)
    w = np.sqrt(w2)
    # eigh returns M-orthonormal vectors; fix sign so the largest entry is positive
    idx = np.argmax(np.abs(phi), axis=0)
    phi = phi * np.sign(phi[idx, np.arange(phi.shape[1])])
    return ModalGroundTruth(frequencies_hz=w / (2 * np.pi), damping_ratios=alpha * w / 2, mode_matrix=phi)


def mdof_step_response(system: MdofSystem, truth: ModalGroundTruth, times) -> np.ndarray:
    """Response x(t) = Phi z(t) to a unit step applied through the force pattern at t = 0."""
    w = truth.angular_frequencies
    zeta = truth.damping_ratios
    if np.any(zeta >= 1.0):
        raise NotUnderdampedError(f"modes {np.flatnonzero(zeta >= 1) + 1} are not underdamped")
    if np.any(w <= 0):
        raise InvalidInputError("step response needs strictly positive natural frequencies")
    t = np.asarray(times, dtype=float)
    g = truth.mode_matrix.T @ system.force_pattern
    root = np.sqrt(1.0 - zeta**2)
    wd = w * root
    arg = np.outer(wd, t)
    decay = np.exp(-np.outer(zeta * w, t))
    z = (g / w**2)[:, None] * (1.0 - decay * (np.cos(arg) + (zeta / root)[:, None] * np.sin(arg)))
    return truth.mode_matrix @ z


def chain6_paper_snapshots(fs: float = 2.0, duration: float = 1000.0) -> SnapshotMatrix:
    """Step response of the six-mass chain sampled at ``fs`` over [0, duration] inclusive."""
    system = chain6_paper()
    truth = modal_ground_truth(system)
    n = int(round(duration * fs)) + 1
    t = np.arange(n) / fs
    x = mdof_step_response(system, truth, t)
    return SnapshotMatrix(x, dt=1.0 / fs, channel_labels=tuple(f"x{i + 1}" for i in range(6)))


def mdof_receptance(system: MdofSystem, frequencies_hz) -> np.ndarray:
    """Analytic receptance H(w) = (K - w^2 M + j w C)^-1 f, shape (n_dof, n_freq)."""
    omega = 2 * np.pi * np.asarray(frequencies_hz, dtype=float)
    m, c, k, f = system.mass_matrix, system.damping_matrix, system.stiffness_matrix, system.force_pattern
    dyn = k[None] - omega[:, None, None] ** 2 * m[None] + 1j * omega[:, None, None] * c[None]
    return np.linalg.solve(dyn, np.broadcast_to(f, (omega.size, f.size))[..., None])[..., 0].T


def chain6_paper_frf(f_max: float = 1.0, n_lines: int = 2001) -> FrfSet:
    """Analytic receptance of the six-mass chain on [0, f_max], T_s = 1 / (2 f_max)."""
    f = np.linspace(0.0, f_max, n_lines)
    h = mdof_receptance(chain6_paper(), f)
    return FrfSet(f, h, np.ones(h.shape), 1.0 / (2.0 * f_max),
                  tuple(f"x{i + 1}" for i in range(h.shape[0])))


def sdof_receptance(params: SdofParams, frequencies_hz) -> np.ndarray:
    omega = 2 * np.pi * np.asarray(frequencies_hz, dtype=float)
    return 1.0 / (params.stiffness - params.mass * omega**2 + 1j * params.damping * omega)


def multiplicative_noise(values, sigma: float, delta):
    """(1 + sigma delta) x for given draws ``delta``."""
    return (1.0 + sigma * np.asarray(delta, dtype=float)) * np.asarray(values, dtype=float)


def inject_noise(snap: SnapshotMatrix, sigma: float, seed: int = 0) -> SnapshotMatrix:
    """Multiplicative noise x~ = (1 + sigma delta) x.

    delta is i.i.d. uniform on [-sqrt(3), sqrt(3)]: zero mean, unit standard
    deviation.  Each call owns its generator, seeded from ``seed``.
    """
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return snap
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=snap.data.shape)
    return snap.replace(data=multiplicative_noise(snap.data, sigma, delta))


# first three roots of cos(bL) cosh(bL) = -1
CANTILEVER_BETA_L = (1.8751040687119611, 4.6940911329741746, 7.8547574382376126)


def cantilever_shapes(positions, length: float, n_modes: int = 3) -> np.ndarray:
    """Euler-Bernoulli clamped-free mode shapes at ``positions`` measured from the clamp.

    Columns are unit-norm over the sampled positions.
    """
    if not 1 <= n_modes <= len(CANTILEVER_BETA_L):
        raise InvalidInputError(f"n_modes must be in 1..{len(CANTILEVER_BETA_L)}")
    xi = np.asarray(positions, dtype=float) / length
    cols = []
    for bl in CANTILEVER_BETA_L[:n_modes]:
        r = (math.cosh(bl) + math.cos(bl)) / (math.sinh(bl) + math.sin(bl))
        b = bl * xi
        # cosh - sinh rewritten to avoid cancellation at large arguments
        shape = (np.cosh(b) - np.sinh(b) * r) - np.cos(b) + r * np.sin(b)
        cols.append(shape / np.linalg.norm(shape))
    return np.column_stack(cols)


@dataclass(frozen=True)
class BeamDataset:
    snapshots: SnapshotMatrix
    shapes: np.ndarray
    frequencies_hz: np.ndarray
    damping_ratios: np.ndarray


def synthetic_beam(
    n_points: int = 1570,
    fs: float = 450.0,
    duration: float = 2.0,
    frequencies_hz=(5.91, 34.90, 97.13),
    damping_ratios=(0.0460, 0.01429, 0.01181),
    amplitudes=(1.0e-2, 3.0e-3, 1.0e-3),
    length: float = 0.25,
    span=(0.01564, 0.2042),
    sigma: float = 1e-3,
    seed: int = 0,
) -> BeamDataset:
    """Impulse-like free decay of a cantilever sampled along the beam.

    Measurement points are equally spaced between ``span`` distances from the
    free end; each mode starts at rest displacement with unit-phase velocity.
    """
    d = np.linspace(span[0], span[1], n_points)
    positions = length - d
    n_modes = len(frequencies_hz)
    shapes = cantilever_shapes(positions, length, n_modes)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    q = np.empty((n_modes, n))
    for i, (fn, zeta, amp) in enumerate(zip(frequencies_hz, damping_ratios, amplitudes)):
        wn = 2 * np.pi * fn
        wd = wn * math.sqrt(1 - zeta**2)
        q[i] = amp * np.exp(-zeta * wn * t) * np.sin(wd * t)
    snap = SnapshotMatrix(shapes @ q, dt=1.0 / fs,
                          channel_labels=tuple(f"p{i + 1}" for i in range(n_points)))
    return BeamDataset(inject_noise(snap, sigma, seed), shapes,
                       np.asarray(frequencies_hz, float), np.asarray(damping_ratios, float))
