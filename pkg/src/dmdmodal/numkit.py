"""Dense linear-algebra kernel shared by the identification methods.

Truncated SVD, general eigendecomposition with deterministic ordering and
phase, and pseudo-inverse assembly from a truncated SVD.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NoSignalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TruncationPolicy:
    """How many singular values to keep.

    ``kind`` is ``"full"`` (numerical rank), ``"rank"`` (fixed count, ``value``
    is the rank) or ``"rel"`` (keep sigma_i / sigma_1 > ``value``).
    """

    kind: str = "full"
    value: float | None = None

    def __post_init__(self):
        if self.kind == "full":
            if self.value is not None:
                raise InvalidInputError("full-rank policy takes no value")
        elif self.kind == "rank":
            if self.value is None or int(self.value) != self.value or self.value < 1:
                raise InvalidInputError(f"fixed rank must be an integer >= 1, got {self.value}")
        elif self.kind == "rel":
            if self.value is None or not 0.0 < self.value < 1.0:
                raise InvalidInputError(f"relative threshold must lie in (0, 1), got {self.value}")
        else:
            raise InvalidInputError(f"unknown truncation policy {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "TruncationPolicy":
        """Parse ``full``, ``rank:K`` or ``rel:TAU``."""
        text = text.strip()
        if text == "full":
            return cls("full")
        kind, sep, raw = text.partition(":")
        if not sep:
            raise InvalidInputError(f"cannot parse truncation {text!r}")
        try:
            if kind == "rank":
                return cls("rank", int(raw))
            if kind == "rel":
                return cls("rel", float(raw))
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse truncation {text!r}") from exc
        raise InvalidInputError(f"cannot parse truncation {text!r}")

    def __str__(self):
        if self.kind == "full":
            return "full"
        if self.kind == "rank":
            return f"rank:{int(self.value)}"
        return f"rel:{self.value:g}"


FULL_RANK = TruncationPolicy("full")


@dataclass(frozen=True)
class TruncatedSvd:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    discarded_energy: float
    clamped: bool = False

    @property
    def rank(self) -> int:
        return self.singular_values.size


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


def numerical_rank_cutoff(shape, sigma_max: float) -> float:
    return np.finfo(float).eps * max(shape) * sigma_max


def svd_truncate(matrix, policy: TruncationPolicy = FULL_RANK) -> TruncatedSvd:
    """Thin SVD of ``matrix`` truncated according to ``policy``.

    A relative threshold never keeps singular values below the numerical-rank
    cutoff, so the retained values are always strictly positive.  A fixed rank
    larger than the numerical rank is clamped and ``clamped`` is set.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")

    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise NoSignalError("matrix is identically zero")

    cutoff = numerical_rank_cutoff(a.shape, s[0])
    numerical_rank = int(np.count_nonzero(s > cutoff))
    clamped = False
    if policy.kind == "full":
        r = numerical_rank
    elif policy.kind == "rank":
        r = int(policy.value)
        if r > numerical_rank:
            logger.warning("fixed rank %d exceeds numerical rank %d; clamping", r, numerical_rank)
            r, clamped = numerical_rank, True
    else:
        r = int(np.count_nonzero(s / s[0] > policy.value))
        r = min(r, numerical_rank)

    energy = s**2
    discarded = float(energy[r:].sum() / energy.sum())
    return TruncatedSvd(
        left_vectors=u[:, :r],
        singular_values=s[:r],
        right_vectors=vh[:r].conj().T,
        discarded_energy=discarded,
        clamped=clamped,
    )


def pseudo_inverse(svd: TruncatedSvd) -> np.ndarray:
    """Moore-Penrose pseudo-inverse V diag(1/sigma) U* from a truncated SVD."""
    return (svd.right_vectors / svd.singular_values) @ svd.left_vectors.conj().T


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Scale each column to unit norm with its largest-magnitude entry real positive."""
    v = np.array(vectors, dtype=complex)
    norms = np.linalg.norm(v, axis=0)
    nz = norms > 0
    v[:, nz] /= norms[nz]
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    mag = np.abs(pivots)
    rot = np.ones_like(pivots)
    rot[mag > 0] = pivots[mag > 0].conj() / mag[mag > 0]
    v *= rot
    v[idx, np.arange(v.shape[1])] = np.abs(v[idx, np.arange(v.shape[1])])
    return v


def pair_conjugates(values, vectors, tol: float = 1e-8):
    """Make eigenpairs of a real operator exactly conjugate-closed.

    For each eigenvalue with positive imaginary part the closest eigenvalue
    with negative imaginary part is overwritten by its exact conjugate, and
    likewise its eigenvector.  Imaginary parts within ``tol`` (relative to
    the spectral radius) are zeroed.
    """
    lam = np.array(values, dtype=complex)
    vec = np.array(vectors, dtype=complex)
    scale = max(np.max(np.abs(lam)), 1.0) if lam.size else 1.0
    real_like = np.abs(lam.imag) <= tol * scale
    lam[real_like] = lam[real_like].real
    # a real eigenvalue of a real operator has a real eigenvector; inside a
    # repeated eigenspace the solver may return a complex combination
    vec[:, real_like] = fix_phase(vec[:, real_like].real)

    upper = np.flatnonzero(lam.imag > 0)
    lower = list(np.flatnonzero(lam.imag < 0))
    for i in upper:
        if not lower:
            break
        j = min(lower, key=lambda q: abs(lam[q] - lam[i].conjugate()))
        lower.remove(j)
        lam[j] = lam[i].conjugate()
        vec[:, j] = vec[:, i].conj()
    return lam, vec


def spectral_order(values) -> np.ndarray:
    """Indices sorting by descending modulus, ties by ascending argument."""
    lam = np.asarray(values)
    return np.lexsort((np.angle(lam), -np.abs(lam)))


def eig_general(matrix) -> EigenPairs:
    """Eigendecomposition of a general square matrix.

    Eigenvectors are unit norm with the largest component real positive.
    Real matrices get exactly conjugate-paired output.  Values are ordered
    by descending modulus, ties broken by ascending argument.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")

    is_real = not np.iscomplexobj(a) or not np.any(a.imag)
    if is_real:
        a = np.real(a)
    lam, vec = np.linalg.eig(a)
    vec = fix_phase(vec)
    lam = lam.astype(complex)
    if is_real:
        lam, vec = pair_conjugates(lam, vec)
    order = spectral_order(lam)
    return EigenPairs(values=lam[order], vectors=vec[:, order])
