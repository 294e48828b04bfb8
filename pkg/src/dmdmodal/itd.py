"""Ibrahim time-domain identification.

Builds the two-shift block matrices from a free-response record and solves
the eigenproblem of X~ X^T (X X^T)^-1.  The normal-equations inverse is used
deliberately; it loses accuracy (squared conditioning) where the SVD route
of :mod:`dmdmodal.dmd` does not.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dmd import continuous_eigs
from .errors import InsufficientDataError, RankDeficiencyError
from .numkit import eig_general, fix_phase
from .snapshots import SnapshotMatrix


@dataclass(frozen=True)
class ItdResult:
    discrete_eigs: np.ndarray
    eigenvectors: np.ndarray
    continuous_eigs: np.ndarray
    frequencies_hz: np.ndarray
    damping_ratios: np.ndarray
    modes: np.ndarray
    dt: float
    condition_number: float = np.nan
    options: dict = field(default_factory=dict)
    method: str = "itd"

    @property
    def retained_rank(self) -> int:
        return self.discrete_eigs.size


def itd_matrices(snap: SnapshotMatrix):
    """Return (X, X~): the record and its one-step shift, each stacked over two shifts."""
    n = snap.n_samples
    if n < 4:
        raise InsufficientDataError(f"ITD needs at least 4 samples, got {n}")
    u = snap.data
    x = np.vstack([u[:, : n - 2], u[:, 1 : n - 1]])
    x_shift = np.vstack([u[:, 1 : n - 1], u[:, 2:]])
    return x, x_shift


def itd_extract(snap: SnapshotMatrix, max_condition: float | None = None) -> ItdResult:
    """Identify eigenvalues and mode shapes with the Ibrahim time-domain method.

    :param snap: free-response record (remove any static offset beforehand)
    :param max_condition: largest acceptable condition number of X X^T;
        defaults to 1 / (p * eps) for p = 2m
    :raises RankDeficiencyError: when X X^T is numerically singular
    """
    x, x_shift = itd_matrices(snap)
    p = x.shape[0]
    gram = x @ x.T
    cond = float(np.linalg.cond(gram))
    limit = max_condition if max_condition is not None else 1.0 / (p * np.finfo(float).eps)
    if not np.isfinite(cond) or cond > limit:
        raise RankDeficiencyError(
            f"X X^T is numerically singular (condition {cond:.3g}); "
            "use DMD with singular-value truncation instead"
        )
    # A = X~ X^T (X X^T)^-1, computed as a solve against the symmetric Gram matrix
    a = np.linalg.solve(gram, x @ x_shift.T).T
    eig = eig_general(a)
    mu = eig.values
    s, f, zeta = continuous_eigs(mu, snap.dt)
    modes = fix_phase(eig.vectors[: snap.n_channels])
    order = np.lexsort((-s.imag, np.abs(s)))
    return ItdResult(
        discrete_eigs=mu[order],
        eigenvectors=eig.vectors[:, order],
        continuous_eigs=s[order],
        frequencies_hz=f[order],
        damping_ratios=zeta[order],
        modes=modes[:, order],
        dt=snap.dt,
        condition_number=cond,
        options={"condition_limit": limit},
    )
