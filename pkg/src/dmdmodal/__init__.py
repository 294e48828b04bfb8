"""Dynamic mode decomposition for experimental modal analysis.

Time-domain identification (exact DMD with standing-wave augmentation, ITD),
a frequency-domain LSCF baseline, pseudo-stability sweeps over the sampling
frequency, MAC comparison and analytic benchmark generators.
"""
__version__ = "0.1.0"

from .dmd import DmdOptions, DmdResult, dmd_decompose, discrete_to_continuous, reconstruct
from .errors import ModalError
from .itd import ItdResult, itd_extract
from .lscf import FrfSet, estimate_frf, lscf_fit, stabilization_diagram
from .modal import (
    eigenvalue_sensitivity,
    mac,
    mac_matrix,
    pseudo_stability_sweep,
    select_stable_poles,
)
from .numkit import TruncationPolicy, svd_truncate
from .snapshots import SnapshotMatrix, build_pair, ingest_csv

__all__ = [
    "DmdOptions", "DmdResult", "dmd_decompose", "discrete_to_continuous", "reconstruct",
    "ModalError", "ItdResult", "itd_extract", "FrfSet", "estimate_frf", "lscf_fit",
    "stabilization_diagram", "eigenvalue_sensitivity", "mac", "mac_matrix",
    "pseudo_stability_sweep", "select_stable_poles", "TruncationPolicy", "svd_truncate",
    "SnapshotMatrix", "build_pair", "ingest_csv",
]
