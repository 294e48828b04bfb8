"""Command-line workflows: generate, identify, sweep, frf, lscf, compare.

Every artifact embeds the resolved run configuration (JSON outputs carry a
``config`` block, CSV outputs a ``# config:`` comment line) and is written
atomically.  Errors map to distinct exit codes, see :mod:`dmdmodal.errors`.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dmd import DEFAULT_TRUNCATION, DmdOptions, dmd_decompose, result_from_dict, result_to_dict
from .errors import InvalidInputError, ModalError, UsageError
from .itd import itd_extract
from .lscf import FrfSet, SegmentSpec, estimate_frf, lscf_fit, read_frf_csv, stabilization_diagram
from .modal import (
    divisor_grid,
    mac_matrix,
    match_modes,
    oscillatory,
    percentage_error,
    pseudo_stability_sweep,
    select_stable_poles,
)
from .numkit import TruncationPolicy
from .snapshots import CsvSchema, SnapshotMatrix, build_pair, ingest_csv, remove_mean, window, write_csv
from . import synth

log = logging.getLogger("dmdmodal")

PRESETS = ("sdof-paper", "chain6-paper")
EXIT_NO_INPUT = 66
FRF_LINES = 2001


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output_dir: str = "."
    preset: str | None = None
    method: str = "dmd"
    augment: bool = True
    truncation: str = str(DEFAULT_TRUNCATION)
    mean_removal: bool = True
    noise: float = 0.0
    seed: int = 0
    fs_grid: list | None = None
    max_order: int = 60
    threshold: float = 1.0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["version"] = __version__
        return out

    def dmd_options(self) -> DmdOptions:
        return DmdOptions(TruncationPolicy.parse(self.truncation), augment=self.augment,
                          sort=self.extra.get("sort", "frequency"))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- output helpers -------------------------------------------------------

def _atomic(path: Path, write) -> Path:
    """Call ``write(tmp_path)`` and move the result onto ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.info("wrote %s", path)
    return path


def _write_json(path: Path, payload: dict, config: RunConfig) -> Path:
    body = {"config": config.as_dict(), **payload}

    def write(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(body, fh, indent=2, sort_keys=False, allow_nan=False)
            fh.write("\n")

    return _atomic(path, write)


def _write_text(path: Path, text: str) -> Path:
    def write(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)

    return _atomic(path, write)


def _preamble(config: RunConfig):
    return [f"config: {json.dumps(config.as_dict(), sort_keys=True)}"]


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


# --- argument parsing ------------------------------------------------------

def _truncation(text: str) -> str:
    try:
        return str(TruncationPolicy.parse(text))
    except ModalError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {text!r}")
    return text == "on"


def _parse_grid(text: str, master_fs: float) -> list:
    """Comma list of rates, or ``div:K`` for master_fs / k with k = K..1."""
    text = text.strip()
    if text.startswith("div:"):
        try:
            k = int(text[4:])
        except ValueError:
            raise UsageError(f"bad grid spec {text!r}; expected div:K") from None
        if k < 1:
            raise UsageError("empty sampling-frequency grid")
        return [float(v) for v in divisor_grid(master_fs, k)]
    parts = [p for p in (s.strip() for s in text.split(",")) if p]
    if not parts:
        raise UsageError("empty sampling-frequency grid")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad sampling-frequency grid {text!r}") from None


def _add_common(p):
    p.add_argument("--output-dir", default=".", help="directory for output files")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")


def _add_input(p, required=True):
    p.add_argument("--input", required=required, help="snapshot CSV (time column plus channels)")
    p.add_argument("--time-column", default="t", help="name of the time column")
    p.add_argument("--dt", type=float, help="sample spacing when the CSV has no time column")
    p.add_argument("--window-start", type=int, default=0, help="first sample to use")
    p.add_argument("--window-length", type=int, help="number of samples to use")


def _add_method(p):
    p.add_argument("--method", choices=("dmd", "itd"), default="dmd")
    p.add_argument("--augment", action=argparse.BooleanOptionalAction, default=True,
                   help="stack consecutive snapshots (default on)")
    p.add_argument("--truncation", type=_truncation, default=str(DEFAULT_TRUNCATION),
                   help="full, rank:K or rel:TAU")
    p.add_argument("--mean-removal", type=_on_off, default=True, metavar="{on,off}",
                   help="subtract each channel's mean first (default on)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmdmodal", description="DMD-based experimental modal analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write benchmark snapshots and ground truth")
    _add_common(g)
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of {', '.join(PRESETS)}")
    src.add_argument("--system", help="JSON with mass/damping/stiffness matrices and force pattern")
    g.add_argument("--fs", type=float, default=2.0, help="sampling rate for --system")
    g.add_argument("--duration", type=float, default=1000.0, help="record length for --system")
    g.add_argument("--noise", type=float, default=0.0, help="multiplicative noise level sigma")

    i = sub.add_parser("identify", help="run DMD or ITD on a snapshot CSV")
    _add_common(i)
    _add_input(i)
    _add_method(i)
    i.add_argument("--sort", choices=("frequency", "amplitude"), default="frequency")

    s = sub.add_parser("sweep", help="pseudo-stability (DMD/ITD) or stabilization (LSCF) sweep")
    _add_common(s)
    _add_input(s, required=False)
    _add_method(s)
    s.add_argument("--frf", help="FRF CSV; runs an LSCF stabilization sweep instead")
    s.add_argument("--fs-grid", help="comma list of rates or div:K")
    s.add_argument("--min-frequency", type=float, default=0.0, help="ignore poles below this (Hz)")
    s.add_argument("--max-order", type=int, default=60)
    s.add_argument("--threshold", type=float, default=1.0, help="cluster tolerance in percent")

    f = sub.add_parser("frf", help="H1 FRF estimate from force and response records")
    _add_common(f)
    _add_input(f)
    f.add_argument("--force-column", required=True, help="column of --input holding the force")
    f.add_argument("--segment-length", type=int, help="Welch segment length in samples")
    f.add_argument("--overlap", type=float, default=0.5)
    f.add_argument("--window", default="hann")

    lf = sub.add_parser("lscf", help="fit LSCF poles at one order")
    _add_common(lf)
    lf.add_argument("--frf", required=True, help="FRF CSV")
    lf.add_argument("--order", type=int, default=60)

    c = sub.add_parser("compare", help="MAC matrix and error table between results")
    _add_common(c)
    c.add_argument("--a", required=True, help="result JSON to assess")
    ref = c.add_mutually_exclusive_group(required=True)
    ref.add_argument("--b", help="second result JSON")
    ref.add_argument("--truth", help="ground_truth.json from generate")
    return parser


def _config(ns) -> RunConfig:
    known = {"command", "input", "output_dir", "preset", "method", "augment", "truncation",
             "mean_removal", "noise", "seed", "max_order", "threshold"}
    values = {k: v for k, v in vars(ns).items() if k in known and v is not None}
    extra = {k: v for k, v in vars(ns).items()
             if k not in known and k not in ("verbose", "fs_grid") and v is not None}
    if ns.command == "generate" and ns.preset is not None:
        extra.pop("fs", None)
        extra.pop("duration", None)
    return RunConfig(**values, extra=extra)


def _load_snapshots(config: RunConfig):
    e = config.extra
    if e.get("dt") is not None:
        schema = CsvSchema(dt=e["dt"])
    else:
        schema = CsvSchema(time_column=e.get("time_column", "t"))
    snap = ingest_csv(config.input, schema)
    start, length = e.get("window_start", 0), e.get("window_length")
    if start or length is not None:
        snap = window(snap, start, length if length is not None else snap.n_samples - start)
    return snap


# --- commands -------------------------------------------------------------

def cmd_generate(config: RunConfig) -> list:
    out = Path(config.output_dir)
    if config.preset is not None and config.preset not in PRESETS:
        raise UsageError(f"unknown preset {config.preset!r}; choose from {', '.join(PRESETS)}")
    if config.noise < 0:
        raise UsageError("--noise must be non-negative")

    if config.preset == "sdof-paper":
        snap = synth.sdof_paper_snapshots()
        p = synth.SDOF_PAPER
        truth = {"frequencies_hz": [p.natural_frequency / (2 * math.pi)],
                 "damping_ratios": [p.damping_ratio], "mode_matrix": [[1.0]]}
        f = np.linspace(0.0, 0.5 / snap.dt, FRF_LINES)
        frf_h = synth.sdof_receptance(p, f)[None, :]
    else:
        if config.preset == "chain6-paper":
            system = synth.chain6_paper()
            fs, duration = 2.0, 1000.0
        else:
            with open(config.extra["system"], encoding="utf-8") as fh:
                system = synth.MdofSystem.from_dict(json.load(fh))
            fs, duration = config.extra.get("fs", 2.0), config.extra.get("duration", 1000.0)
        gt = synth.modal_ground_truth(system)
        n = int(round(duration * fs)) + 1
        t = np.arange(n) / fs
        snap = SnapshotMatrix(synth.mdof_step_response(system, gt, t), 1.0 / fs,
                                    tuple(f"x{k + 1}" for k in range(system.n_dof)))
        truth = gt.to_dict()
        truth["system"] = system.to_dict()
        f = np.linspace(0.0, fs / 2, FRF_LINES)
        frf_h = synth.mdof_receptance(system, f)
    snap = synth.inject_noise(snap, config.noise, config.seed)

    frf = FrfSet(f, frf_h, np.ones(frf_h.shape), 1.0 / (2 * f[-1]), snap.channel_labels)
    pre = _preamble(config)
    return [
        _atomic(out / "snapshots.csv", lambda tmp: write_csv(snap, tmp, preamble=pre)),
        _write_json(out / "ground_truth.json", truth, config),
        _atomic(out / "frf.csv", lambda tmp: frf.write_csv(tmp, preamble=pre)),
    ]


def _identify(snap, config: RunConfig):
    if config.mean_removal:
        snap = remove_mean(snap)
    if config.method == "itd":
        return itd_extract(snap)
    return dmd_decompose(build_pair(snap, config.augment), config.dmd_options())


def summary_table(result) -> str:
    amps = getattr(result, "initial_amplitudes", None)
    lines = [f"{'#':>3} {'f [Hz]':>14} {'zeta':>12} {'|mu|':>12} {'amplitude':>12}"]
    for k in range(len(result.discrete_eigs)):
        amp = f"{abs(amps[k]):12.5g}" if amps is not None else f"{'-':>12}"
        lines.append(f"{k + 1:>3} {result.frequencies_hz[k]:14.8g} {result.damping_ratios[k]:12.5g} "
                     f"{abs(result.discrete_eigs[k]):12.8f} {amp}")
    return "\n".join(lines) + "\n"


def cmd_identify(config: RunConfig) -> list:
    if config.input is None:
        raise UsageError("identify needs --input")
    out = Path(config.output_dir)
    result = _identify(_load_snapshots(config), config)
    payload = result_to_dict(result)
    table = summary_table(result)
    print(table, end="")
    return [
        _write_json(out / "result.json", {"result": payload}, config),
        _write_text(out / "summary.txt", table),
    ]


def cmd_sweep(config: RunConfig, grid_text: str | None) -> list:
    out = Path(config.output_dir)
    frf_path = config.extra.get("frf")
    if (frf_path is None) == (config.input is None):
        raise UsageError("sweep needs exactly one of --input (DMD/ITD) or --frf (LSCF)")
    if not config.threshold > 0:
        raise UsageError("--threshold must be positive")
    tol = config.threshold / 100.0

    if frf_path is not None:
        if config.max_order < 2:
            raise UsageError("--max-order must be at least 2")
        sweep = stabilization_diagram(read_frf_csv(frf_path), config.max_order, threshold=tol)
        header = "order"
    else:
        if grid_text is None:
            raise UsageError("a DMD/ITD sweep needs --fs-grid")
        master = _load_snapshots(config)
        config.fs_grid = _parse_grid(grid_text, master.sampling_frequency)
        sweep = pseudo_stability_sweep(
            master, config.fs_grid, method=config.method, options=config.dmd_options(),
            remove_offset=config.mean_removal, tolerance=tol,
            min_frequency_hz=config.extra.get("min_frequency", 0.0),
        )
        header = "fs_hz"

    selected = select_stable_poles(sweep)
    payload = {
        "axis": sweep.axis_name,
        "poles": [p.as_dict() for p in selected],
        "clusters": [{"cluster_id": c.cluster_id, "mean_frequency_hz": c.mean_frequency,
                      "mean_damping_ratio": _finite(c.mean_damping), "member_count": c.member_count,
                      "spread_hz": c.spread, "stable": c.stable} for c in sweep.clusters],
    }
    for c in sweep.stable_clusters:
        log.info("stable cluster %d: %.6g Hz (%d members)", c.cluster_id, c.mean_frequency,
                     c.member_count)
    pre = _preamble(config)
    return [
        _atomic(out / "sweep.csv", lambda tmp: sweep.write_csv(tmp, header, preamble=pre)),
        _write_json(out / "selected_poles.json", payload, config),
    ]


def cmd_frf(config: RunConfig) -> list:
    out = Path(config.output_dir)
    snap = _load_snapshots(config)
    name = config.extra["force_column"]
    if name not in snap.channel_labels:
        raise InvalidInputError(f"{config.input}: no column {name!r}")
    k = snap.channel_labels.index(name)
    keep = [j for j in range(snap.n_channels) if j != k]
    force = snap.replace(data=snap.data[k : k + 1], channel_labels=(name,))
    response = snap.replace(data=snap.data[keep], channel_labels=tuple(snap.channel_labels[j] for j in keep))
    spec = SegmentSpec(config.extra.get("segment_length"), config.extra.get("overlap", 0.5),
                       config.extra.get("window", "hann"))
    frf = estimate_frf(force, response, spec)
    return [_atomic(out / "frf.csv", lambda tmp: frf.write_csv(tmp, preamble=_preamble(config)))]


def cmd_lscf(config: RunConfig) -> list:
    out = Path(config.output_dir)
    order = config.extra.get("order", 60)
    result = lscf_fit(read_frf_csv(config.extra["frf"]), order)
    payload = {
        "order": result.order,
        "poles": [{"s": [p.s.real, p.s.imag], "frequency_hz": p.frequency_hz,
                   "damping_ratio": p.damping_ratio, "stable": p.stable} for p in result.poles],
    }
    return [_write_json(out / "lscf_poles.json", payload, config)]


def _read_result(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "result" not in data:
        raise InvalidInputError(f"{path}: not a result file written by identify")
    return result_from_dict(data["result"])


def cmd_compare(config: RunConfig) -> list:
    out = Path(config.output_dir)
    a = _read_result(config.extra["a"])
    idx_a = oscillatory(a)
    if config.extra.get("truth"):
        with open(config.extra["truth"], encoding="utf-8") as fh:
            truth = synth.ModalGroundTruth.from_dict(json.load(fh))
        ref_f, ref_z, ref_modes = truth.frequencies_hz, truth.damping_ratios, truth.mode_matrix
        ref_name = "truth"
    else:
        b = _read_result(config.extra["b"])
        idx_b = oscillatory(b)
        ref_f, ref_z, ref_modes = b.frequencies_hz[idx_b], b.damping_ratios[idx_b], b.modes[:, idx_b]
        ref_name = "b"
    if idx_a.size == 0:
        raise InvalidInputError(f"{config.extra['a']}: no oscillatory poles")
    matched = idx_a[match_modes(a.frequencies_hz[idx_a], ref_f)]
    labels = [f"mode{k + 1}" for k in range(len(ref_f))]
    mm = mac_matrix(a.modes[:, matched], ref_modes, [f"a_{s}" for s in labels],
                    [f"{ref_name}_{s}" for s in labels])

    f_err = percentage_error(a.frequencies_hz[matched], ref_f)
    z_err = percentage_error(a.damping_ratios[matched], ref_z)
    lines = ["mode,f_a_hz,f_ref_hz,f_error_pct,zeta_a,zeta_ref,zeta_error_pct,mac_pct"]
    for k in range(len(ref_f)):
        lines.append(",".join([
            str(k + 1), f"{a.frequencies_hz[matched[k]]:.12g}", f"{ref_f[k]:.12g}", f"{f_err[k]:.6g}",
            f"{a.damping_ratios[matched[k]]:.12g}", f"{ref_z[k]:.12g}", f"{z_err[k]:.6g}",
            f"{100 * mm.values[k, k]:.6f}",
        ]))
    table = "".join(f"# {line}\n" for line in _preamble(config)) + "\n".join(lines) + "\n"
    print("\n".join(lines))
    return [
        _atomic(out / "mac.csv", lambda tmp: mm.write_csv(tmp, preamble=_preamble(config))),
        _write_text(out / "errors.csv", table),
    ]


def run(argv=None) -> list:
    """Parse ``argv`` and execute the command; returns written paths, raises on failure."""
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    config = _config(ns)
    if ns.command == "generate":
        return cmd_generate(config)
    if ns.command == "identify":
        return cmd_identify(config)
    if ns.command == "sweep":
        return cmd_sweep(config, ns.fs_grid)
    if ns.command == "frf":
        return cmd_frf(config)
    if ns.command == "lscf":
        return cmd_lscf(config)
    return cmd_compare(config)


def main(argv=None) -> int:
    try:
        run(argv)
    except ModalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
