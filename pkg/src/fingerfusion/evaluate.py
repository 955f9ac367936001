"""Fingertip accuracy metrics, evaluation reports and comparison tables.

Errors are 3D Euclidean distances in millimetres between predicted and
ground-truth fingertips (the palm is never scored). mP(t) is reported two
ways: over all (frame, fingertip) pairs, and per frame using the worst
fingertip of that frame. Neither is claimed to be the only definition.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data.ftds import load_arrays
from .data.joints import FINGERTIPS

TAUS = np.arange(1, 51, dtype=np.float64)
DEFAULT_MP_TAU = 10.0


@dataclass
class EvalReport:
    method: str
    errors: np.ndarray  # (frames, 5) millimetres
    err_f: float
    discarded: int
    discard_over_mm: Optional[float]
    taus: np.ndarray
    mp_curve: np.ndarray  # fraction of (frame, fingertip) pairs with error < tau
    mp_frame_curve: np.ndarray  # fraction of frames whose worst fingertip error < tau
    mp_tau: float = DEFAULT_MP_TAU
    timing: Optional[dict] = field(default=None)

    @property
    def n_frames(self) -> int:
        return int(self.errors.shape[0])

    def mp_at(self, tau: Optional[float] = None, per_frame: bool = False) -> float:
        tau = self.mp_tau if tau is None else tau
        e = self.errors.max(axis=1) if per_frame else self.errors.reshape(-1)
        return float(np.mean(e < tau)) if e.size else float("nan")

    @property
    def mp(self) -> float:
        return self.mp_at()


def fingertip_errors(pred_mm, gt_mm) -> np.ndarray:
    """Per-frame per-fingertip distance; inputs are ``(N, J, 3)`` or ``(N, 3J)`` with fingertips first."""
    p = np.asarray(pred_mm, dtype=np.float64).reshape(len(pred_mm), -1, 3)[:, :5]
    g = np.asarray(gt_mm, dtype=np.float64).reshape(len(gt_mm), -1, 3)[:, :5]
    if p.shape != g.shape:
        raise ValueError(f"prediction {p.shape} vs ground truth {g.shape}")
    return np.sqrt(np.sum((p - g) ** 2, axis=2))


def mp_curve(errors, taus=TAUS) -> np.ndarray:
    e = np.sort(np.asarray(errors, dtype=np.float64).reshape(-1))
    if e.size == 0:
        return np.full(len(taus), np.nan)
    return np.searchsorted(e, np.asarray(taus, dtype=np.float64), side="left") / e.size


def summarize(errors, method: str = "", discard_over_mm: Optional[float] = None, taus=TAUS, mp_tau: float = DEFAULT_MP_TAU) -> EvalReport:
    """Aggregate an ``(N, 5)`` error array.

    Pairs whose error exceeds ``discard_over_mm`` are excluded from err_f and
    counted in ``discarded``; mP still includes them.
    """
    errors = np.asarray(errors, dtype=np.float64).reshape(-1, 5)
    flat = errors.reshape(-1)
    keep = flat if discard_over_mm is None else flat[flat <= discard_over_mm]
    err_f = float(np.mean(keep)) if keep.size else float("nan")
    return EvalReport(
        method=method,
        errors=errors,
        err_f=err_f,
        discarded=int(flat.size - keep.size),
        discard_over_mm=discard_over_mm,
        taus=np.asarray(taus, dtype=np.float64),
        mp_curve=mp_curve(flat, taus),
        mp_frame_curve=mp_curve(errors.max(axis=1) if errors.size else errors, taus),
        mp_tau=mp_tau,
    )


def denormalize_predictions(pred, centers, cubes) -> np.ndarray:
    """Network outputs ``(N, 3J)`` in crop units -> ``(N, J, 3)`` millimetres."""
    pred = np.asarray(pred, dtype=np.float64).reshape(len(pred), -1, 3)
    half = np.asarray(cubes, dtype=np.float64)[:, None, None] / 2.0
    return pred * half + np.asarray(centers, dtype=np.float64)[:, None, :]


def evaluate_predictions(pred, arrays: dict, method: str = "", **kw) -> EvalReport:
    pred_mm = denormalize_predictions(pred, arrays["center"], arrays["cube"])
    return summarize(fingertip_errors(pred_mm, arrays["joints"]), method, **kw)


def predict(net, arrays: dict, batch_size: int = 64) -> np.ndarray:
    if "edge" in net.streams and arrays.get("edge") is None:
        raise ValueError(f"{net.arch_id} needs edge images but the dataset has none")
    edge = arrays["edge"] if "edge" in net.streams else None
    depth = arrays["depth"] if "depth" in net.streams else None
    return net.predict(depth, edge, batch_size)


def evaluate(checkpoint, dataset, discard_over_mm: Optional[float] = None, mp_tau: float = DEFAULT_MP_TAU, method: Optional[str] = None) -> EvalReport:
    """Run ``checkpoint`` (a Checkpoint or built network) on ``dataset`` (path or arrays)."""
    net = checkpoint.to_network() if hasattr(checkpoint, "to_network") else checkpoint
    arrays = load_arrays(dataset) if isinstance(dataset, (str, bytes)) or hasattr(dataset, "__fspath__") else dataset
    pred = predict(net, arrays)
    return evaluate_predictions(pred, arrays, method or net.arch_id, discard_over_mm=discard_over_mm, mp_tau=mp_tau)


# report files ---------------------------------------------------------------


def summary_rows(report: EvalReport):
    rows = [
        ("method", report.method),
        ("frames", report.n_frames),
        ("err_f_mm", repr(float(report.err_f))),
        (f"mP@{report.mp_tau:g}mm", repr(float(report.mp))),
        (f"mP_frame@{report.mp_tau:g}mm", repr(float(report.mp_at(per_frame=True)))),
        ("discard_over_mm", "" if report.discard_over_mm is None else repr(float(report.discard_over_mm))),
        ("discarded", report.discarded),
    ]
    if report.timing:
        rows += [(f"time_{k}", repr(float(v))) for k, v in report.timing.items()]
    return rows


def write_report(report: EvalReport, prefix) -> list:
    """Write ``<prefix>.csv`` (summary), ``<prefix>_errors.csv`` and ``<prefix>_mp.dat``."""
    prefix = str(prefix)
    paths = [prefix + ".csv", prefix + "_errors.csv", prefix + "_mp.dat"]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerows(summary_rows(report))
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", *FINGERTIPS])
        for i, row in enumerate(report.errors):
            w.writerow([i, *(repr(float(v)) for v in row)])
    with open(paths[2], "w") as fh:
        fh.write("# tau_mm mP_pairs mP_frames\n")
        for t, a, b in zip(report.taus, report.mp_curve, report.mp_frame_curve):
            fh.write(f"{t:g} {float(a)!r} {float(b)!r}\n")
    return paths


COLUMNS = ("method", "mP", "err_f/mm", "time/ms")


def compare_table(reports: Sequence[EvalReport], tau: Optional[float] = None, sort_by_err: bool = False):
    """Return ``(aligned_text, csv_text)`` with one row per report."""
    rows = list(reports)
    if sort_by_err:
        rows.sort(key=lambda r: r.err_f)
    tau = rows[0].mp_tau if (tau is None and rows) else (tau or DEFAULT_MP_TAU)
    header = ("method", f"mP@{tau:g}mm", "err_f/mm", "time/ms")
    data = []
    for r in rows:
        t = r.timing.get("mean_ms") if r.timing else None
        data.append((r.method, r.mp_at(tau), r.err_f, t))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for m, mp, ef, t in data:
        w.writerow([m, repr(float(mp)), repr(float(ef)), "" if t is None else repr(float(t))])
    cells = [header] + [(m, f"{mp:.3f}", f"{ef:.2f}", "-" if t is None else f"{t:.2f}") for m, mp, ef, t in data]
    widths = [max(len(row[i]) for row in cells) for i in range(4)]
    lines = ["  ".join(c.ljust(wd) if i == 0 else c.rjust(wd) for i, (c, wd) in enumerate(zip(row, widths))) for row in cells]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines) + "\n", buf.getvalue()
