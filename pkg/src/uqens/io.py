"""Bit-exact file formats: prediction CSVs, report documents, audit CSVs for
bins / uncertainty tables / augmentation plans, and the experiment manifest.

All writers are deterministic: fixed header rows, canonical record ordering
(sample_id lexicographic, then model_id, then replicate_id), probabilities at
17 significant digits (enough that renormalize-on-ingest never flips an
argmax), report numerics at 12 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PredictionRecord, make_prediction_set
from .metrics import BinStat, CalibrationReport

_PROB_FMT = ".17g"
_REPORT_FMT = ".12g"


def _fmt(value, fmt):
    return format(float(value), fmt)


# ---------------------------------------------------------------- predictions

def predictions_header(num_classes):
    probs = ",".join(f"p{c}" for c in range(num_classes))
    return f"sample_id,model_id,replicate_id,{probs},label"


def write_predictions(pset, path):
    lines = [predictions_header(pset.num_classes)]
    for r in pset.records:
        probs = ",".join(_fmt(p, _PROB_FMT) for p in r.probs)
        lines.append(f"{r.sample_id},{r.model_id},{r.replicate_id},{probs},{r.label}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions(path):
    """Parse a predictions CSV into a validated PredictionSet.

    Malformed content raises ValueError naming the offending row.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"{path}: no such file")
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = lines[0].split(",")
    if (
        len(header) < 6
        or header[:3] != ["sample_id", "model_id", "replicate_id"]
        or header[-1] != "label"
    ):
        raise ValueError(f"{path}: row 1: unrecognized header")
    num_classes = len(header) - 4
    if header[3:-1] != [f"p{c}" for c in range(num_classes)]:
        raise ValueError(f"{path}: row 1: unrecognized probability columns")

    records = []
    seen = set()
    for row_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != num_classes + 4:
            raise ValueError(
                f"{path}: row {row_no}: expected {num_classes + 4} columns, "
                f"got {len(fields)}"
            )
        try:
            model_id = int(fields[1])
            replicate_id = int(fields[2])
            label = int(fields[-1])
        except ValueError:
            raise ValueError(f"{path}: row {row_no}: non-numeric id or label") from None
        try:
            probs = tuple(float(p) for p in fields[3:-1])
        except ValueError:
            raise ValueError(f"{path}: row {row_no}: non-numeric probability") from None
        key = (fields[0], model_id, replicate_id)
        if key in seen:
            raise ValueError(f"{path}: row {row_no}: duplicate key {key}")
        seen.add(key)
        records.append(PredictionRecord(fields[0], model_id, replicate_id, probs, label))

    if not records:
        raise ValueError(f"{path}: no samples")
    return make_prediction_set(records)


# -------------------------------------------------------------------- reports

_BIN_HEADER = "bin_index,lower,upper,count,accuracy,confidence"


@dataclass(frozen=True)
class ReportDoc:
    """A calibration report plus the run context it was produced under."""

    strategy: str
    replicates: int
    models: int
    report: CalibrationReport


def _bin_line(b, fmt):
    return ",".join(
        [
            str(b.bin_index),
            _fmt(b.lower, fmt),
            _fmt(b.upper, fmt),
            str(b.count),
            _fmt(b.accuracy, fmt),
            _fmt(b.confidence, fmt),
        ]
    )


def render_report(report, strategy, replicates=1, models=1):
    lines = [
        f"strategy: {strategy}",
        f"replicates: {replicates}",
        f"models: {models}",
        f"samples: {report.n}",
        f"bins: {report.num_bins}",
        f"qwk: {_fmt(report.qwk, _REPORT_FMT)}",
        f"ece: {_fmt(report.ece, _REPORT_FMT)}",
        f"mce: {_fmt(report.mce, _REPORT_FMT)}",
        f"brier: {_fmt(report.brier, _REPORT_FMT)}",
        "",
        _BIN_HEADER,
    ]
    lines.extend(_bin_line(b, _REPORT_FMT) for b in report.bins)
    return "\n".join(lines) + "\n"


def write_report(report, strategy, path, replicates=1, models=1):
    Path(path).write_text(render_report(report, strategy, replicates, models))


def read_report(path):
    path = Path(path)
    if not path.exists():
        raise ValueError(f"{path}: no such file")
    head, _, table = path.read_text().partition("\n\n")
    fields = {}
    for line in head.splitlines():
        key, _, value = line.partition(": ")
        fields[key] = value
    table_lines = table.splitlines()
    if not fields or table_lines[:1] != [_BIN_HEADER]:
        raise ValueError(f"{path}: not a report file")
    bins = []
    for line in table_lines[1:]:
        idx, lower, upper, count, acc, conf = line.split(",")
        bins.append(
            BinStat(int(idx), float(lower), float(upper), int(count),
                    float(acc), float(conf))
        )
    report = CalibrationReport(
        ece=float(fields["ece"]),
        mce=float(fields["mce"]),
        brier=float(fields["brier"]),
        qwk=float(fields["qwk"]),
        bins=tuple(bins),
        n=int(fields["samples"]),
        num_bins=int(fields["bins"]),
    )
    return ReportDoc(
        strategy=fields["strategy"],
        replicates=int(fields["replicates"]),
        models=int(fields["models"]),
        report=report,
    )


# ----------------------------------------------------------------- audit CSVs

def write_bins_csv(bins, path):
    lines = [_BIN_HEADER]
    lines.extend(_bin_line(b, _PROB_FMT) for b in bins)
    Path(path).write_text("\n".join(lines) + "\n")


def write_uncertainty_csv(table, path):
    lines = ["sample_id,model_id,sigma,weight,mu,var"]
    for i, sid in enumerate(table.sample_ids):
        for j in range(table.sigma.shape[1]):
            lines.append(
                ",".join(
                    [
                        sid,
                        str(j + 1),
                        _fmt(table.sigma[i, j], _PROB_FMT),
                        _fmt(table.weight[i, j], _PROB_FMT),
                        _fmt(table.mu[i], _PROB_FMT),
                        _fmt(table.var[i], _PROB_FMT),
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


PLAN_HEADER = (
    "seed,sample_id,replicate_id,b,s,h,c,crop_x,crop_y,crop_w,crop_h,hflip,vflip"
)


def write_plans_csv(plans, path):
    lines = [PLAN_HEADER]
    for p in plans:
        lines.append(
            ",".join(
                [
                    str(p.seed),
                    p.sample_id,
                    str(p.replicate_id),
                    _fmt(p.brightness, _PROB_FMT),
                    _fmt(p.saturation, _PROB_FMT),
                    _fmt(p.hue, _PROB_FMT),
                    _fmt(p.contrast, _PROB_FMT),
                    str(p.crop[0]),
                    str(p.crop[1]),
                    str(p.crop[2]),
                    str(p.crop[3]),
                    str(int(p.hflip)),
                    str(int(p.vflip)),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_aggregated(sample_ids, probs, labels, path):
    """Per-sample aggregated forecasts (sample_id, p0..p{C-1}, label)."""
    probs = np.asarray(probs, dtype=float)
    num_classes = probs.shape[1]
    cols = ",".join(f"p{c}" for c in range(num_classes))
    lines = [f"sample_id,{cols},label"]
    for sid, row, label in zip(sample_ids, probs, labels):
        body = ",".join(_fmt(p, _PROB_FMT) for p in row)
        lines.append(f"{sid},{body},{int(label)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------------- manifest

def write_manifest(config_dict, path):
    """Echo run parameters for provenance; key order and floats are stable."""
    Path(path).write_text(json.dumps(config_dict, sort_keys=True, indent=2) + "\n")
