"""On-disk formats: transcript (JSON lines), ensemble, report and prediction files.

Every file carries ``schema_version``. Output is written with fixed key order
and ``repr`` floats so a given (config, seed) always produces identical bytes.
"""

import csv
import json
import math
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .detection import TrialEnsemble
from .errors import ConfigError
from .pauli import PAULI_LABELS
from .protocol import message_from_record

SCHEMA_VERSION = 1


class InputError(ConfigError):
    """A data file is missing, truncated or fails its schema."""


def _finite_or_none(a):
    return [[None if (v is None or not math.isfinite(v)) else v for v in row]
            for row in np.asarray(a, dtype=float).tolist()]


def _dump(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_transcript(path, results, seed):
    """One JSON record per line: a header, then every message in order."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"record": "header", "schema_version": SCHEMA_VERSION,
                             "seed": seed, "trials": len(results)}) + "\n")
        for res in results:
            for seq, msg in enumerate(res.transcript):
                rec = {"record": "message", "trial": res.trial, "seq": seq}
                rec.update(msg.record())
                fh.write(json.dumps(rec) + "\n")


def read_transcript(path):
    """Return ``(header, [(trial, message), ...])``."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InputError(f"{path}: empty transcript")
    lineno = 1
    try:
        header = json.loads(lines[0])
        if header.get("record") != "header" or header.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"{path}: missing or unsupported transcript header")
        messages = []
        for lineno, line in enumerate(lines[1:], start=2):
            rec = json.loads(line)
            messages.append((rec["trial"], message_from_record(rec)))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: line {lineno}: {exc}") from None
    return header, messages


class TrialRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trial: int
    S1: list[list[float]]
    S2: list[list[float]]
    S_full: list[list[float | None]] | None = None
    counts: list[list[list[int]]] | None = None
    flags: list[str] = []

    @field_validator("S1", "S2")
    @classmethod
    def _four_by_four(cls, v):
        if len(v) != 4 or any(len(row) != 4 for row in v):
            raise ValueError("must be a 4x4 array")
        return v


class EnsembleFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1]
    alice_labels: list[str]
    bob_tokens: list[str]
    a1_selection: list[str] = Field(min_length=4, max_length=4)
    a2_selection: list[str] = Field(min_length=4, max_length=4)
    shots_per_pair: int | None = None
    trials: list[TrialRecord] = Field(min_length=2)

    def ensemble(self):
        return TrialEnsemble(np.array([t.S1 for t in self.trials]),
                             np.array([t.S2 for t in self.trials]))


def write_ensemble(path, results, schedule, S1, S2):
    trials = []
    for res, s1, s2 in zip(results, S1, S2):
        trials.append({
            "trial": res.trial,
            "S1": s1.tolist(),
            "S2": s2.tolist(),
            "S_full": _finite_or_none(res.expectations),
            "counts": res.counts.tolist(),
            "flags": list(res.flags),
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "alice_labels": list(schedule.alice_labels),
        "bob_tokens": list(schedule.bob_tokens),
        "a1_selection": list(schedule.a1_selection),
        "a2_selection": list(schedule.a2_selection),
        "shots_per_pair": schedule.shots_per_pair,
        "trials": trials,
    }
    Path(path).write_text(_dump(doc))


def read_ensemble(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        doc = EnsembleFile.model_validate(raw)
        doc.ensemble()
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise InputError(f"{path}: field {loc}: {first['msg']}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return doc


def write_report(json_path, csv_path, report, extra):
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(report.to_dict())
    doc.update(extra)
    Path(json_path).write_text(_dump(doc))
    columns = extra.get("bob_tokens") or [str(j) for j in range(4)]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "pauli_row", "bob_column", "M", "sigma",
                    "ci_lower", "ci_upper", "t_stat", "p_value", "excludes_zero"])
        for i in range(4):
            for j in range(4):
                h = report.ci_half_width[i, j]
                w.writerow([i, j, PAULI_LABELS[i], columns[j], repr(float(report.M[i, j])),
                            repr(float(report.sigma[i, j])), repr(float(report.M[i, j] - h)),
                            repr(float(report.M[i, j] + h)), repr(float(report.t_stat[i, j])),
                            repr(float(report.p_value[i, j])),
                            int(report.excludes_zero[i, j])])


def write_json(path, doc):
    out = {"schema_version": SCHEMA_VERSION}
    out.update(doc)
    Path(path).write_text(_dump(out))


def write_matrix_csv(path, named):
    """Flat ``(i, j, name1, name2, ...)`` table for several 4x4 matrices."""
    names = list(named)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "pauli_row"] + names)
        for i in range(4):
            for j in range(4):
                w.writerow([i, j, PAULI_LABELS[i]]
                           + [repr(float(named[n][i][j])) for n in names])
