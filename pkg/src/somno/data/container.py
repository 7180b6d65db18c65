"""Labelled single-channel sample sets and their on-disk formats.

EDD v1 (little-endian)::

    magic  b"EDD1"
    u32    n_samples
    u32    n_points        (always 384)
    u32    sample_rate_hz  (always 128)
    n_samples records of: u16 subject_id, u8 label, f32[n_points]

Values are stored as float32; loading widens them to float64.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError, LabelError

N_POINTS = 384
SAMPLE_RATE = 128
ALERT, DROWSY = 0, 1

EDD_MAGIC = b"EDD1"
_EDD_HEADER = struct.Struct("<4sIII")
_RECORD = np.dtype([("subject", "<u2"), ("label", "u1"), ("values", "<f4", (N_POINTS,))])


@dataclass(frozen=True)
class EegSample:
    values: np.ndarray
    subject_id: int
    label: int


@dataclass
class LabeledSet:
    """Column-oriented sample set: ``values`` (N, 384), ``subjects`` (N,), ``labels`` (N,)."""

    values: np.ndarray
    subjects: np.ndarray
    labels: np.ndarray
    events: list = field(default_factory=list)  # optional (event_type, start, end) per sample

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, N_POINTS)
        self.subjects = np.asarray(self.subjects, dtype=np.int64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not len(self.values) == len(self.subjects) == len(self.labels):
            raise ValueError("values, subjects and labels differ in length")
        if np.any((self.labels != ALERT) & (self.labels != DROWSY)):
            raise LabelError("labels must be 0 (alert) or 1 (drowsy)")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> EegSample:
        return EegSample(self.values[i], int(self.subjects[i]), int(self.labels[i]))

    @classmethod
    def from_samples(cls, samples) -> "LabeledSet":
        samples = list(samples)
        if not samples:
            return cls.empty()
        return cls(
            np.stack([s.values for s in samples]),
            [s.subject_id for s in samples],
            [s.label for s in samples],
        )

    @classmethod
    def empty(cls) -> "LabeledSet":
        return cls(np.zeros((0, N_POINTS)), [], [])

    @property
    def subject_ids(self) -> list:
        return sorted(set(self.subjects.tolist()))

    def subject_index(self) -> dict:
        """Row indices per subject, in file order."""
        return {s: np.flatnonzero(self.subjects == s) for s in self.subject_ids}

    def class_counts(self) -> dict:
        """``{subject: (alert_count, drowsy_count)}``."""
        out = {}
        for s, idx in self.subject_index().items():
            lab = self.labels[idx]
            out[s] = (int(np.sum(lab == ALERT)), int(np.sum(lab == DROWSY)))
        return out

    def subset(self, idx) -> "LabeledSet":
        idx = np.asarray(idx)
        events = [self.events[i] for i in idx] if self.events else []
        return LabeledSet(self.values[idx], self.subjects[idx], self.labels[idx], events)


def edd_bytes(data: LabeledSet) -> bytes:
    rec = np.zeros(len(data), dtype=_RECORD)
    if np.any((data.subjects < 0) | (data.subjects > 0xFFFF)):
        raise ValueError("subject ids must fit in an unsigned 16-bit field")
    rec["subject"] = data.subjects
    rec["label"] = data.labels
    rec["values"] = data.values
    return _EDD_HEADER.pack(EDD_MAGIC, len(data), N_POINTS, SAMPLE_RATE) + rec.tobytes()


def parse_edd(buf: bytes) -> LabeledSet:
    if len(buf) < _EDD_HEADER.size:
        raise FormatError("file is shorter than the 16-byte EDD header", offset=len(buf))
    magic, n, points, rate = _EDD_HEADER.unpack_from(buf, 0)
    if magic != EDD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EDD_MAGIC!r}", offset=0)
    if points != N_POINTS:
        raise FormatError(f"n_points is {points}, expected {N_POINTS}", offset=8)
    if rate != SAMPLE_RATE:
        raise FormatError(f"sample rate is {rate} Hz, expected {SAMPLE_RATE}", offset=12)
    need = _EDD_HEADER.size + n * _RECORD.itemsize
    if len(buf) < need:
        whole = (len(buf) - _EDD_HEADER.size) // _RECORD.itemsize
        raise FormatError(
            f"truncated: header declares {n} samples, file holds {whole} complete records",
            offset=_EDD_HEADER.size + whole * _RECORD.itemsize,
        )
    if len(buf) > need:
        raise FormatError("trailing bytes after the last record", offset=need)
    rec = np.frombuffer(buf, dtype=_RECORD, count=n, offset=_EDD_HEADER.size)
    bad = np.flatnonzero(rec["label"] > DROWSY)
    if bad.size:
        raise FormatError(
            f"label {rec['label'][bad[0]]} is not 0 or 1",
            offset=_EDD_HEADER.size + bad[0] * _RECORD.itemsize + 2,
        )
    return LabeledSet(rec["values"].astype(np.float64), rec["subject"], rec["label"])


def save_edd(data: LabeledSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(edd_bytes(data))


def load_edd(path) -> LabeledSet:
    with open(path, "rb") as fh:
        return parse_edd(fh.read())


def _format_value(v: float) -> str:
    # shortest text that reads back to the same float64
    return repr(float(v))


def import_csv(path) -> LabeledSet:
    """Read rows ``subject_id,label,v1,...,v384``; a leading header row is skipped."""
    values, subjects, labels = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip() == "subject_id":
                continue
            if len(row) != N_POINTS + 2:
                raise FormatError(
                    f"line {lineno}: expected {N_POINTS + 2} fields, found {len(row)}", offset=lineno
                )
            try:
                subj, lab = int(row[0]), int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}", offset=lineno) from None
            if lab not in (ALERT, DROWSY):
                raise FormatError(f"line {lineno}: label {lab} is not 0 or 1", offset=lineno)
            subjects.append(subj)
            labels.append(lab)
            values.append(vals)
    if not values:
        return LabeledSet.empty()
    return LabeledSet(np.array(values), subjects, labels)


def export_csv(data: LabeledSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "label"] + [f"v{i}" for i in range(1, N_POINTS + 1)])
        for s, lab, row in zip(data.subjects, data.labels, data.values):
            writer.writerow([int(s), int(lab)] + [_format_value(v) for v in row])
