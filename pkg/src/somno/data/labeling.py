"""Reaction-time labelling of lane-departure trials and per-subject session balancing."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Optional, Sequence

import numpy as np

from ..errors import DataError
from .container import N_POINTS, LabeledSet

GLOBAL_WINDOW_S = 90.0
ALERT_FACTOR = 1.5
DROWSY_FACTOR = 2.5
ALERT_PERCENTILE = 5.0
MIN_CLASS_COUNT = 50


class TrialLabel(IntEnum):
    EXCLUDED = -1
    ALERT = 0
    DROWSY = 1


@dataclass
class Trial:
    onset: float  # deviation onset, seconds from session start
    local_rt: float  # seconds from onset to steering response
    eeg: Optional[np.ndarray] = None  # the 384 points before onset


@dataclass
class Session:
    subject_id: int
    trials: list
    name: str = ""

    def __post_init__(self):
        self.trials = sorted(self.trials, key=lambda t: t.onset)

    @property
    def local_rts(self) -> np.ndarray:
        return np.array([t.local_rt for t in self.trials], dtype=np.float64)


@dataclass
class LabeledTrial:
    trial: Trial
    label: TrialLabel
    global_rt: float


def compute_alert_rt(session: Session) -> float:
    """5th percentile of the session's local RTs (linear interpolation)."""
    rts = session.local_rts
    if rts.size == 0:
        raise DataError("cannot compute an alert RT for an empty session")
    return float(np.percentile(rts, ALERT_PERCENTILE, method="linear"))


def compute_global_rt(session: Session, onset_time: float, current: Optional[Trial] = None) -> float:
    """Mean local RT of earlier trials in the open window ``(onset - 90 s, onset)`` plus the current trial.

    ``current`` defaults to the first trial whose onset equals ``onset_time``.
    """
    if current is None:
        current = next((t for t in session.trials if t.onset == onset_time), None)
    rts = [t.local_rt for t in session.trials if onset_time - GLOBAL_WINDOW_S < t.onset < onset_time]
    if current is not None:
        rts.append(current.local_rt)
    if not rts:
        raise DataError(f"no trials in the 90 s window before t={onset_time}")
    return float(np.mean(rts))


def label_trial(local_rt: float, global_rt: float, alert_rt: float) -> TrialLabel:
    if min(local_rt, global_rt, alert_rt) <= 0:
        raise ValueError("reaction times must be positive")
    if local_rt < ALERT_FACTOR * alert_rt and global_rt < ALERT_FACTOR * alert_rt:
        return TrialLabel.ALERT
    if local_rt > DROWSY_FACTOR * alert_rt and global_rt > DROWSY_FACTOR * alert_rt:
        return TrialLabel.DROWSY
    return TrialLabel.EXCLUDED


def label_session(session: Session) -> list:
    """Label every trial of a session; excluded trials are kept with ``EXCLUDED``."""
    alert_rt = compute_alert_rt(session)
    out = []
    for trial in session.trials:
        g = compute_global_rt(session, trial.onset, trial)
        out.append(LabeledTrial(trial, label_trial(trial.local_rt, g, alert_rt), g))
    return out


@dataclass
class SessionSummary:
    session: Session
    alert: list = field(default_factory=list)  # LabeledTrial, chronological
    drowsy: list = field(default_factory=list)

    @property
    def counts(self) -> tuple:
        return len(self.alert), len(self.drowsy)


def summarize_session(session: Session) -> SessionSummary:
    summary = SessionSummary(session)
    for lt in label_session(session):
        if lt.label == TrialLabel.ALERT:
            summary.alert.append(lt)
        elif lt.label == TrialLabel.DROWSY:
            summary.drowsy.append(lt)
    return summary


def _select_session(candidates: Sequence[SessionSummary]) -> SessionSummary:
    # Largest balanced yield first, then the min/max ratio, then total count;
    # max() keeps the earliest session on a full tie.
    def key(s):
        a, d = s.counts
        return (min(a, d), min(a, d) / max(a, d), a + d)

    return max(candidates, key=key)


def _trim(trials: list, keep: int, shortest: bool) -> list:
    """Keep ``keep`` trials with the shortest (or longest) local RT, in chronological order."""
    rts = np.array([lt.trial.local_rt for lt in trials])
    order = np.argsort(rts if shortest else -rts, kind="stable")
    chosen = np.sort(order[:keep])
    return [trials[i] for i in chosen]


@dataclass
class BalanceResult:
    dataset: LabeledSet
    selected: dict  # subject -> chosen SessionSummary (after trimming)
    counts: dict  # subject -> (alert, drowsy) kept


def filter_and_balance(sessions_by_subject: Mapping[int, Sequence[Session]], min_count: int = MIN_CLASS_COUNT) -> BalanceResult:
    """Three-step session filtering and class balancing.

    1. drop sessions with fewer than ``min_count`` samples of either class;
    2. keep one session per subject, the one yielding the most balanced
       samples (ties: better class ratio, then more samples, then order);
    3. trim the majority class, keeping the shortest-RT alert trials or
       the longest-RT drowsy trials.

    Subjects without a surviving session are dropped; an empty result is
    not an error.
    """
    values, subjects, labels = [], [], []
    selected, counts = {}, {}
    for subject, sessions in sessions_by_subject.items():
        summaries = [summarize_session(s) for s in sessions]
        eligible = [s for s in summaries if min(s.counts) >= min_count]
        if not eligible:
            continue
        best = _select_session(eligible)
        keep = min(best.counts)
        alert = _trim(best.alert, keep, shortest=True)
        drowsy = _trim(best.drowsy, keep, shortest=False)
        kept = sorted(alert + drowsy, key=lambda lt: lt.trial.onset)
        for lt in kept:
            if lt.trial.eeg is None:
                raise DataError(f"trial at t={lt.trial.onset} of subject {subject} has no EEG window")
            values.append(np.asarray(lt.trial.eeg, dtype=np.float64).reshape(N_POINTS))
            subjects.append(subject)
            labels.append(int(lt.label))
        selected[subject] = SessionSummary(best.session, alert, drowsy)
        counts[subject] = (len(alert), len(drowsy))
    if not values:
        return BalanceResult(LabeledSet.empty(), selected, counts)
    return BalanceResult(LabeledSet(np.stack(values), subjects, labels), selected, counts)
