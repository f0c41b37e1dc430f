"""Activity overlap scoring of predicted segments against ground truth.

A prediction can match a ground-truth activity only if it is in the same
video, has the same class, and both its start and end lie within ``tol_s``
seconds of the ground truth's. The score of a match is the time
intersection over the time union of the two segments; the reported score
is the mean over all ground-truth activities, unmatched ones counting 0.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

from .errors import DegenerateSegment, EmptyGroundTruth, IoFailure, MissingFile

DEFAULT_TOL_S = 10.0


@dataclass(frozen=True)
class ActivitySegment:
    video_id: str
    class_id: int
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise DegenerateSegment(f"segment [{self.start_s}, {self.end_s}] has no duration")
        if self.start_s < 0:
            raise DegenerateSegment(f"segment starts before 0 s: {self.start_s}")


def overlap(g, p):
    """Time intersection over time union of two segments, in [0, 1]."""
    gs, ge, ps, pe = g.start_s, g.end_s, p.start_s, p.end_s
    if not (gs < ge and ps < pe):
        raise DegenerateSegment("overlap requires segments with start < end")
    return max(min(ge, pe) - max(gs, ps), 0.0) / (max(ge, pe) - min(gs, ps))


def match_eligible(g, p, tol_s=DEFAULT_TOL_S):
    return (
        g.video_id == p.video_id
        and g.class_id == p.class_id
        and abs(p.start_s - g.start_s) <= tol_s
        and abs(p.end_s - g.end_s) <= tol_s
    )


def match_predictions(gts, preds, tol_s=DEFAULT_TOL_S):
    """One-to-one assignment ``{gt index: (pred index, os)}``.

    Eligible pairs are taken greedily by descending overlap, ties broken by
    earlier ground-truth start, earlier prediction start, lower class id.
    """
    pairs = []
    for gi, g in enumerate(gts):
        for pi, p in enumerate(preds):
            if match_eligible(g, p, tol_s):
                pairs.append((-overlap(g, p), g.start_s, p.start_s, g.class_id, g.end_s, p.end_s, gi, pi))
    pairs.sort()
    assignment = {}
    used = set()
    for neg_os, *_, gi, pi in pairs:
        if gi in assignment or pi in used:
            continue
        assignment[gi] = (pi, -neg_os)
        used.add(pi)
    return assignment


@dataclass
class MatchRecord:
    gt: ActivitySegment
    pred: ActivitySegment | None
    os: float


@dataclass
class EvalReport:
    average_score: float
    records: list = field(default_factory=list)
    unmatched_gt: int = 0
    unused_pred: int = 0

    def to_dict(self):
        return {
            "average_score": self.average_score,
            "matches": [
                {"gt": asdict(r.gt), "pred": asdict(r.pred) if r.pred else None, "os": r.os}
                for r in self.records
            ],
            "unmatched_gt": self.unmatched_gt,
            "unused_pred": self.unused_pred,
        }


def average_score(gts, preds, tol_s=DEFAULT_TOL_S):
    gts = list(gts)
    preds = list(preds)
    if not gts:
        raise EmptyGroundTruth("cannot score against an empty ground-truth list")
    assignment = match_predictions(gts, preds, tol_s)
    records = []
    for gi, g in enumerate(gts):
        if gi in assignment:
            pi, os_ = assignment[gi]
            records.append(MatchRecord(g, preds[pi], os_))
        else:
            records.append(MatchRecord(g, None, 0.0))
    total = sum(r.os for r in records)
    return EvalReport(
        average_score=total / len(gts),
        records=records,
        unmatched_gt=len(gts) - len(assignment),
        unused_pred=len(preds) - len(assignment),
    )


SEGMENT_FIELDS = ["video_id", "class", "start_s", "end_s"]


def write_segments_csv(segments, path):
    """Write ``video_id,class,start_s,end_s`` rows sorted by video and start."""
    rows = sorted(segments, key=lambda s: (s.video_id, s.start_s, s.end_s, s.class_id))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SEGMENT_FIELDS)
            for s in rows:
                writer.writerow([s.video_id, s.class_id, f"{s.start_s:.6f}", f"{s.end_s:.6f}"])
    except OSError as exc:
        raise IoFailure(f"cannot write segments to {path}: {exc}") from exc


def read_segments_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(SEGMENT_FIELDS) - set(reader.fieldnames or [])
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            return [
                ActivitySegment(r["video_id"], int(r["class"]), float(r["start_s"]), float(r["end_s"]))
                for r in reader
            ]
    except FileNotFoundError:
        raise MissingFile(f"no such segment file: {path}") from None


def write_report_json(report, path):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
