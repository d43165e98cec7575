"""Gap-tolerant segment merging and linear-interpolation mitigation."""
from dataclasses import dataclass

import numpy as np

from .data import write_csv


class FilterError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalySegment:
    start: int
    end: int  # inclusive

    def __len__(self):
        return self.end - self.start + 1


def merge_segments(mask, max_gap=2):
    """Maximal flagged runs, joining runs separated by at most ``max_gap``
    unflagged steps (the gap steps become part of the segment)."""
    m = np.asarray(mask, dtype=bool)
    if max_gap < 0:
        raise FilterError("max_gap must be non-negative")
    idx = np.flatnonzero(m)
    if idx.size == 0:
        return []
    # a new segment starts wherever the distance to the previous flag leaves
    # more than max_gap clean steps in between
    breaks = np.flatnonzero(np.diff(idx) > max_gap + 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return [AnomalySegment(int(s), int(e)) for s, e in zip(starts, ends)]


def segment_mask(segments, length):
    out = np.zeros(length, dtype=bool)
    for seg in segments:
        out[seg.start:seg.end + 1] = True
    return out


def filter_anomalies(values, mask, max_gap=2):
    """Replace each merged segment by a straight line between its clean
    neighbours. Segments touching the series start (end) take the value of
    their right (left) neighbour. Returns (filtered values, segments)."""
    v = np.asarray(values, dtype=np.float64)
    m = np.asarray(mask, dtype=bool)
    if v.shape != m.shape or v.ndim != 1:
        raise FilterError(f"values {v.shape} and mask {m.shape} are not aligned")
    if v.size and m.all():
        raise FilterError("every step is flagged; no anchor points to interpolate from")
    segments = merge_segments(m, max_gap)
    out = v.copy()
    n = v.size
    for seg in segments:
        s, e = seg.start, seg.end
        if s == 0 and e == n - 1:
            raise FilterError("merged segment spans the whole series; no anchor points")
        if s == 0:
            out[s:e + 1] = v[e + 1]
        elif e == n - 1:
            out[s:e + 1] = v[s - 1]
        else:
            xl, xr = s - 1, e + 1
            fl, fr = v[xl], v[xr]
            pos = np.arange(s, e + 1, dtype=np.float64)
            out[s:e + 1] = fl + (fr - fl) * (pos - xl) / (xr - xl)
    return out, segments


def export_filtered(path, series, segments):
    write_csv(path, series, {"was_interpolated": segment_mask(segments, len(series))})
