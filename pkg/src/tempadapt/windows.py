"""Sliding windows over contiguous hourly segments, and chronological target-domain splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError
from .features import CONTEXT_COLUMNS, DYNAMIC_COLUMNS, TARGET_COLUMN, FeatureFrame

log = logging.getLogger(__name__)

WINDOW = 12
HORIZON = 24
MIN_SPLIT_WINDOWS = 30


@dataclass
class WindowSet:
    X: np.ndarray  # (N, W, F_dyn)
    context: np.ndarray  # (N, F_ctx)
    t_last: np.ndarray  # (N,) degC
    Y: np.ndarray  # (N, H) degC
    anchors: np.ndarray  # (N,) datetime64[ns], UTC
    building_ids: np.ndarray  # (N,) str
    skipped_segments: int = 0

    def __len__(self) -> int:
        return int(self.X.shape[0])

    @property
    def last_step_features(self) -> np.ndarray:
        return self.X[:, -1, :]

    def subset(self, idx) -> "WindowSet":
        return WindowSet(
            self.X[idx], self.context[idx], self.t_last[idx], self.Y[idx], self.anchors[idx], self.building_ids[idx]
        )

    @classmethod
    def empty(cls, window: int = WINDOW, horizon: int = HORIZON, n_dyn: int = len(DYNAMIC_COLUMNS), n_ctx: int = len(CONTEXT_COLUMNS)):
        return cls(
            np.zeros((0, window, n_dyn)),
            np.zeros((0, n_ctx)),
            np.zeros(0),
            np.zeros((0, horizon)),
            np.zeros(0, dtype="datetime64[ns]"),
            np.zeros(0, dtype=object),
        )


@dataclass
class DomainSplit:
    unsup: WindowSet
    cal: WindowSet
    test: WindowSet


def make_windows(frame: FeatureFrame, window: int = WINDOW, horizon: int = HORIZON) -> WindowSet:
    """Stride-1 windows: inputs are hours [t-W+1, t], targets the indoor temperature at [t+1, t+H].

    No window crosses a segment boundary. The result is ordered by anchor
    time ``t`` (ties broken by building id).
    """
    parts = []
    skipped = 0
    for bid, seg in frame.segments():
        n = len(seg) - window - horizon + 1
        if n <= 0:
            skipped += 1
            continue
        dyn = seg[DYNAMIC_COLUMNS].to_numpy(dtype=np.float64)
        target = seg[TARGET_COLUMN].to_numpy(dtype=np.float64)
        ctx = seg[CONTEXT_COLUMNS].to_numpy(dtype=np.float64)
        ts = seg["timestamp"].dt.tz_convert("UTC").dt.tz_localize(None).to_numpy().astype("datetime64[ns]")
        # sliding_window_view puts the window axis last
        X = sliding_window_view(dyn, window, axis=0)[:n].transpose(0, 2, 1)
        Y = sliding_window_view(target[window:], horizon)[:n]
        last = np.arange(window - 1, window - 1 + n)
        parts.append((X.copy(), ctx[last], target[last], Y.copy(), ts[last], np.full(n, bid, dtype=object)))
    if not parts:
        out = WindowSet.empty(window, horizon)
        out.skipped_segments = skipped
        return out
    X, ctx, tl, Y, anc, bids = (np.concatenate(c) for c in zip(*parts))
    order = np.lexsort((bids.astype(str), anc))
    ws = WindowSet(X[order], ctx[order], tl[order], Y[order], anc[order], bids[order])
    ws.skipped_segments = skipped
    return ws


def _tie_safe(anchors: np.ndarray, b: int, stop: int | None = None) -> int:
    """Move boundary ``b`` off a run of equal anchors so both sides stay strictly ordered.

    The boundary moves forward past the tie unless that would leave nothing
    before ``stop``; then it moves back to the start of the tie instead.
    """
    stop = len(anchors) if stop is None else stop
    fwd = b
    while 0 < fwd < stop and anchors[fwd] == anchors[fwd - 1]:
        fwd += 1
    if fwd < stop or b >= stop:
        return fwd
    while b > 0 and anchors[b] == anchors[b - 1]:
        b -= 1
    return b


def split_target(ws: WindowSet, purge: bool = False, horizon: int = HORIZON) -> DomainSplit:
    """First 90% adapt / last 10% test; adapt splits again 90% unlabelled / 10% calibration.

    Boundaries are ``floor(0.9 * n)``. With ``purge=True``, adaptation windows
    whose target hours reach the first test anchor are dropped so no labelled
    hour overlaps the test period.
    """
    n = len(ws)
    if n < MIN_SPLIT_WINDOWS:
        raise ConfigError(f"target domain has {n} windows; need at least {MIN_SPLIT_WINDOWS} to split")
    anchors = ws.anchors
    if np.any(anchors[1:] < anchors[:-1]):
        raise ConfigError("windows must be sorted chronologically before splitting")
    n_adapt = _tie_safe(anchors, int(np.floor(0.9 * n)))
    n_unsup = _tie_safe(anchors, int(np.floor(0.9 * n_adapt)), n_adapt)
    adapt_idx = np.arange(n_adapt)
    if purge and n_adapt < n:
        limit = anchors[n_adapt]
        target_end = anchors[:n_adapt] + np.timedelta64(horizon, "h")
        adapt_idx = adapt_idx[target_end < limit]
    unsup_idx = adapt_idx[adapt_idx < n_unsup]
    cal_idx = adapt_idx[adapt_idx >= n_unsup]
    if len(cal_idx) == 0:
        log.warning("purging left no calibration windows (%d adaptation windows before purge); "
                    "use more data or disable the purge", n_adapt)
    return DomainSplit(ws.subset(unsup_idx), ws.subset(cal_idx), ws.subset(np.arange(n_adapt, n)))


def holdout_tail(ws: WindowSet, fraction: float = 0.1) -> tuple[WindowSet, WindowSet]:
    """Chronological (train, validation) split keeping the last ``fraction`` for validation."""
    n = len(ws)
    cut = _tie_safe(ws.anchors, int(np.floor((1.0 - fraction) * n)))
    return ws.subset(np.arange(cut)), ws.subset(np.arange(cut, n))


def window_at(frame: FeatureFrame, building_id: str, anchor, window: int = WINDOW, horizon: int = HORIZON) -> WindowSet:
    """The single window whose last input hour is ``anchor``.

    The ``window`` hours ending at ``anchor`` must all be present. Target
    hours that are missing (e.g. the future) come back as NaN.
    """
    table = frame.table
    rows = table[table["building_id"] == building_id]
    if rows.empty:
        known = sorted(table["building_id"].unique())
        raise DataError(f"unknown building {building_id!r}; known: {', '.join(known)}")
    anchor = pd.Timestamp(anchor)
    anchor = anchor.tz_localize("UTC") if anchor.tzinfo is None else anchor.tz_convert("UTC")
    if anchor != anchor.floor("h"):
        raise DataError(f"anchor {anchor.isoformat()} is not on the hour")
    rows = rows.set_index("timestamp")
    need = pd.date_range(anchor - pd.Timedelta(hours=window - 1), anchor, freq="h")
    missing = need.difference(rows.index)
    if len(missing):
        raise DataError(
            f"{building_id}: no contiguous {window}-hour history before {anchor.isoformat()}; "
            f"missing {len(missing)} hour(s) from {missing[0].isoformat()} to {missing[-1].isoformat()}"
        )
    hist = rows.loc[need]
    future = rows[TARGET_COLUMN].reindex(pd.date_range(anchor + pd.Timedelta(hours=1), periods=horizon, freq="h"))
    last = hist.iloc[-1]
    return WindowSet(
        hist[DYNAMIC_COLUMNS].to_numpy(dtype=np.float64)[None],
        last[CONTEXT_COLUMNS].to_numpy(dtype=np.float64)[None],
        np.array([float(last[TARGET_COLUMN])]),
        future.to_numpy(dtype=np.float64)[None],
        np.array([anchor.tz_localize(None).to_datetime64()], dtype="datetime64[ns]"),
        np.array([building_id], dtype=object),
    )
