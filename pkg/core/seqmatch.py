# core/seqmatch.py
"""
SeqSLAM-style baseline: local contrast enhancement of the difference matrix followed by a
constant-velocity trajectory search ending at the current query. Also hosts the
single-frame argmax baseline.
"""

import time
from collections import deque
from typing import List, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import ConfigurationError, FormatError
from core.models import ConsistencyResult, SeqParams, SimilarityMatrix
from utils.config import Config
from utils.logger import logger


def velocities(params: SeqParams) -> np.ndarray:
    """v_min, v_min + v_step, ... up to v_max inclusive"""
    count = int(np.floor((params.v_max - params.v_min) / params.v_step + 1e-9)) + 1
    return params.v_min + params.v_step * np.arange(count)


def enhance_row(diff_row: np.ndarray, r_window: int) -> np.ndarray:
    """(D - local mean) / local std over +/- r_window columns; flat neighbourhoods give 0"""
    diff_row = np.asarray(diff_row, dtype=np.float64)
    padded = np.pad(diff_row, r_window, constant_values=np.nan)
    windows = sliding_window_view(padded, 2 * r_window + 1)
    local_mean = np.nanmean(windows, axis=1)
    local_std = np.nanstd(windows, axis=1)
    flat = local_std < Config.ZERO_SPREAD_TOL
    enhanced = (diff_row - local_mean) / np.where(flat, 1.0, local_std)
    enhanced[flat] = 0.0
    return enhanced


def _as_difference(values: np.ndarray, orientation: str) -> np.ndarray:
    return -values if orientation == "similarity" else values


def contrast_enhance(matrix: SimilarityMatrix, r_window: int) -> SimilarityMatrix:
    """Difference-orientation matrix with every row locally normalized"""
    diff = _as_difference(matrix.values, matrix.orientation)
    enhanced = np.vstack([enhance_row(row, r_window) for row in diff])
    return SimilarityMatrix(enhanced, "distance")


def search_trajectories(rows: Sequence[np.ndarray], q: int, params: SeqParams) -> ConsistencyResult:
    """
    rows[f] is the enhanced difference row of query q-f (f < ds).
    Every reference r is scored by its best straight trajectory ending at r.
    """
    history = np.vstack(rows)
    depth, n = history.shape
    f = np.arange(depth)
    refs = np.arange(n)
    best = np.full(n, np.inf)
    vels = velocities(params)

    for v in vels:
        cols = np.floor(refs[:, None] - v * f[None, :] + 0.5).astype(np.int64)
        np.clip(cols, 0, n - 1, out=cols)
        np.minimum(best, history[f[None, :], cols].sum(axis=1), out=best)

    match_index = int(np.argmin(best))
    score = float(best[match_index])
    return ConsistencyResult(
        query=q,
        match_index=match_index,
        theta=-score,
        candidate_indices=np.array([match_index]),
        candidate_thetas=np.array([-score]),
        reads=n * len(vels) * depth,
    )


def seq_match(matrix: SimilarityMatrix, q: int, params: SeqParams) -> ConsistencyResult:
    """Trajectory search for query q over an enhanced difference matrix (lower is better)"""
    if not 0 <= q < matrix.rows:
        raise ConfigurationError(f"Query {q} outside [0, {matrix.rows})")
    depth = min(params.ds - 1, q) + 1
    return search_trajectories([matrix.values[q - i] for i in range(depth)], q, params)


def seq_match_all(matrix: SimilarityMatrix, params: SeqParams) -> List[ConsistencyResult]:
    """Enhance then search every query"""
    start_time = time.time()
    enhanced = contrast_enhance(matrix, params.r_window)
    results = [seq_match(enhanced, q, params) for q in range(matrix.rows)]
    processing_time = int((time.time() - start_time) * 1000)
    logger.info(
        f"SeqSLAM-style search matched {matrix.rows} queries against {matrix.cols} references "
        f"in {processing_time}ms (ds={params.ds}, {len(velocities(params))} velocities)",
        "SEQ"
    )
    return results


class StreamingSeq:
    """Online trajectory search keeping the last ds enhanced rows"""

    def __init__(self, params: SeqParams, orientation: str = "similarity"):
        self.params = params
        self.orientation = orientation
        self._rows = deque(maxlen=params.ds)
        self.query = -1

    @property
    def resident_rows(self) -> int:
        return len(self._rows)

    def push(self, raw_row: np.ndarray) -> ConsistencyResult:
        diff = _as_difference(np.asarray(raw_row, dtype=np.float64), self.orientation)
        if self._rows and diff.size != self._rows[0].size:
            raise FormatError(f"Row of length {diff.size} after rows of length {self._rows[0].size}")
        self._rows.appendleft(enhance_row(diff, self.params.r_window))
        self.query += 1
        return search_trajectories(list(self._rows), self.query, self.params)


# =============================================================================
# Single-frame baseline
# =============================================================================

def argmax_row(row: np.ndarray, q: int) -> ConsistencyResult:
    row = np.asarray(row, dtype=np.float64)
    match_index = int(np.argmax(row))
    return ConsistencyResult(
        query=q,
        match_index=match_index,
        theta=float(row[match_index]),
        candidate_indices=np.array([match_index]),
        candidate_thetas=np.array([row[match_index]]),
        reads=row.size,
    )


def argmax_match(matrix: SimilarityMatrix, q: int) -> ConsistencyResult:
    """Plain nearest neighbour on one similarity row"""
    if not 0 <= q < matrix.rows:
        raise ConfigurationError(f"Query {q} outside [0, {matrix.rows})")
    return argmax_row(matrix.values[q], q)


def argmax_match_all(matrix: SimilarityMatrix) -> List[ConsistencyResult]:
    return [argmax_match(matrix, q) for q in range(matrix.rows)]
