# core/sic.py
"""
Sequential Information Consistency matcher.

For the current query q, the K most similar references are kept as candidates.
Each candidate k is scored by walking back F queries along the constant-velocity
diagonal and summing the best score inside a window of half-width W:

    theta_k = sum_{f=0}^{min(F, q)} max(S[q-f, k-f-W : k-f+W])

The window is clamped to [0, N-1]; a window lying fully left of the map adds 0.
The candidate with the highest theta is the match (lowest reference index on ties).
Work after candidate selection is bounded by K*(F+1)*(2W+1) reads regardless of N.
"""

import time
from collections import deque
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import ConfigurationError, FormatError
from core.models import ConsistencyResult, SicParams, SimilarityMatrix
from core.scaling import zscore_row
from utils.logger import logger


def top_k_candidates(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the min(k, N) largest values, descending, ties by ascending index"""
    row = np.asarray(row, dtype=np.float64)
    n = row.size
    k = min(int(k), n)
    if k < n:
        kth_value = np.partition(row, n - k)[n - k]
        above = np.flatnonzero(row > kth_value)
        ties = np.flatnonzero(row == kth_value)[:k - above.size]
        indices = np.concatenate([above, ties])
    else:
        indices = np.arange(n)
    order = np.lexsort((indices, -row[indices]))
    return indices[order]


def candidate_thetas(rows: Sequence[np.ndarray], candidates: np.ndarray, w: int) -> Tuple[np.ndarray, int]:
    """
    Consistency of each candidate given rows[f] = score row of query q-f.
    Returns the theta vector and the number of in-range score reads.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    n = rows[0].size
    offsets = np.arange(-w, w + 1)
    thetas = np.zeros(candidates.size, dtype=np.float64)
    reads = 0

    for f, row in enumerate(rows):
        cols = (candidates - f)[:, None] + offsets
        valid = (cols >= 0) & (cols < n)
        window = np.where(valid, row[np.clip(cols, 0, n - 1)], -np.inf)
        best = window.max(axis=1)
        thetas += np.where(np.isfinite(best), best, 0.0)
        reads += int(valid.sum())

    return thetas, reads


def _history(values: np.ndarray, q: int, f: int) -> List[np.ndarray]:
    return [values[q - i] for i in range(min(f, q) + 1)]


def _check_query(matrix: SimilarityMatrix, q: int):
    if not 0 <= q < matrix.rows:
        raise ConfigurationError(f"Query {q} outside [0, {matrix.rows})")


def theta(matrix: SimilarityMatrix, q: int, k: int, params: SicParams) -> float:
    """Consistency of a single reference k for query q"""
    _check_query(matrix, q)
    if not 0 <= k < matrix.cols:
        raise ConfigurationError(f"Reference {k} outside [0, {matrix.cols})")
    thetas, _ = candidate_thetas(_history(matrix.values, q, params.f), np.array([k]), params.w)
    return float(thetas[0])


def match_from_history(rows: Sequence[np.ndarray], q: int, params: SicParams) -> ConsistencyResult:
    """Candidate selection on rows[0] then theta argmax over the candidates"""
    candidates = top_k_candidates(rows[0], params.k)
    thetas, reads = candidate_thetas(rows, candidates, params.w)
    best = thetas.max()
    match_index = int(candidates[thetas == best].min())
    return ConsistencyResult(
        query=q,
        match_index=match_index,
        theta=float(best),
        candidate_indices=candidates,
        candidate_thetas=thetas,
        reads=reads,
    )


def sic_match(matrix: SimilarityMatrix, q: int, params: SicParams) -> ConsistencyResult:
    """Match query q of an already scaled matrix"""
    _check_query(matrix, q)
    return match_from_history(_history(matrix.values, q, params.f), q, params)


def sic_match_all(matrix: SimilarityMatrix, params: SicParams) -> List[ConsistencyResult]:
    """Batch form of sic_match over every query row"""
    start_time = time.time()
    results = [sic_match(matrix, q, params) for q in range(matrix.rows)]
    processing_time = int((time.time() - start_time) * 1000)
    logger.info(
        f"SIC matched {matrix.rows} queries against {matrix.cols} references in {processing_time}ms "
        f"(K={min(params.k, matrix.cols)}, F={params.f}, W={params.w})",
        "SIC"
    )
    return results


def theta_table_frame(results: Sequence[ConsistencyResult]) -> pd.DataFrame:
    """Q x K table of 'ref:theta' cells, candidates in descending score order"""
    width = max((r.candidate_indices.size for r in results), default=0)
    records = []
    for result in results:
        cells = [f"{k}:{t!r}" for k, t in result.candidates]
        cells += [''] * (width - len(cells))
        records.append([result.query] + cells)
    columns = ['query_index'] + [f"candidate_{i}" for i in range(width)]
    return pd.DataFrame(records, columns=columns)


class StreamingSic:
    """
    Online SIC over rows appended one at a time.
    Only the last F+1 scaled rows stay resident.
    """

    def __init__(self, params: SicParams, scale: bool = True):
        self.params = params
        self.scale = scale
        self._rows = deque(maxlen=params.f + 1)
        self.query = -1

    @property
    def resident_rows(self) -> int:
        return len(self._rows)

    @property
    def latest_row(self) -> np.ndarray:
        return self._rows[0]

    def push(self, raw_row: np.ndarray) -> ConsistencyResult:
        row = zscore_row(raw_row) if self.scale else np.asarray(raw_row, dtype=np.float64)
        if self._rows and row.size != self._rows[0].size:
            raise FormatError(f"Row of length {row.size} after rows of length {self._rows[0].size}")
        self._rows.appendleft(row)
        self.query += 1
        return match_from_history(list(self._rows), self.query, self.params)
