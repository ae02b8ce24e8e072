# core/music.py
"""
Per-frame technique selection: run SIC on every technique, keep the globally most consistent match
"""

import time
from collections import Counter
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import ConfigurationError
from core.models import ConfidenceMode, ConsistencyResult, MatchDecision, SicParams, SimilarityMatrix, TechniqueSet
from core.scaling import zscore_rows
from core.sic import StreamingSic, sic_match
from utils.logger import logger


SelectionTrace = List[Tuple[int, str]]


def scaled_views(techniques: TechniqueSet, scale: bool = True) -> Dict[str, SimilarityMatrix]:
    """Per-technique matrices as SIC sees them; z-scored views are computed once per set"""
    if not scale:
        return dict(techniques.techniques)
    cache = techniques._scaled_cache
    for tid, matrix in techniques.techniques:
        if tid not in cache:
            cache[tid] = zscore_rows(matrix)
    return {tid: cache[tid] for tid in techniques.ids}


def _select(query: int, per_technique: Sequence[Tuple[str, ConsistencyResult, float]],
            confidence: ConfidenceMode) -> MatchDecision:
    # strict '>' keeps the earliest technique on exact ties
    best_id, best, best_score = per_technique[0]
    for tid, result, score in per_technique[1:]:
        if result.theta > best.theta:
            best_id, best, best_score = tid, result, score
    return MatchDecision(
        query=query,
        technique_id=best_id,
        match_index=best.match_index,
        theta=best.theta,
        confidence=best.theta if confidence == "theta" else best_score,
    )


def music_match(techniques: TechniqueSet, q: int, params: SicParams, scale: bool = True,
                confidence: ConfidenceMode = "theta") -> MatchDecision:
    """Select, for query q, the technique whose SIC match has the highest theta"""
    if len(techniques) == 0:
        raise ConfigurationError("MuSIC needs at least one technique")
    views = scaled_views(techniques, scale)
    per_technique = []
    for tid in techniques.ids:
        result = sic_match(views[tid], q, params)
        per_technique.append((tid, result, float(views[tid].values[q, result.match_index])))
    return _select(q, per_technique, confidence)


def music_match_all(techniques: TechniqueSet, params: SicParams, scale: bool = True,
                    confidence: ConfidenceMode = "theta") -> Tuple[List[MatchDecision], SelectionTrace]:
    """Batch MuSIC; the trace records which technique delivered each match"""
    if len(techniques) == 0:
        raise ConfigurationError("MuSIC needs at least one technique")
    start_time = time.time()
    rows, _ = techniques.shape
    decisions = [music_match(techniques, q, params, scale, confidence) for q in range(rows)]
    trace = [(d.query, d.technique_id) for d in decisions]

    processing_time = int((time.time() - start_time) * 1000)
    shares = ", ".join(f"{tid}: {share:.1%}" for tid, share in selection_counts(trace, techniques.ids).items())
    logger.info(f"MuSIC matched {rows} queries over {len(techniques)} techniques in {processing_time}ms - {shares}",
                "MUSIC")
    return decisions, trace


def selection_counts(trace: SelectionTrace, technique_ids: Sequence[str]) -> Dict[str, float]:
    """Share of queries each technique was selected for"""
    counts = Counter(tid for _, tid in trace)
    total = len(trace) or 1
    return {tid: counts.get(tid, 0) / total for tid in technique_ids}


def trace_frame(trace: SelectionTrace) -> pd.DataFrame:
    return pd.DataFrame(trace, columns=['query_index', 'technique_id'])


class StreamingMusic:
    """Online MuSIC: one rolling SIC buffer per technique, rows pushed in lockstep"""

    def __init__(self, technique_ids: Sequence[str], params: SicParams, scale: bool = True,
                 confidence: ConfidenceMode = "theta"):
        if not technique_ids:
            raise ConfigurationError("MuSIC needs at least one technique")
        self.technique_ids = list(technique_ids)
        self.confidence = confidence
        self._streams = {tid: StreamingSic(params, scale) for tid in self.technique_ids}

    def push(self, rows: Dict[str, np.ndarray]) -> MatchDecision:
        per_technique = []
        for tid in self.technique_ids:
            stream = self._streams[tid]
            result = stream.push(rows[tid])
            per_technique.append((tid, result, float(stream.latest_row[result.match_index])))
        return _select(per_technique[0][1].query, per_technique, self.confidence)
