# core/synth.py
"""
Synthetic similarity matrices with known ground truth, plus brute-force reference matchers.

Generation uses numpy's PCG64 bit generator (numpy.random.default_rng). For generate()
the draw order is fixed: Gaussian noise for the whole matrix (skipped when
noise_sigma is 0), then Q drift steps from {-1, 0, +1} with probabilities
{0.1, 0.8, 0.1}, then Q uniform dropout draws.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import toml

from core.exceptions import ConfigurationError
from core.models import (
    ConsistencyResult, GroundTruth, MatchDecision, SicParams, SimilarityMatrix, SynthConfig, TechniqueSet
)
from core.scaling import zscore_rows
from utils.config import Config
from utils.logger import logger


DRIFT_STEPS = np.array([-1, 0, 1])
DRIFT_PROBS = np.array([0.1, 0.8, 0.1])


def _check_shape(config: SynthConfig):
    if config.q_count > config.n_count + config.drift_amp:
        raise ConfigurationError(
            f"{config.q_count} queries cannot follow {config.n_count} references "
            f"with drift amplitude {config.drift_amp}"
        )


def _noise(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    shape = (config.q_count, config.n_count)
    if config.noise_sigma == 0:
        return np.zeros(shape)
    return rng.normal(0.0, config.noise_sigma, size=shape)


def _drift_walk(rng: np.random.Generator, config: SynthConfig) -> np.ndarray:
    steps = rng.choice(DRIFT_STEPS, size=config.q_count, p=DRIFT_PROBS)
    truth = np.empty(config.q_count, dtype=np.int64)
    drift = 0
    for q in range(config.q_count):
        if q > 0:
            drift = int(np.clip(drift + steps[q], -config.drift_amp, config.drift_amp))
        truth[q] = min(max(q + drift, 0), config.n_count - 1)
    return truth


def _plant(values: np.ndarray, truth: np.ndarray, kept: np.ndarray, signal: float) -> np.ndarray:
    queries = np.flatnonzero(kept)
    values[queries, truth[queries]] += signal
    return values


def generate(config: SynthConfig) -> Tuple[SimilarityMatrix, GroundTruth]:
    """One noisy matrix whose true matches follow a drifting diagonal"""
    _check_shape(config)
    rng = np.random.default_rng(config.seed)
    values = _noise(rng, config)
    truth = _drift_walk(rng, config)
    kept = rng.random(config.q_count) >= config.dropout
    _plant(values, truth, kept, config.signal)

    logger.debug(
        f"Generated {config.q_count}x{config.n_count} matrix (seed {config.seed}, "
        f"{int((~kept).sum())} dropped queries)",
        "SYNTH"
    )
    return SimilarityMatrix(values), GroundTruth(tuple(int(c) for c in truth))


def generate_technique_set(config: SynthConfig, count: int,
                           failure_spans: Optional[Sequence[Optional[Tuple[int, int]]]] = None,
                           technique_ids: Optional[Sequence[str]] = None) -> Tuple[TechniqueSet, GroundTruth]:
    """
    Several techniques observing one shared trajectory with independent noise.
    A technique with a failure span [start, end) only drops queries inside it.
    """
    _check_shape(config)
    if count < 1:
        raise ConfigurationError("At least one technique is required")
    if failure_spans is not None and len(failure_spans) != count:
        raise ConfigurationError(f"Expected {count} failure spans, got {len(failure_spans)}")
    technique_ids = list(technique_ids) if technique_ids else [f"t{i}" for i in range(count)]
    if len(technique_ids) != count:
        raise ConfigurationError(f"Expected {count} technique ids, got {len(technique_ids)}")

    seeds = np.random.SeedSequence(config.seed).spawn(count + 1)
    truth = _drift_walk(np.random.default_rng(seeds[0]), config)

    techniques = []
    for i, tid in enumerate(technique_ids):
        rng = np.random.default_rng(seeds[i + 1])
        values = _noise(rng, config)
        dropped = rng.random(config.q_count) < config.dropout
        span = failure_spans[i] if failure_spans is not None else None
        if span is not None:
            inside = np.zeros(config.q_count, dtype=bool)
            inside[max(span[0], 0):max(span[1], 0)] = True
            dropped &= inside
        techniques.append((tid, SimilarityMatrix(_plant(values, truth, ~dropped, config.signal))))

    return TechniqueSet(tuple(techniques)), GroundTruth(tuple(int(c) for c in truth))


def write_config_echo(config: SynthConfig, path) -> None:
    with open(path, 'w') as f:
        toml.dump({'synth': config.model_dump(), 'rng': {'generator': Config.RNG_NAME}}, f)
    logger.info(f"Wrote generator config to {Path(path).name}", "SYNTH")


# =============================================================================
# Brute-force reference matchers (tests only; intended for N <= 256)
# =============================================================================

def oracle_sic(matrix: SimilarityMatrix, q: int, params: SicParams) -> ConsistencyResult:
    """Exhaustive theta over every reference by direct loops"""
    values = matrix.values
    n = matrix.cols
    thetas: List[float] = []
    best_k, best_theta = 0, -np.inf
    for k in range(n):
        total = 0.0
        for f in range(min(params.f, q) + 1):
            lo = max(0, k - f - params.w)
            hi = min(n - 1, k - f + params.w)
            if hi < lo:
                continue
            window_max = -np.inf
            for j in range(lo, hi + 1):
                window_max = max(window_max, float(values[q - f, j]))
            total += window_max
        thetas.append(total)
        if total > best_theta:
            best_k, best_theta = k, total
    return ConsistencyResult(
        query=q,
        match_index=best_k,
        theta=best_theta,
        candidate_indices=np.arange(n),
        candidate_thetas=np.array(thetas),
    )


def oracle_music(techniques: TechniqueSet, q: int, params: SicParams, scale: bool = True) -> MatchDecision:
    """Exhaustive per-technique oracle_sic, then the largest theta (earliest technique on ties)"""
    if len(techniques) == 0:
        raise ConfigurationError("MuSIC needs at least one technique")
    best: Optional[MatchDecision] = None
    for tid, matrix in techniques.techniques:
        view = zscore_rows(matrix) if scale else matrix
        result = oracle_sic(view, q, params)
        if best is None or result.theta > best.theta:
            best = MatchDecision(query=q, technique_id=tid, match_index=result.match_index,
                                 theta=result.theta, confidence=result.theta)
    return best
