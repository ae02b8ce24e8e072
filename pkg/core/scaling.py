# core/scaling.py
"""
Per-row z-score normalization of similarity vectors
"""

import numpy as np

from core.models import SimilarityMatrix
from utils.config import Config


def zscore_row(row: np.ndarray) -> np.ndarray:
    """(row - mean) / population std; zero-spread rows become all zeros"""
    row = np.asarray(row, dtype=np.float64)
    sigma = row.std()
    if sigma < Config.ZERO_SPREAD_TOL:
        return np.zeros_like(row)
    return (row - row.mean()) / sigma


def zscore_rows(matrix: SimilarityMatrix) -> SimilarityMatrix:
    """Normalize every query row independently; the result keeps the input shape"""
    # row by row: must equal zscore_row bit for bit (streaming path)
    scaled = np.vstack([zscore_row(row) for row in matrix.values])
    return SimilarityMatrix(scaled, matrix.orientation)
