# core/simdata.py
"""
Similarity matrix and ground-truth file formats: CSV, the SIMM binary layout, ground-truth CSV
"""

import re
import struct
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.exceptions import CapacityError, EvaluationError, FormatError, LengthError, ParseError
from core.models import GroundTruth, Orientation, SimilarityMatrix, TechniqueInput, TechniqueSet
from utils.config import Config
from utils.logger import logger


SIMM_HEADER = struct.Struct('<4sII')
BINARY_SUFFIXES = {'.simm', '.bin'}


# =============================================================================
# CSV matrices
# =============================================================================

FIELD_COUNT_ERROR = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def _fields(count: int) -> str:
    return f"{count} field" if count == 1 else f"{count} fields"


def _csv_chunks(path: Path) -> Iterator[pd.DataFrame]:
    """Raw string fields; blank lines come through as all-NaN rows, short rows NaN-padded"""
    try:
        with pd.read_csv(path, header=None, dtype=str, na_filter=False, skip_blank_lines=False,
                         chunksize=Config.CSV_CHUNK_ROWS) as reader:
            yield from reader
    except pd.errors.EmptyDataError:
        raise FormatError(f"{path} is empty")
    except pd.errors.ParserError as e:
        match = FIELD_COUNT_ERROR.search(str(e))
        if match is None:
            raise FormatError(f"{path}: {e}")
        expected, line, saw = (int(g) for g in match.groups())
        raise FormatError(f"row {line} has {_fields(saw)}, expected {expected}")


def _parse_csv_row(fields: np.ndarray, row_number: int) -> np.ndarray:
    try:
        row = fields.astype(np.float64)
    except ValueError:
        bad = next(v for v in fields if not _is_number(v))
        raise ParseError(f"row {row_number}: '{bad.strip()}' is not a number")
    if not np.all(np.isfinite(row)):
        raise ParseError(f"row {row_number}: non-finite value")
    return row


def _is_number(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def _iter_csv_rows(path: Path) -> Iterator[np.ndarray]:
    pending_blank = False
    row_number = 0
    for chunk in _csv_chunks(path):
        fields = chunk.to_numpy(dtype=object)
        counts = chunk.notna().sum(axis=1).to_numpy()
        for i, count in enumerate(counts):
            if count == 0:
                pending_blank = True
                continue
            if pending_blank:
                raise FormatError(f"blank line before row {row_number + 1}")
            row_number += 1
            if count != fields.shape[1]:
                raise FormatError(f"row {row_number} has {_fields(count)}, expected {fields.shape[1]}")
            yield _parse_csv_row(fields[i], row_number)
    if row_number == 0:
        raise FormatError(f"{path} is empty")


def load_matrix_csv(path, orientation: Orientation = "similarity") -> SimilarityMatrix:
    """Load a comma-separated matrix, one query per line"""
    path = Path(path)
    rows = list(_iter_csv_rows(path))
    matrix = SimilarityMatrix(np.vstack(rows), orientation)
    logger.info(f"Loaded {matrix.rows}x{matrix.cols} matrix from {path.name}", "IO")
    return matrix


def save_matrix_csv(matrix: SimilarityMatrix, path) -> None:
    """Write a matrix as CSV using the shortest round-trippable decimal form"""
    path = Path(path)
    with open(path, 'w') as f:
        for row in matrix.values:
            f.write(','.join(repr(float(v)) for v in row))
            f.write('\n')
    logger.info(f"Wrote {matrix.rows}x{matrix.cols} matrix to {path.name}", "IO")


# =============================================================================
# SIMM binary matrices
# =============================================================================

def _read_simm_header(f, path: Path):
    header = f.read(SIMM_HEADER.size)
    if len(header) < 4 or header[:4] != Config.SIMM_MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(header) < SIMM_HEADER.size:
        raise LengthError(f"{path}: truncated header ({len(header)} bytes)")
    _, rows, cols = SIMM_HEADER.unpack(header)
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: empty matrix ({rows}x{cols})")
    if rows * cols > Config.MAX_MATRIX_ELEMENTS:
        raise CapacityError(f"{path}: {rows}x{cols} exceeds {Config.MAX_MATRIX_ELEMENTS} elements")
    return rows, cols


def load_matrix_bin(path, orientation: Orientation = "similarity") -> SimilarityMatrix:
    """Load a SIMM file: magic, u32 rows, u32 cols, row-major little-endian float64"""
    path = Path(path)
    with open(path, 'rb') as f:
        rows, cols = _read_simm_header(f, path)
        expected = rows * cols * 8
        payload = f.read(expected + 1)
    if len(payload) < expected:
        raise LengthError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise FormatError(f"{path}: trailing bytes after {rows}x{cols} payload")
    values = np.frombuffer(payload, dtype='<f8').reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        raise ParseError(f"{path}: non-finite value in payload")
    matrix = SimilarityMatrix(values, orientation)
    logger.info(f"Loaded {rows}x{cols} matrix from {path.name}", "IO")
    return matrix


def save_matrix_bin(matrix: SimilarityMatrix, path) -> None:
    """Write the SIMM layout exactly"""
    path = Path(path)
    with open(path, 'wb') as f:
        f.write(SIMM_HEADER.pack(Config.SIMM_MAGIC, matrix.rows, matrix.cols))
        f.write(np.ascontiguousarray(matrix.values, dtype='<f8').tobytes())
    logger.info(f"Wrote {matrix.rows}x{matrix.cols} matrix to {path.name}", "IO")


def _iter_bin_rows(path: Path) -> Iterator[np.ndarray]:
    """Row-at-a-time SIMM reader with the same payload checks as load_matrix_bin"""
    with open(path, 'rb') as f:
        rows, cols = _read_simm_header(f, path)
        for q in range(rows):
            chunk = f.read(cols * 8)
            if len(chunk) < cols * 8:
                raise LengthError(f"{path}: payload truncated in row {q + 1}")
            row = np.frombuffer(chunk, dtype='<f8').astype(np.float64)
            if not np.all(np.isfinite(row)):
                raise ParseError(f"{path}: non-finite value in payload (row {q + 1})")
            yield row
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after {rows}x{cols} payload")


# =============================================================================
# Format dispatch
# =============================================================================

def is_binary_path(path) -> bool:
    return Path(path).suffix.lower() in BINARY_SUFFIXES


def load_matrix(path, orientation: Orientation = "similarity") -> SimilarityMatrix:
    if is_binary_path(path):
        return load_matrix_bin(path, orientation)
    return load_matrix_csv(path, orientation)


def save_matrix(matrix: SimilarityMatrix, path) -> None:
    if is_binary_path(path):
        save_matrix_bin(matrix, path)
    else:
        save_matrix_csv(matrix, path)


def iter_matrix_rows(path) -> Iterator[np.ndarray]:
    """Yield one query row at a time without loading the full matrix"""
    path = Path(path)
    if is_binary_path(path):
        return _iter_bin_rows(path)
    return _iter_csv_rows(path)


def as_similarity(matrix: SimilarityMatrix) -> SimilarityMatrix:
    """Negate distance matrices so that larger is better; similarity input is returned as is"""
    if matrix.orientation == "distance":
        return SimilarityMatrix(-matrix.values, "similarity")
    return matrix


def load_technique_set(inputs: Sequence[TechniqueInput]) -> TechniqueSet:
    """Load every technique file, converting distance techniques to similarity"""
    techniques = []
    for technique in inputs:
        orientation = "distance" if technique.distance else "similarity"
        matrix = as_similarity(load_matrix(technique.path, orientation))
        techniques.append((technique.technique_id, matrix))
    return TechniqueSet(tuple(techniques))


# =============================================================================
# Ground truth
# =============================================================================

def load_ground_truth(path, allowance: int, query_count: Optional[int] = None) -> GroundTruth:
    """
    Load "query_index,ref_index" lines. Unlisted queries get no entry.
    Reference indices are range-checked at evaluation time, not here. Query indices past
    query_count mean the ground truth does not fit the run and raise EvaluationError.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, comment='#')
    except pd.errors.EmptyDataError:
        logger.warning(f"Ground truth file {path.name} is empty", "IO")
        return GroundTruth(tuple([None] * (query_count or 0)), allowance)

    if df.shape[1] != 2:
        raise FormatError(f"{path}: expected 2 columns (query_index,ref_index), found {df.shape[1]}")
    if str(df.iloc[0, 0]).strip().lower() == 'query_index':
        df = df.iloc[1:]

    try:
        pairs = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors='raise'))
    except (ValueError, AttributeError) as e:
        raise ParseError(f"{path}: {e}")
    if pairs.isna().any().any() or not np.all(np.mod(pairs.values, 1) == 0):
        raise ParseError(f"{path}: indices must be integers")

    queries = pairs.iloc[:, 0].astype(np.int64).tolist()
    refs = pairs.iloc[:, 1].astype(np.int64).tolist()

    seen = set()
    for q in queries:
        if q in seen:
            raise FormatError(f"{path}: duplicate query index {q}")
        if q < 0:
            raise FormatError(f"{path}: negative query index {q}")
        if query_count is not None and q >= query_count:
            raise EvaluationError(f"{path}: query index {q} outside [0, {query_count})")
        seen.add(q)

    length = query_count if query_count is not None else (max(queries) + 1 if queries else 0)
    entries: List[Optional[int]] = [None] * length
    for q, c in zip(queries, refs):
        entries[q] = c

    logger.info(f"Loaded ground truth for {len(queries)} queries (allowance {allowance})", "IO")
    return GroundTruth(tuple(entries), allowance)


def save_ground_truth(gt: GroundTruth, path) -> None:
    labelled = gt.labelled_queries()
    df = pd.DataFrame({
        'query_index': labelled,
        'ref_index': [gt.entries[q] for q in labelled],
    })
    df.to_csv(path, header=False, index=False)
    logger.info(f"Wrote ground truth for {len(labelled)} queries to {Path(path).name}", "IO")
