# core/descriptor.py
"""
Built-in global descriptor: area-averaged thumbnail, z-scored per patch block.
Images are read from 8-bit binary PGM (P5) files.
"""

import time
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from core.exceptions import ConfigurationError, FormatError, LengthError, ParseError
from core.models import DescriptorParams, GrayImage, PatchDescriptor, SimilarityMatrix
from utils.config import Config
from utils.logger import logger


PGM_MAGIC = b"P5"
PGM_MAXVAL = 255


def _header_tokens(data: bytes, path) -> Tuple[List[bytes], int]:
    """Magic, width, height and maxval, plus the offset of the pixel data"""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise LengthError(f"{path}: truncated PGM header")
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing separator after PGM header")
    return tokens, pos + 1


def read_pgm(path) -> GrayImage:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"Cannot read image {path}: {e}")

    tokens, offset = _header_tokens(data, path)
    if tokens[0] != PGM_MAGIC:
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError(f"{path}: non-numeric PGM header field")
    if maxval != PGM_MAXVAL:
        raise FormatError(f"{path}: maxval {maxval} unsupported, expected {PGM_MAXVAL}")

    expected = width * height
    raster = data[offset:]
    if len(raster) < expected:
        raise LengthError(f"{path}: {len(raster)} pixel bytes, expected {expected}")
    pixels = np.frombuffer(raster[:expected], dtype=np.uint8).reshape(height, width)
    try:
        return GrayImage(width, height, pixels.copy())
    except ConfigurationError as e:
        raise FormatError(f"{path}: {e}")


def write_pgm(img: GrayImage, path) -> None:
    header = f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def load_image_dir(path) -> List[GrayImage]:
    """Every *.pgm file of a directory, in lexicographic filename order"""
    directory = Path(path)
    if not directory.is_dir():
        raise ConfigurationError(f"Image directory not found: {path}")
    files = sorted(directory.glob("*.pgm"), key=lambda p: p.name)
    if not files:
        raise ConfigurationError(f"No .pgm files in {path}")
    logger.debug(f"Loading {len(files)} images from {directory}", "DESCRIPTOR")
    return [read_pgm(f) for f in files]


def _overlap_weights(size_in: int, size_out: int) -> np.ndarray:
    """size_out x size_in averaging weights from exact interval overlap"""
    scale = size_in / size_out
    lo = np.arange(size_out)[:, None] * scale
    hi = lo + scale
    pix = np.arange(size_in)[None, :]
    overlap = np.clip(np.minimum(hi, pix + 1) - np.maximum(lo, pix), 0.0, None)
    return overlap / scale


def _normalize_blocks(grid: np.ndarray, patch: int) -> np.ndarray:
    h, w = grid.shape
    blocks = grid.reshape(h // patch, patch, w // patch, patch)
    mean = blocks.mean(axis=(1, 3), keepdims=True)
    std = blocks.std(axis=(1, 3), keepdims=True)
    flat = std < Config.ZERO_SPREAD_TOL
    normalized = np.where(flat, 0.0, (blocks - mean) / np.where(flat, 1.0, std))
    return normalized.reshape(h, w)


def describe(img: GrayImage, grid_w: int = Config.DEFAULT_GRID_W, grid_h: int = Config.DEFAULT_GRID_H,
             patch: int = Config.DEFAULT_PATCH) -> PatchDescriptor:
    if grid_w < 1 or grid_h < 1 or patch < 1:
        raise ConfigurationError(f"Grid {grid_w}x{grid_h} and patch {patch} must be positive")
    if grid_w % patch or grid_h % patch:
        raise ConfigurationError(f"Grid {grid_w}x{grid_h} is not divisible by patch size {patch}")

    pixels = img.pixels.astype(np.float64)
    grid = _overlap_weights(img.height, grid_h) @ pixels @ _overlap_weights(img.width, grid_w).T
    return PatchDescriptor(grid_w, grid_h, _normalize_blocks(grid, patch))


def similarity_matrix(query_imgs: Sequence[GrayImage], ref_imgs: Sequence[GrayImage],
                      params: DescriptorParams = DescriptorParams()) -> SimilarityMatrix:
    """Negated mean absolute descriptor difference for every (query, reference) pair"""
    if not query_imgs or not ref_imgs:
        raise ConfigurationError("At least one query and one reference image are required")
    start_time = time.time()

    def stack(images):
        return np.stack([describe(img, params.grid_w, params.grid_h, params.patch).values.ravel()
                         for img in images])

    queries = stack(query_imgs)
    refs = stack(ref_imgs)
    sad = np.vstack([np.abs(refs - row).mean(axis=1) for row in queries])

    processing_time = int((time.time() - start_time) * 1000)
    logger.info(
        f"Described {len(query_imgs)} queries and {len(ref_imgs)} references "
        f"({params.grid_w}x{params.grid_h}, patch {params.patch}) in {processing_time}ms",
        "DESCRIPTOR"
    )
    return SimilarityMatrix(-sad, "similarity")
