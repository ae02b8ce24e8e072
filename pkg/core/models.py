# core/models.py
"""
Data models for similarity matrices, matcher parameters, decisions and evaluation reports
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.exceptions import ConfigurationError
from utils.config import Config


Orientation = Literal["similarity", "distance"]
MatchMode = Literal["sic", "music", "seqslam", "argmax"]
ConfidenceMode = Literal["theta", "score"]

ModelT = TypeVar("ModelT", bound=BaseModel)


def validated(model_cls: Type[ModelT], **values) -> ModelT:
    """Build a pydantic model, reporting bad values as ConfigurationError"""
    try:
        return model_cls(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or model_cls.__name__}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigurationError(f"Invalid {model_cls.__name__}: {problems}")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# =============================================================================
# Numeric containers
# =============================================================================

@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Q x N query-vs-reference scores, rows in observation order"""
    values: np.ndarray
    orientation: Orientation = "similarity"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ConfigurationError(f"Similarity matrix must be 2-D and non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("Similarity matrix contains NaN or infinite values")
        if self.orientation not in ("similarity", "distance"):
            raise ConfigurationError(f"Unknown orientation '{self.orientation}'")
        object.__setattr__(self, 'values', _readonly(values))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class GroundTruth:
    """Per-query correct reference (None when unknown) plus the frame allowance"""
    entries: Tuple[Optional[int], ...]
    allowance: int = 0

    def __post_init__(self):
        if self.allowance < 0:
            raise ConfigurationError(f"Allowance must be non-negative, got {self.allowance}")
        entries = tuple(None if e is None else int(e) for e in self.entries)
        object.__setattr__(self, 'entries', entries)

    def __len__(self) -> int:
        return len(self.entries)

    def reference(self, query: int) -> Optional[int]:
        if 0 <= query < len(self.entries):
            return self.entries[query]
        return None

    def is_correct(self, query: int, prediction: int) -> bool:
        correct = self.reference(query)
        return correct is not None and abs(prediction - correct) <= self.allowance

    def labelled_queries(self) -> List[int]:
        return [q for q, c in enumerate(self.entries) if c is not None]

    def with_allowance(self, allowance: int) -> "GroundTruth":
        return GroundTruth(self.entries, allowance)


@dataclass(frozen=True, eq=False)
class TechniqueSet:
    """Ordered techniques sharing one (Q, N) shape; order breaks selection ties"""
    techniques: Tuple[Tuple[str, SimilarityMatrix], ...]
    _scaled_cache: Dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        techniques = tuple((str(tid), matrix) for tid, matrix in self.techniques)
        ids = [tid for tid, _ in techniques]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"Duplicate technique ids: {ids}")
        shapes = {matrix.shape for _, matrix in techniques}
        if len(shapes) > 1:
            raise ConfigurationError(f"Technique matrices disagree on shape: {sorted(shapes)}")
        for tid, matrix in techniques:
            if matrix.orientation != "similarity":
                raise ConfigurationError(
                    f"Technique '{tid}' has {matrix.orientation} orientation; convert with as_similarity first"
                )
        object.__setattr__(self, 'techniques', techniques)

    def __len__(self) -> int:
        return len(self.techniques)

    @property
    def ids(self) -> List[str]:
        return [tid for tid, _ in self.techniques]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.techniques[0][1].shape if self.techniques else (0, 0)

    def matrix(self, technique_id: str) -> SimilarityMatrix:
        for tid, matrix in self.techniques:
            if tid == technique_id:
                return matrix
        raise KeyError(technique_id)


@dataclass(frozen=True, eq=False)
class ConsistencyResult:
    """Per-query matcher output: chosen reference, its theta and every evaluated candidate"""
    query: int
    match_index: int
    theta: float
    candidate_indices: np.ndarray
    candidate_thetas: np.ndarray
    reads: int = 0

    @property
    def candidates(self) -> List[Tuple[int, float]]:
        return [(int(k), float(t)) for k, t in zip(self.candidate_indices, self.candidate_thetas)]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit luminance image, row-major"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.shape != (self.height, self.width):
            raise ConfigurationError(
                f"Pixel array shape {pixels.shape} does not match {self.height}x{self.width}"
            )
        if self.width < 8 or self.height < 8:
            raise ConfigurationError(f"Images must be at least 8x8, got {self.width}x{self.height}")
        object.__setattr__(self, 'pixels', _readonly(pixels.astype(np.uint8)))


@dataclass(frozen=True, eq=False)
class PatchDescriptor:
    """Downsampled, patch-normalized thumbnail"""
    grid_w: int
    grid_h: int
    values: np.ndarray


# =============================================================================
# Parameters
# =============================================================================

class SicParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(Config.DEFAULT_K, ge=1, description="Top candidates evaluated per query")
    f: int = Field(Config.DEFAULT_F, ge=0, description="Past queries in the consistency sum")
    w: int = Field(Config.DEFAULT_W, ge=0, description="Half-window in reference frames")


class SeqParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    ds: int = Field(Config.DEFAULT_DS, ge=1, description="Trajectory length in frames")
    v_min: float = Field(Config.DEFAULT_VMIN, gt=0, description="Minimum velocity")
    v_max: float = Field(Config.DEFAULT_VMAX, gt=0, description="Maximum velocity")
    v_step: float = Field(Config.DEFAULT_VSTEP, gt=0, description="Velocity increment")
    r_window: int = Field(Config.DEFAULT_RWINDOW, ge=1, description="Contrast enhancement half-width")

    @model_validator(mode='after')
    def _check_velocity_bounds(self):
        if self.v_min > self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must not exceed v_max ({self.v_max})")
        return self


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    q_count: int = Field(..., ge=1, description="Query frames")
    n_count: int = Field(..., ge=1, description="Reference places")
    signal: float = Field(1.0, description="Score boost at the true match")
    noise_sigma: float = Field(0.5, ge=0, description="Gaussian noise standard deviation")
    dropout: float = Field(0.0, ge=0, le=1, description="Probability the true-match boost is omitted")
    drift_amp: int = Field(0, ge=0, description="Maximum |offset| of the true match from the diagonal")
    seed: int = Field(0, ge=0, description="PCG64 seed")


class DescriptorParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid_w: int = Field(Config.DEFAULT_GRID_W, ge=1)
    grid_h: int = Field(Config.DEFAULT_GRID_H, ge=1)
    patch: int = Field(Config.DEFAULT_PATCH, ge=1)


# =============================================================================
# Records
# =============================================================================

class MatchDecision(BaseModel):
    query: int
    technique_id: str
    match_index: int
    theta: float
    confidence: float


class PRPoint(BaseModel):
    threshold: float
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    tp: int
    fp: int
    fn: int


class TimingStats(BaseModel):
    frames: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    max_ms: float


class EvalReport(BaseModel):
    pr_points: List[PRPoint]
    auc: float = Field(..., ge=0, le=1)
    ep: float = Field(..., ge=0, le=1)
    p_r0: float = Field(..., ge=0, le=1)
    r_p100: float = Field(..., ge=0, le=1)
    top1_accuracy: float = Field(..., ge=0, le=1)
    evaluated_queries: int
    allowance: int
    timing: Optional[TimingStats] = None


class BenchRow(BaseModel):
    matcher: str
    stage: str
    map_size: int
    ms_per_frame: float


class TechniqueInput(BaseModel):
    technique_id: str = Field(..., min_length=1)
    path: str
    distance: bool = False

    @classmethod
    def parse(cls, text: str) -> "TechniqueInput":
        """Parse 'id=path[:distance]'"""
        if '=' not in text:
            raise ConfigurationError(f"Technique must be given as id=path[:distance], got '{text}'")
        technique_id, path = text.split('=', 1)
        distance = False
        if path.endswith(':distance'):
            path = path[:-len(':distance')]
            distance = True
        return validated(cls, technique_id=technique_id.strip(), path=path, distance=distance)


class RunConfig(BaseModel):
    techniques: List[TechniqueInput]
    mode: MatchMode = "music"
    sic: SicParams = SicParams()
    seq: SeqParams = SeqParams()
    allowance: int = Field(Config.DEFAULT_ALLOWANCE, ge=0)
    gt_path: Optional[str] = None
    out_dir: str = "."
    stream: bool = False
    scale: bool = True
    confidence: ConfidenceMode = "theta"
    svg: bool = False
    seed: int = 0

    @field_validator('techniques')
    @classmethod
    def _check_paths(cls, techniques: List[TechniqueInput]):
        for technique in techniques:
            if not Path(technique.path).exists():
                raise ValueError(f"Technique file not found: {technique.path}")
        ids = [t.technique_id for t in techniques]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate technique ids: {ids}")
        return techniques

    @model_validator(mode='after')
    def _check_mode(self):
        if self.mode == "music":
            if len(self.techniques) < 1:
                raise ValueError("music mode needs at least one technique")
        elif len(self.techniques) != 1:
            raise ValueError(f"{self.mode} mode needs exactly one technique, got {len(self.techniques)}")
        if self.gt_path and not Path(self.gt_path).exists():
            raise ValueError(f"Ground truth file not found: {self.gt_path}")
        return self


# =============================================================================
# API payloads
# =============================================================================

class TechniquePayload(BaseModel):
    technique_id: str = Field(..., min_length=1)
    values: List[List[float]] = Field(..., min_length=1, description="Q rows of N scores")
    distance: bool = False


class MatchRequest(BaseModel):
    techniques: List[TechniquePayload] = Field(..., min_length=1)
    mode: MatchMode = "music"
    sic: SicParams = SicParams()
    seq: SeqParams = SeqParams()
    scale: bool = True
    confidence: ConfidenceMode = "theta"


class MatchResponse(BaseModel):
    decisions: List[MatchDecision]
    trace: Optional[List[Tuple[int, str]]] = None
    processing_stats: Dict


class EvaluateRequest(BaseModel):
    decisions: List[MatchDecision] = Field(..., min_length=1)
    ground_truth: List[Optional[int]] = Field(..., description="Reference index per query, null when unlabelled")
    allowance: int = Field(Config.DEFAULT_ALLOWANCE, ge=0)
    n_refs: Optional[int] = Field(None, ge=1)


class ServiceStatus(BaseModel):
    api_version: str
    timestamp: str
    modes: List[str]
    defaults: Dict
    settings: Dict
    recent_logs: List[Dict] = []
