# api/main.py
"""
FastAPI server exposing batch matching and evaluation over HTTP
"""

import sys
import tempfile
from datetime import datetime
from pathlib import Path
from typing import List

from fastapi import FastAPI, File, Form, HTTPException, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

# Add parent directory to path
current_file = Path(__file__).resolve()
parent_dir = current_file.parent.parent
if str(parent_dir) not in sys.path:
    sys.path.insert(0, str(parent_dir))

from core.exceptions import EvaluationError, VPRError
from core.metrics import evaluate
from core.models import (
    EvalReport, EvaluateRequest, GroundTruth, MatchRequest, MatchResponse, SicParams, ServiceStatus,
    SimilarityMatrix, TechniqueSet, validated
)
from core.services import MatchingService
from core.simdata import as_similarity, is_binary_path, load_matrix
from utils.config import Config, load_settings
from utils.logger import logger


MAX_UPLOAD_FILES = 10
UPLOAD_SUFFIXES = ('.csv', '.simm', '.bin')

app = FastAPI(
    title="Sequential Place Matching API",
    description="SIC, MuSIC, SeqSLAM-style and argmax matching over similarity matrices, with PR evaluation",
    version=Config.API_VERSION,
    docs_url="/docs",
    redoc_url="/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

matching_service = MatchingService(load_settings(env_path=None))


@app.on_event("startup")
async def startup_event():
    logger.info(f"Starting place matching API {Config.API_VERSION}", "API")


@app.exception_handler(VPRError)
async def vpr_error_handler(request: Request, exc: VPRError):
    status = 422 if isinstance(exc, EvaluationError) else 400
    logger.warning(f"{request.url.path} rejected ({status}): {exc}", "API")
    return JSONResponse(status_code=status, content={"detail": str(exc), "error": type(exc).__name__})


# =============================================================================
# CORE ENDPOINTS
# =============================================================================

@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
        "version": Config.API_VERSION,
    }


@app.get("/status", response_model=ServiceStatus)
async def service_status():
    status = matching_service.get_service_status()
    status['recent_logs'] = [
        {**entry, 'timestamp': entry['timestamp'].isoformat()} for entry in logger.get_recent_logs(20)
    ]
    return ServiceStatus(**status)


def _technique_set(request: MatchRequest) -> TechniqueSet:
    techniques = []
    for payload in request.techniques:
        orientation = "distance" if payload.distance else "similarity"
        try:
            matrix = SimilarityMatrix(payload.values, orientation)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=f"Technique '{payload.technique_id}': {e}")
        techniques.append((payload.technique_id, as_similarity(matrix)))
    return TechniqueSet(tuple(techniques))


@app.post("/api/match", response_model=MatchResponse)
def match(request: MatchRequest):
    """Batch matching of every query row of the submitted technique matrices"""
    techniques = _technique_set(request)
    logger.info(f"Match request: {len(techniques)} technique(s) of shape {techniques.shape}, "
                f"mode {request.mode}", "API")
    outcome = matching_service.match_techniques(techniques, request.mode, request.sic, request.seq,
                                                request.scale, request.confidence)
    return MatchResponse(decisions=outcome['decisions'], trace=outcome['trace'],
                         processing_stats=outcome['processing_stats'])


@app.post("/api/evaluate", response_model=EvalReport)
def evaluate_decisions(request: EvaluateRequest):
    gt = GroundTruth(tuple(request.ground_truth), request.allowance)
    return evaluate(request.decisions, gt, request.n_refs)


@app.post("/api/upload-match", response_model=MatchResponse)
def upload_match(
    files: List[UploadFile] = File(..., description="Technique matrices (.csv or .simm); ids are file stems"),
    mode: str = Form("music"),
    k: int = Form(Config.DEFAULT_K),
    f: int = Form(Config.DEFAULT_F),
    w: int = Form(Config.DEFAULT_W),
):
    """Match uploaded technique files; a distance matrix is marked by a '.distance' stem suffix"""
    if len(files) > MAX_UPLOAD_FILES:
        raise HTTPException(status_code=400, detail=f"Maximum {MAX_UPLOAD_FILES} files allowed per upload")
    for file in files:
        if not file.filename.lower().endswith(UPLOAD_SUFFIXES):
            raise HTTPException(status_code=400, detail=f"File {file.filename} must be CSV or SIMM")

    techniques = []
    with tempfile.TemporaryDirectory() as tmp:
        for file in files:
            path = Path(tmp) / Path(file.filename).name
            path.write_bytes(file.file.read())
            stem = path.stem
            distance = stem.endswith('.distance')
            technique_id = stem[:-len('.distance')] if distance else stem
            matrix = load_matrix(path, "distance" if distance else "similarity")
            techniques.append((technique_id, as_similarity(matrix)))
            logger.debug(f"Loaded {file.filename} ({'binary' if is_binary_path(path) else 'csv'}) "
                         f"as '{technique_id}'", "API")

    sic = validated(SicParams, k=k, f=f, w=w)
    if mode not in ('sic', 'music', 'seqslam', 'argmax'):
        raise HTTPException(status_code=400, detail=f"Unknown mode '{mode}'")

    outcome = matching_service.match_techniques(TechniqueSet(tuple(techniques)), mode, sic)
    return MatchResponse(decisions=outcome['decisions'], trace=outcome['trace'],
                         processing_stats=outcome['processing_stats'])


# =============================================================================
# SERVER STARTUP
# =============================================================================

if __name__ == "__main__":
    import uvicorn

    port = 8000
    print(f"Place matching API starting on port {port}")
    print(f"Documentation: http://localhost:{port}/docs")
    uvicorn.run(app, host="0.0.0.0", port=port)
