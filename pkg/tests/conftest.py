# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from core.models import SicParams, SimilarityMatrix
from utils.logger import logger


@pytest.fixture(autouse=True)
def quiet_logger():
    enabled = logger.enabled
    logger.enabled = False
    yield
    logger.enabled = enabled


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hand_matrix():
    """Four references; rows 1 and 2 carry the hand-computed theta example"""
    return SimilarityMatrix(np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.7, 0.1, 0.6, 0.2],
        [0.1, 0.9, 0.2, 0.8],
    ]))


@pytest.fixture
def hand_params():
    return SicParams(k=2, f=1, w=0)
