"""
Pytest configuration and fixtures for the LCP modulus solver tests
"""
import json
import sys
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from lcp_problem import LcpProblem, gen_example1, gen_example2
from sparse_matrix import SparseMatrix

# Test data directories
TEST_DATA_DIR = Path(__file__).parent / "test_data"


@pytest.fixture
def spd_2x2():
    """[[2, -1], [-1, 2]], the smallest M-matrix used throughout"""
    return SparseMatrix.from_dense([[2.0, -1.0], [-1.0, 2.0]])


@pytest.fixture
def scalar_problem():
    """A = (2), q = (-2); solution z* = 1"""
    return LcpProblem(A=SparseMatrix.from_dense([[2.0]]), q=np.array([-2.0]), name="scalar")


@pytest.fixture
def example1_small():
    return gen_example1(2, 4.0)


@pytest.fixture
def example2_small():
    return gen_example2(2, 4.0)


@pytest.fixture
def example1_m4():
    return gen_example1(4, 4.0)


@pytest.fixture(scope="session")
def example1_n100():
    return gen_example1(10, 4.0)


@pytest.fixture(scope="session")
def example2_n100():
    return gen_example2(10, 4.0)


def make_random_lcp(rng: np.random.Generator, n: int, density: float = 0.5) -> LcpProblem:
    """
    Strictly row diagonally dominant matrix with positive diagonal (hence
    H+ and P) and a normal random q
    """
    off = rng.uniform(-1.0, 1.0, size=(n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(off, 0.0)
    dense = off + np.diag(np.abs(off).sum(axis=1) + rng.uniform(0.5, 2.0, size=n))
    q = rng.normal(size=n)
    return LcpProblem(A=SparseMatrix.from_dense(dense), q=q, name=f"random-n{n}")


@pytest.fixture
def random_lcp_factory() -> Callable[[int, int], LcpProblem]:
    """factory(seed, n) -> random H+ LCP"""
    def factory(seed: int, n: int) -> LcpProblem:
        return make_random_lcp(np.random.default_rng(seed), n)
    return factory


@pytest.fixture
def sample_runs():
    with open(TEST_DATA_DIR / "sample_runs.json", "r") as f:
        return json.load(f)


@pytest.fixture
def run_config_file(tmp_path):
    """Write a run-config dict to a temporary JSON file and return its path"""
    def write(obj: dict, name: str = "run.json") -> Path:
        path = tmp_path / name
        with open(path, "w") as f:
            json.dump(obj, f, indent=2)
        return path
    return write
