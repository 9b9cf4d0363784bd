"""
LCP Problem Definition
Problem container, natural-map residual, complementarity predicate and the
two block-tridiagonal benchmark families
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from lcp_errors import DimensionMismatchError, InvalidParameterError
from sparse_matrix import (
    PathLike, SparseMatrix, as_vector, matvec,
    read_matrix_market, read_vector, write_matrix_market, write_vector,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LcpProblem:
    """LCP(q, A): find z >= 0 with w = Az + q >= 0 and z'w = 0"""

    A: SparseMatrix
    q: np.ndarray
    name: str = "lcp"

    def __post_init__(self):
        qv = np.array(self.q, dtype=np.float64).ravel()
        if qv.shape[0] != self.A.n:
            raise DimensionMismatchError(self.A.n, qv.shape[0], what="q")
        qv.flags.writeable = False
        object.__setattr__(self, "q", qv)

    @property
    def n(self) -> int:
        return self.A.n

    def w(self, z) -> np.ndarray:
        return matvec(self.A, z) + self.q

    def residual(self, z) -> float:
        return residual(self, z)


@dataclass(frozen=True, eq=False)
class Solution:
    """Candidate solution with the cached w = Az + q"""

    z: np.ndarray
    w: np.ndarray = field(repr=False)

    @classmethod
    def from_z(cls, problem: LcpProblem, z) -> "Solution":
        zv = as_vector(z, problem.n, what="z")
        return cls(z=zv, w=problem.w(zv))

    def is_complementary(self, tol: float) -> bool:
        return is_complementary_pair(self.z, self.w, tol)


def residual(p: LcpProblem, z) -> float:
    """Euclidean norm of min(z, Az + q); zero exactly at solutions"""
    zv = as_vector(z, p.n, what="z")
    return float(np.linalg.norm(np.minimum(zv, matvec(p.A, zv) + p.q)))


def is_complementary_pair(a, b, tol: float) -> bool:
    """a + b = |a - b| within tol (equivalent to a >= 0, b >= 0, a'b = 0)"""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise DimensionMismatchError(av.shape[0], bv.shape[0])
    if av.size == 0:
        return True
    return bool(np.max(np.abs((av + bv) - np.abs(av - bv))) <= tol)


# -- benchmark families -------------------------------------------------------

def reference_solution(n: int) -> np.ndarray:
    """(1, 2, 1, 2, ...) truncated at n"""
    return np.where(np.arange(n) % 2 == 0, 1.0, 2.0)


def _block_tridiagonal(m: int, diag: float, lower: float, upper: float) -> SparseMatrix:
    """
    n = m*m matrix of m x m blocks: tridiag(lower, diag, upper) on the
    diagonal blocks, lower*I below and upper*I above them
    """
    n = m * m
    idx = np.arange(n)
    block, pos = np.divmod(idx, m)

    rows = [idx]
    cols = [idx]
    vals = [np.full(n, diag)]
    couplings = (
        (pos > 0, -1, lower),          # within block, left
        (pos < m - 1, 1, upper),       # within block, right
        (block > 0, -m, lower),        # block below the diagonal
        (block < m - 1, m, upper),     # block above the diagonal
    )
    for mask, offset, value in couplings:
        r = idx[mask]
        rows.append(r)
        cols.append(r + offset)
        vals.append(np.full(r.shape[0], value))
    return SparseMatrix.from_triplets(n, np.concatenate(rows), np.concatenate(cols),
                                      np.concatenate(vals))


def _family(m: int, delta: float, lower: float, upper: float, name: str) -> LcpProblem:
    if int(m) != m or m < 2:
        raise InvalidParameterError(f"m must be an integer >= 2, got {m}")
    if delta < 0:
        raise InvalidParameterError(f"delta must be nonnegative, got {delta}")
    A = _block_tridiagonal(int(m), 4.0 + float(delta), lower, upper)
    z_star = reference_solution(A.n)
    q = -matvec(A, z_star)
    logger.debug("generated %s: m=%d n=%d delta=%g nnz=%d", name, m, A.n, delta, A.nnz)
    return LcpProblem(A=A, q=q, name=f"{name}-m{int(m)}-d{delta:g}")


def gen_example1(m: int, delta: float = 4.0) -> LcpProblem:
    """Symmetric family: tridiag(-1, 4, -1) blocks coupled by -I, shifted by delta*I"""
    return _family(m, delta, lower=-1.0, upper=-1.0, name="example1")


def gen_example2(m: int, delta: float = 4.0) -> LcpProblem:
    """Nonsymmetric family: lower couplings -1.5, upper couplings -0.5"""
    return _family(m, delta, lower=-1.5, upper=-0.5, name="example2")


GENERATORS = {1: gen_example1, 2: gen_example2}


def generate(example: int, m: int, delta: float = 4.0) -> LcpProblem:
    try:
        gen = GENERATORS[int(example)]
    except (KeyError, ValueError):
        raise InvalidParameterError(f"unknown example family {example!r}, expected 1 or 2")
    return gen(m, delta)


# -- problem files ------------------------------------------------------------

def export_problem(p: LcpProblem, directory: PathLike, stem: Optional[str] = None) -> Tuple[Path, Path]:
    """Write <stem>_A.mtx and <stem>_q.mtx into directory"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    prefix = f"{stem}_" if stem else ""
    a_path = out / f"{prefix}A.mtx"
    q_path = out / f"{prefix}q.mtx"
    write_matrix_market(p.A, a_path, comment=p.name)
    write_vector(p.q, q_path, comment=p.name)
    return a_path, q_path


def load_problem(a_path: PathLike, q_path: PathLike) -> LcpProblem:
    A = read_matrix_market(a_path)
    q = read_vector(q_path)
    return LcpProblem(A=A, q=q, name=Path(a_path).stem)
