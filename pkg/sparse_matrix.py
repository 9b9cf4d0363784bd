"""
Sparse Square-Matrix Substrate
CSR storage, arithmetic kernels, forward substitution and Matrix Market I/O
shared by the problem, splitting, solver and certification modules
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Tuple, Union

import numpy as np
import scipy.io
from scipy import sparse
from scipy.sparse.linalg import spsolve_triangular

from lcp_errors import (
    DimensionMismatchError, MatrixMarketError, NonSquareMatrixError,
    NotLowerTriangularError, ZeroDiagonalError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# 17 significant digits make a float64 decimal round-trip exact
MM_PRECISION = 17


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


class SparseMatrix:
    """Immutable square CSR matrix of float64 values

    Rows hold strictly increasing column indices with no duplicates. The
    wrapped scipy array is private; the public index/value arrays are
    read-only views.
    """

    __slots__ = ("_csr",)

    def __init__(self, data):
        csr = sparse.csr_array(data, dtype=np.float64)
        if csr.ndim != 2 or csr.shape[0] != csr.shape[1]:
            raise NonSquareMatrixError(f"matrix must be square, got shape {csr.shape}")
        if csr.shape[0] < 1:
            raise NonSquareMatrixError("matrix dimension must be at least 1")
        csr = csr.copy()
        csr.sum_duplicates()
        csr.sort_indices()
        # SuperLU kernels (spsolve_triangular, splu) take C int index arrays
        csr.indices = csr.indices.astype(np.intc, copy=False)
        csr.indptr = csr.indptr.astype(np.intc, copy=False)
        self._csr = csr

    # -- construction helpers ---------------------------------------------
    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        """Build from a dense 2-D array, dropping exact zeros"""
        arr = np.asarray(dense, dtype=np.float64)
        if arr.ndim != 2:
            raise NonSquareMatrixError(f"expected a 2-D array, got {arr.ndim}-D")
        return cls(sparse.csr_array(arr))

    @classmethod
    def from_triplets(cls, n: int, rows: Iterable[int], cols: Iterable[int],
                      vals: Iterable[float]) -> "SparseMatrix":
        """Build from COO triplets; repeated (row, col) pairs are summed"""
        coo = sparse.coo_array(
            (np.asarray(list(vals), dtype=np.float64),
             (np.asarray(list(rows), dtype=np.intc), np.asarray(list(cols), dtype=np.intc))),
            shape=(n, n),
        )
        return cls(coo.tocsr())

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(sparse.identity(n, dtype=np.float64, format="csr"))

    @classmethod
    def zeros(cls, n: int) -> "SparseMatrix":
        return cls(sparse.csr_array((n, n), dtype=np.float64))

    @classmethod
    def from_diagonal(cls, entries) -> "SparseMatrix":
        d = np.asarray(entries, dtype=np.float64)
        return cls(sparse.diags(d, 0, shape=(d.shape[0], d.shape[0]), format="csr"))

    # -- fields -----------------------------------------------------------
    @property
    def n(self) -> int:
        return self._csr.shape[0]

    @property
    def row_offsets(self) -> np.ndarray:
        return _readonly(self._csr.indptr)

    @property
    def col_indices(self) -> np.ndarray:
        return _readonly(self._csr.indices)

    @property
    def values(self) -> np.ndarray:
        return _readonly(self._csr.data)

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def csr(self) -> sparse.csr_array:
        """Copy of the underlying scipy array"""
        return self._csr.copy()

    # -- entrywise algebra ------------------------------------------------
    def diagonal(self) -> np.ndarray:
        """Diagonal as a dense vector; absent entries read as 0"""
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def add(self, other: "SparseMatrix") -> "SparseMatrix":
        _check_same_n(self, other)
        return SparseMatrix(self._csr + other._csr)

    def sub(self, other: "SparseMatrix") -> "SparseMatrix":
        _check_same_n(self, other)
        return SparseMatrix(self._csr - other._csr)

    def scale(self, factor: float) -> "SparseMatrix":
        return SparseMatrix(self._csr * float(factor))

    def abs(self) -> "SparseMatrix":
        return SparseMatrix(abs(self._csr))

    def strictly_lower(self) -> "SparseMatrix":
        return SparseMatrix(sparse.tril(self._csr, k=-1, format="csr"))

    def strictly_upper(self) -> "SparseMatrix":
        return SparseMatrix(sparse.triu(self._csr, k=1, format="csr"))

    def is_lower_triangular(self) -> bool:
        return not np.any(self._csr.indices > self._row_of_entry())

    def allclose(self, other: "SparseMatrix", atol: float = 1e-12) -> bool:
        """Entrywise comparison |a_ij - b_ij| <= atol over the union of patterns"""
        if self.n != other.n:
            return False
        diff = abs(self._csr - other._csr)
        return diff.nnz == 0 or float(diff.max()) <= atol

    def _row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self._csr.indptr))

    def __matmul__(self, x):
        return matvec(self, x)

    def __repr__(self) -> str:
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


@dataclass(frozen=True)
class DiagonalMatrix:
    """Diagonal-only matrix (the role of Ω and D)"""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.float64).ravel()
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def is_positive(self) -> bool:
        return bool(np.all(self.entries > 0))

    def scale(self, factor: float) -> "DiagonalMatrix":
        return DiagonalMatrix(self.entries * float(factor))

    def to_sparse(self) -> SparseMatrix:
        return SparseMatrix.from_diagonal(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, DiagonalMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None


def _check_same_n(a: SparseMatrix, b: SparseMatrix):
    if a.n != b.n:
        raise DimensionMismatchError(a.n, b.n, what="matrix")


def as_vector(x, n: int, what: str = "vector") -> np.ndarray:
    """Coerce to a float64 1-D array of length n"""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.shape[0] != n:
        raise DimensionMismatchError(n, arr.shape[0], what=what)
    return arr


def matvec(A: SparseMatrix, x) -> np.ndarray:
    """A·x accumulated row by row in ascending column order"""
    xv = as_vector(x, A.n)
    return A._csr @ xv


def split_dlu(A: SparseMatrix) -> Tuple[DiagonalMatrix, SparseMatrix, SparseMatrix]:
    """
    Split A = D - L - U

    Returns:
        D: diagonal of A (missing entries kept as zeros)
        L: negated strictly lower part
        U: negated strictly upper part
    """
    D = DiagonalMatrix(A.diagonal())
    L = A.strictly_lower().scale(-1.0)
    U = A.strictly_upper().scale(-1.0)
    return D, L, U


def lower_triangular_solve(T: SparseMatrix, b) -> np.ndarray:
    """
    Forward substitution T x = b

    Raises:
        NotLowerTriangularError: T stores an entry above the diagonal
        ZeroDiagonalError: first row whose diagonal entry is zero
    """
    bv = as_vector(b, T.n, what="right-hand side")
    if not T.is_lower_triangular():
        raise NotLowerTriangularError("matrix has entries above the diagonal")
    diag = T.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise ZeroDiagonalError(int(zero[0]))
    return np.asarray(spsolve_triangular(T._csr, bv, lower=True), dtype=np.float64).ravel()


# -- Matrix Market ----------------------------------------------------------

def _check_banner(path: Path, expect_format: str = None):
    """Validate banner and size line so parse errors carry a line number"""
    with open(path, "r") as f:
        lines = f.readlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise MatrixMarketError("missing %%MatrixMarket banner", line=1)
    banner = lines[0].split()
    if len(banner) < 5:
        raise MatrixMarketError("incomplete banner, expected 'matrix <format> <field> <symmetry>'", line=1)
    fmt, field = banner[2].lower(), banner[3].lower()
    if expect_format and fmt != expect_format:
        raise MatrixMarketError(f"expected {expect_format} format, found {fmt}", line=1)
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(f"unsupported field '{field}' (real matrices only)", line=1)
    for lineno, text in enumerate(lines[1:], start=2):
        stripped = text.strip()
        if not stripped or stripped.startswith("%"):
            continue
        parts = stripped.split()
        try:
            dims = [int(p) for p in parts]
        except ValueError:
            raise MatrixMarketError(f"bad size line '{stripped}'", line=lineno)
        if fmt == "coordinate" and len(dims) != 3:
            raise MatrixMarketError("coordinate size line needs rows cols nnz", line=lineno)
        if fmt == "array" and len(dims) != 2:
            raise MatrixMarketError("array size line needs rows cols", line=lineno)
        return fmt, dims, lineno
    raise MatrixMarketError("missing size line", line=len(lines) + 1)


def read_matrix_market(path: PathLike) -> SparseMatrix:
    """Read a real coordinate .mtx file; symmetric storage is expanded"""
    path = Path(path)
    _, dims, size_line = _check_banner(path, expect_format="coordinate")
    if dims[0] != dims[1]:
        raise NonSquareMatrixError(f"{path.name}: matrix is {dims[0]}x{dims[1]}, must be square")
    try:
        with open(path, "rb") as f:
            data = scipy.io.mmread(f)
    except (ValueError, IndexError) as e:
        raise MatrixMarketError(f"{path.name}: {e}", line=size_line)
    logger.debug("read %s: n=%d nnz=%d", path, dims[0], dims[2])
    return SparseMatrix(sparse.csr_array(data))


def write_matrix_market(A: SparseMatrix, path: PathLike, comment: str = ""):
    """Write real/general coordinate format with 17 significant digits"""
    path = Path(path)
    with open(path, "wb") as f:
        scipy.io.mmwrite(f, sparse.coo_array(A._csr), comment=comment,
                         field="real", precision=MM_PRECISION, symmetry="general")
    logger.debug("wrote %s: n=%d nnz=%d", path, A.n, A.nnz)


def read_vector(path: PathLike) -> np.ndarray:
    """Read a vector from Matrix Market array format or one value per line"""
    path = Path(path)
    with open(path, "r") as f:
        first = f.readline()
    if first.lower().startswith("%%matrixmarket"):
        fmt, dims, size_line = _check_banner(path)
        if min(dims[0], dims[1]) != 1:
            raise MatrixMarketError(f"{path.name}: expected a single column, got {dims[0]}x{dims[1]}",
                                    line=size_line)
        try:
            with open(path, "rb") as f:
                data = scipy.io.mmread(f)
        except (ValueError, IndexError) as e:
            raise MatrixMarketError(f"{path.name}: {e}", line=size_line)
        if sparse.issparse(data):
            data = data.toarray()
        return np.asarray(data, dtype=np.float64).ravel()
    values = []
    with open(path, "r") as f:
        for lineno, text in enumerate(f, start=1):
            stripped = text.strip()
            if not stripped or stripped.startswith(("%", "#")):
                continue
            try:
                values.append(float(stripped))
            except ValueError:
                raise MatrixMarketError(f"{path.name}: not a number '{stripped}'", line=lineno)
    if not values:
        raise MatrixMarketError(f"{path.name}: empty vector file")
    return np.asarray(values, dtype=np.float64)


def write_vector(x, path: PathLike, comment: str = ""):
    """Write a vector in Matrix Market array format"""
    arr = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    with open(Path(path), "wb") as f:
        scipy.io.mmwrite(f, arr, comment=comment, field="real", precision=MM_PRECISION)
