"""
Convergence Certifier
Matrix classes (Z, M, H, H+, P), the contraction matrix and its spectral radius,
Ω-domain verdicts for the accelerated splittings and a brute-force LCP oracle
"""

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import linalg as sparse_linalg

from lcp_errors import (
    InvalidParameterError, MultipleSolutionsError, NoSolutionError, PMatrixLimitError,
    SingularLhsError, SingularMatrixError,
)
from lcp_problem import LcpProblem
from sparse_matrix import DiagonalMatrix, SparseMatrix, as_vector, split_dlu
from splitting_methods import Family, SplittingSpec, assemble_operator

logger = logging.getLogger(__name__)

SIGN_TOL = 1e-10
MINOR_TOL = 1e-12
P_LIMIT = 12
DENSE_LIMIT = 400
ORACLE_LIMIT = 16


@dataclass
class CertReport:
    is_Z: bool = False
    is_M: bool = False
    is_H: bool = False
    is_H_plus: bool = False
    is_P: Optional[bool] = None
    rho_T: Optional[float] = None
    rho_T_bound: Optional[float] = None
    omega_case1: bool = False
    omega_case2: bool = False
    omega_case2_comparison_form: Optional[bool] = None
    h_compatible: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """
        ρ(T) < 1 by its certified bound; the Ω-domain cases decide only when
        T was too large to form (they are not sufficient for every splitting)
        """
        if self.rho_T_bound is not None:
            return self.rho_T_bound < 1.0
        return self.omega_case1 or self.omega_case2

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["certified"] = self.certified
        return out


@dataclass
class SpectralEstimate:
    estimate: float
    upper_bound: float
    lower_bound: float
    iterations: int
    converged: bool
    notes: List[str] = field(default_factory=list)


# -- matrix classes -----------------------------------------------------------

def _dense(A) -> np.ndarray:
    if isinstance(A, SparseMatrix):
        return A.to_dense()
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _sparse(A) -> SparseMatrix:
    return A if isinstance(A, SparseMatrix) else SparseMatrix.from_dense(A)


def comparison_matrix(A) -> SparseMatrix:
    """⟨A⟩: |a_ii| on the diagonal, -|a_ij| off it"""
    S = _sparse(A)
    absolute = S.abs()
    d = np.abs(S.diagonal())
    # -|A| everywhere, then flip the diagonal back to +|a_ii|
    return absolute.scale(-1.0).add(SparseMatrix.from_diagonal(2.0 * d))


def is_z_matrix(A) -> bool:
    S = _sparse(A)
    off = S.strictly_lower().add(S.strictly_upper())
    return bool(off.nnz == 0 or off.values.max() <= SIGN_TOL)


def m_matrix_verdict(A, n_limit: int = DENSE_LIMIT) -> Tuple[Optional[bool], str]:
    """
    Returns:
        (True/False, "") when decided; (None, reason) when the large-n
        sufficient test could not confirm the M property
    """
    S = _sparse(A)
    if not is_z_matrix(S):
        return False, ""
    if np.any(S.diagonal() <= 0):
        return False, ""
    if S.n <= n_limit:
        try:
            inv = np.linalg.inv(S.to_dense())
        except np.linalg.LinAlgError:
            raise SingularMatrixError(f"matrix of order {S.n} is singular")
        if not np.all(np.isfinite(inv)):
            raise SingularMatrixError(f"matrix of order {S.n} is numerically singular")
        return bool(inv.min() >= -SIGN_TOL), ""
    # Z-matrix with v > 0 and Av > 0 is a nonsingular M-matrix
    v = sparse_linalg.spsolve(S.csr.tocsc(), np.ones(S.n))
    if np.all(np.isfinite(v)) and v.min() > 0:
        return True, ""
    return None, f"positive-vector test failed at n={S.n}; M property not decided"


def is_m_matrix(A, n_limit: int = DENSE_LIMIT) -> bool:
    verdict, note = m_matrix_verdict(A, n_limit)
    if verdict is None:
        logger.warning(note)
        return False
    return verdict


def is_h_matrix(A, n_limit: int = DENSE_LIMIT) -> bool:
    try:
        return is_m_matrix(comparison_matrix(A), n_limit)
    except SingularMatrixError:
        return False


def is_h_plus_matrix(A, n_limit: int = DENSE_LIMIT) -> bool:
    S = _sparse(A)
    return bool(np.all(S.diagonal() > 0)) and is_h_matrix(S, n_limit)


def is_p_matrix(A, p_limit: int = P_LIMIT) -> bool:
    """Every principal minor above MINOR_TOL (2^n - 1 determinants)"""
    dense = _dense(A)
    n = dense.shape[0]
    if n > p_limit:
        raise PMatrixLimitError(f"P-matrix test enumerates 2^n minors; n={n} exceeds limit {p_limit}")
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            sub = dense[np.ix_(idx, idx)]
            if np.linalg.det(sub) <= MINOR_TOL:
                return False
    return True


# -- contraction matrix and spectral radius -----------------------------------

def contraction_matrix(spec: SplittingSpec, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """
    T = |lhs⁻¹| (|rhs_s| + |rhs_abs|) for the splitting's operator

    Accelerated family: lhs = M + Ω + I - L; baseline: lhs = Ω + M.
    Scaling the whole operator by α leaves T unchanged.
    """
    n = spec.A.n
    if n > dense_limit:
        raise InvalidParameterError(f"contraction matrix is dense; n={n} exceeds limit {dense_limit}")
    op = assemble_operator(spec, np.zeros(n))
    try:
        lhs_inv = np.linalg.inv(op.lhs.to_dense())
    except np.linalg.LinAlgError:
        raise SingularLhsError(f"{spec.name.value} lhs is singular")
    right = np.abs(op.rhs_s.to_dense()) + np.abs(op.effective_rhs_abs().to_dense())
    return np.abs(lhs_inv) @ right


def spectral_bounds(T, tol: float = 1e-10, max_iters: int = 10000) -> SpectralEstimate:
    """
    Power iteration from the ones vector on a nonnegative matrix

    The Rayleigh quotient gives the estimate; min/max of (Tv)_i / v_i over the
    final positive iterate bracket the spectral radius.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.size and T.min() < -SIGN_TOL:
        raise InvalidParameterError("spectral_bounds expects an entrywise nonnegative matrix")
    n = T.shape[0]
    v = np.ones(n) / np.sqrt(n)
    row_sums = T.sum(axis=1)
    best_upper = float(row_sums.max()) if n else 0.0
    lam = float(v @ (T @ v))
    converged = False
    k = 0
    for k in range(1, max_iters + 1):
        y = T @ v
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return SpectralEstimate(0.0, 0.0, 0.0, k, True)
        v_next = y / norm
        lam_next = float(v_next @ (T @ v_next))
        v = v_next
        if abs(lam_next - lam) < tol:
            lam = lam_next
            converged = True
            break
        lam = lam_next

    notes = []
    Tv = T @ v
    if v.min() > 0:
        ratios = Tv / v
        upper = min(best_upper, float(ratios.max()))
        lower = float(ratios.min())
    else:
        upper, lower = best_upper, 0.0
        notes.append("iterate not strictly positive; row-sum bound used")
    if not converged:
        notes.append(f"power iteration not converged after {max_iters} steps; certified bound returned")
        lam = upper
    return SpectralEstimate(max(lam, 0.0), upper, lower, k, converged, notes)


def spectral_radius(T, tol: float = 1e-10, max_iters: int = 10000) -> float:
    return spectral_bounds(T, tol, max_iters).estimate


# -- Ω-domain verdicts --------------------------------------------------------

@dataclass
class OmegaDomainVerdict:
    case1: bool
    case2: bool
    case2_comparison_form: Optional[bool]
    h_plus: bool
    h_compatible: Optional[bool]
    notes: List[str] = field(default_factory=list)


def _m_test(matrix: SparseMatrix, n_limit: int, label: str, notes: List[str]) -> Optional[bool]:
    try:
        verdict, note = m_matrix_verdict(matrix, n_limit)
    except SingularMatrixError:
        notes.append(f"{label} is singular")
        return False
    if verdict is None:
        notes.append(f"{label}: {note}")
        return False
    return verdict


def h_compatible(spec: SplittingSpec, atol: float = SIGN_TOL) -> bool:
    """⟨A⟩ = ⟨M + I - L⟩ - |N + I - L| entrywise (accelerated family)"""
    I = SparseMatrix.identity(spec.A.n)
    if spec.family is Family.NEW_ACCELERATED:
        left = spec.M.add(I).sub(spec.L)
        right = spec.N.add(I).sub(spec.L)
    else:
        left, right = spec.M, spec.N
    return comparison_matrix(left).sub(right.abs()).allclose(comparison_matrix(spec.A), atol)


def check_omega_domain(A, omega, spec: Optional[SplittingSpec] = None,
                       n_limit: int = DENSE_LIMIT) -> OmegaDomainVerdict:
    """
    Ω-domain verdicts for an H+ matrix

    case1: ω_i >= d_i for every i.
    case2: ω_i < d_i for every i and 2Ω - D - |B| is an M-matrix (B = L + U).
    The variant ⟨A⟩ + 2Ω - D - |B| is reported as case2_comparison_form; it does
    not by itself keep ρ(T) below one.
    """
    S = _sparse(A)
    om = omega if isinstance(omega, DiagonalMatrix) else DiagonalMatrix(as_vector(omega, S.n, "omega"))
    notes: List[str] = []

    h_plus = is_h_plus_matrix(S, n_limit)
    if not h_plus:
        notes.append("matrix is not H+; Ω-domain cases do not apply")

    D, L, U = split_dlu(S)
    d = D.entries
    w = om.entries
    above = bool(np.all(w >= d))
    below = bool(np.all(w < d))
    if not above and not below:
        notes.append("Ω has entries on both sides of D; neither case applies")

    two_omega_minus_d = SparseMatrix.from_diagonal(2.0 * w - d)
    abs_b = L.add(U).abs()
    case2 = False
    comparison_form = None
    if below:
        stated = two_omega_minus_d.sub(abs_b)
        case2 = bool(_m_test(stated, n_limit, "2Ω - D - |B|", notes))
        comparison_form = bool(_m_test(comparison_matrix(S).add(stated), n_limit,
                                  "⟨A⟩ + 2Ω - D - |B|", notes))
        if comparison_form and not case2:
            notes.append("⟨A⟩ + 2Ω - D - |B| is an M-matrix but 2Ω - D - |B| is not")

    compatible = None
    if spec is not None:
        compatible = h_compatible(spec)
        if not compatible:
            notes.append(f"{spec.name.value} splitting is not H-compatible")

    return OmegaDomainVerdict(case1=h_plus and above, case2=h_plus and case2,
                              case2_comparison_form=comparison_form, h_plus=h_plus,
                              h_compatible=compatible, notes=notes)


# -- oracle -------------------------------------------------------------------

def oracle_solve(p: LcpProblem, limit: int = ORACLE_LIMIT) -> np.ndarray:
    """
    Enumerate every index set a, solve A_aa z_a = -q_a and keep the
    complementary candidates; exactly one is expected for a P-matrix
    """
    n = p.n
    if n > limit:
        raise InvalidParameterError(f"oracle enumerates 2^n bases; n={n} exceeds limit {limit}")
    A = p.A.to_dense()
    q = p.q
    found: List[np.ndarray] = []
    for size in range(n + 1):
        for idx in itertools.combinations(range(n), size):
            z = np.zeros(n)
            if idx:
                sel = list(idx)
                try:
                    z[sel] = np.linalg.solve(A[np.ix_(sel, sel)], -q[sel])
                except np.linalg.LinAlgError:
                    continue
            if z.min() < -SIGN_TOL:
                continue
            if (A @ z + q).min() < -SIGN_TOL:
                continue
            z = np.maximum(z, 0.0)
            if not any(np.allclose(z, other, rtol=0.0, atol=1e-8) for other in found):
                found.append(z)
    if not found:
        raise NoSolutionError(f"no complementary basis for {p.name}")
    if len(found) > 1:
        raise MultipleSolutionsError(f"{len(found)} distinct solutions for {p.name}")
    return found[0]


# -- full report --------------------------------------------------------------

def certify_problem(A, spec: Optional[SplittingSpec] = None, p_limit: int = P_LIMIT,
                    dense_limit: int = DENSE_LIMIT) -> CertReport:
    """
    Classify A and, given a splitting, check its Ω domain and ρ(T)

    Args:
        A: the LCP matrix (SparseMatrix or dense array)
        spec: splitting whose Ω and operator are checked
        p_limit: largest n for the P-matrix enumeration
        dense_limit: largest n for dense inverses and T

    Returns:
        CertReport; flags that cannot be decided at this n stay False/None
        with a note
    """
    S = _sparse(A)
    report = CertReport()
    report.is_Z = is_z_matrix(S)
    try:
        verdict, note = m_matrix_verdict(S, dense_limit)
        report.is_M = bool(verdict)
        if note:
            report.notes.append(f"M test: {note}")
    except SingularMatrixError as exc:
        report.notes.append(str(exc))
    try:
        verdict, note = m_matrix_verdict(comparison_matrix(S), dense_limit)
        report.is_H = bool(verdict)
        if note:
            report.notes.append(f"H test: {note}")
    except SingularMatrixError:
        report.notes.append("comparison matrix is singular")
    report.is_H_plus = report.is_H and bool(np.all(S.diagonal() > 0))

    if S.n <= p_limit:
        report.is_P = is_p_matrix(S, p_limit)
    else:
        report.notes.append(f"P test skipped: n={S.n} exceeds {p_limit}")

    if spec is not None:
        domain = check_omega_domain(S, spec.omega, spec, dense_limit)
        report.omega_case1 = domain.case1
        report.omega_case2 = domain.case2
        report.omega_case2_comparison_form = domain.case2_comparison_form
        report.h_compatible = domain.h_compatible
        report.notes.extend(domain.notes)
        if S.n <= dense_limit:
            est = spectral_bounds(contraction_matrix(spec, dense_limit))
            report.rho_T = est.estimate
            report.rho_T_bound = est.upper_bound
            report.notes.extend(est.notes)
        else:
            report.notes.append(f"ρ(T) skipped: n={S.n} exceeds {dense_limit}; "
                                "verdict rests on the Ω-domain cases alone")

    logger.info("certified n=%d: Z=%s M=%s H+=%s P=%s rho=%s -> %s", S.n, report.is_Z,
                report.is_M, report.is_H_plus, report.is_P, report.rho_T, report.certified)
    return report
