"""
Matrix Splittings for Modulus-Based Iterations
Builds the splitting for every method variant (accelerated family and the
classical baselines), resolves Ω policies and assembles the iteration operator
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from lcp_errors import ConfigError, InvalidParameterError, ZeroDiagonalError
from sparse_matrix import (
    DiagonalMatrix, SparseMatrix, as_vector, matvec, read_vector, split_dlu,
)

logger = logging.getLogger(__name__)

SPLITTING_ATOL = 1e-12


class Family(str, Enum):
    NEW_ACCELERATED = "new_accelerated"
    BASELINE = "baseline"


class Variant(str, Enum):
    """Method tags; the values are the command-line names"""

    NAM_MODULUS = "nam-mod"
    NAM_MODIFIED = "nam-modmod"
    NAM_JACOBI = "nam-jacobi"
    NAMGS = "namgs"
    NAMSOR = "namsor"
    NAMAOR = "namaor"
    MGS = "mgs"
    MSOR = "msor"
    MAOR = "maor"

    @property
    def family(self) -> Family:
        return Family.BASELINE if self in BASELINE_VARIANTS else Family.NEW_ACCELERATED

    @property
    def needs_alpha(self) -> bool:
        return self in (Variant.NAM_MODIFIED, Variant.NAMSOR, Variant.NAMAOR,
                        Variant.MSOR, Variant.MAOR)

    @property
    def needs_beta(self) -> bool:
        return self in (Variant.NAMAOR, Variant.MAOR)

    @property
    def relaxed(self) -> bool:
        """Splitting whose M carries D/alpha on its diagonal"""
        return self in (Variant.NAMSOR, Variant.NAMAOR, Variant.MSOR, Variant.MAOR)

    @classmethod
    def parse(cls, text: str) -> "Variant":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ConfigError(f"unknown method '{text}', expected one of: {names}")


BASELINE_VARIANTS = frozenset({Variant.MGS, Variant.MSOR, Variant.MAOR})
TRIANGULAR_VARIANTS = frozenset({
    Variant.NAM_JACOBI, Variant.NAMGS, Variant.NAMSOR, Variant.NAMAOR,
    Variant.MGS, Variant.MSOR, Variant.MAOR,
})


@dataclass(frozen=True, eq=False)
class SplittingSpec:
    """
    A = M - N together with the modulus parameters Ω, r, α, β

    L is the negated strictly lower part of A (A = D - L - U).
    """

    name: Variant
    A: SparseMatrix
    M: SparseMatrix
    N: SparseMatrix
    L: SparseMatrix
    omega: DiagonalMatrix
    r: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.omega.n != self.A.n:
            raise InvalidParameterError(f"omega has {self.omega.n} entries, matrix has {self.A.n} rows")
        if not self.omega.is_positive():
            raise InvalidParameterError("omega entries must all be strictly positive")
        if not self.r > 0:
            raise InvalidParameterError(f"r must be positive, got {self.r}")
        if self.name.needs_alpha and not self.alpha > 0:
            raise InvalidParameterError(f"{self.name.value}: alpha must be positive, got {self.alpha}")
        if self.name.needs_beta and not self.beta >= 0:
            raise InvalidParameterError(f"{self.name.value}: beta must be nonnegative, got {self.beta}")
        if not self.M.sub(self.N).allclose(self.A, atol=SPLITTING_ATOL):
            raise InvalidParameterError(f"{self.name.value}: M - N does not reproduce A")

    @property
    def family(self) -> Family:
        return self.name.family

    @property
    def lhs_is_lower_triangular(self) -> bool:
        return self.name in TRIANGULAR_VARIANTS

    def describe(self) -> dict:
        return {
            "method": self.name.value,
            "family": self.family.value,
            "n": self.A.n,
            "r": self.r,
            "alpha": self.alpha if self.name.needs_alpha else None,
            "beta": self.beta if self.name.needs_beta else None,
            "omega_min": float(self.omega.entries.min()),
            "omega_max": float(self.omega.entries.max()),
        }


@dataclass(frozen=True, eq=False)
class IterationOperator:
    """
    One sweep: lhs s+ = rhs_s s + abs_scale * rhs_abs |s| + rhs_const

    rhs_abs is stored as Ω - A; relaxed variants fold their α into abs_scale.
    """

    name: Variant
    lhs: SparseMatrix
    rhs_s: SparseMatrix
    rhs_abs: SparseMatrix
    abs_scale: float
    rhs_const: np.ndarray
    lhs_is_lower_triangular: bool
    r: float

    @property
    def n(self) -> int:
        return self.lhs.n

    def effective_rhs_abs(self) -> SparseMatrix:
        if self.abs_scale == 1.0:
            return self.rhs_abs
        return self.rhs_abs.scale(self.abs_scale)

    def rhs(self, s) -> np.ndarray:
        sv = as_vector(s, self.n, what="s")
        out = matvec(self.rhs_s, sv)
        out += self.abs_scale * matvec(self.rhs_abs, np.abs(sv))
        out += self.rhs_const
        return out

    def fixed_point_defect(self, s) -> float:
        """||lhs s - rhs(s)||_inf; zero exactly at fixed points"""
        sv = as_vector(s, self.n, what="s")
        return float(np.max(np.abs(matvec(self.lhs, sv) - self.rhs(sv))))

    def allclose(self, other: "IterationOperator", atol: float = SPLITTING_ATOL) -> bool:
        """Entrywise equality of all operator parts (abs part compared after scaling)"""
        return (
            self.lhs.allclose(other.lhs, atol)
            and self.rhs_s.allclose(other.rhs_s, atol)
            and self.effective_rhs_abs().allclose(other.effective_rhs_abs(), atol)
            and np.allclose(self.rhs_const, other.rhs_const, rtol=0.0, atol=atol)
        )


# -- Ω policies ---------------------------------------------------------------

@dataclass(frozen=True)
class OmegaPolicy:
    """
    diag[:C]   Ω = C·D
    mdiag:C    Ω = C·diag(M)  (C·D/α for SOR/AOR splittings)
    bench      alias of mdiag:0.5
    identity   Ω = I
    scalar:V   Ω = V·I
    file:PATH  Ω read from a vector file
    """

    kind: str = "diag"
    value: float = 1.0
    path: Optional[str] = None

    @classmethod
    def parse(cls, text: str) -> "OmegaPolicy":
        raw = str(text).strip()
        kind, _, arg = raw.partition(":")
        kind = kind.lower()
        if kind == "bench" and not arg:
            return cls("mdiag", 0.5)
        if kind == "identity" and not arg:
            return cls("identity", 1.0)
        if kind == "file":
            if not arg:
                raise ConfigError("omega policy 'file:' needs a path")
            return cls("file", 1.0, arg)
        if kind in ("diag", "mdiag", "scalar"):
            if not arg:
                if kind == "scalar":
                    raise ConfigError("omega policy 'scalar:' needs a value")
                return cls(kind, 1.0)
            try:
                value = float(arg)
            except ValueError:
                raise ConfigError(f"omega policy '{raw}': '{arg}' is not a number")
            if not value > 0:
                raise ConfigError(f"omega policy '{raw}': value must be positive")
            return cls(kind, value)
        raise ConfigError(f"unknown omega policy '{raw}' "
                          "(expected diag[:C], mdiag:C, bench, identity, scalar:V or file:PATH)")

    def __str__(self) -> str:
        if self.kind == "file":
            return f"file:{self.path}"
        if self.kind == "identity":
            return "identity"
        return f"{self.kind}:{self.value:g}"


def resolve_omega(policy, A: SparseMatrix, variant: Variant = Variant.NAMGS,
                  alpha: float = 1.0) -> DiagonalMatrix:
    """Turn a policy (object or string) into the diagonal Ω for A"""
    if not isinstance(policy, OmegaPolicy):
        policy = OmegaPolicy.parse(policy)
    n = A.n
    if policy.kind == "identity":
        return DiagonalMatrix(np.ones(n))
    if policy.kind == "scalar":
        return DiagonalMatrix(np.full(n, policy.value))
    if policy.kind == "file":
        entries = read_vector(Path(policy.path))
        return DiagonalMatrix(as_vector(entries, n, what="omega"))
    d = A.diagonal()
    if policy.kind == "mdiag" and variant.relaxed:
        if not alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {alpha}")
        return DiagonalMatrix(policy.value * d / alpha)
    return DiagonalMatrix(policy.value * d)


# -- constructors -------------------------------------------------------------

def _parts(A: SparseMatrix):
    D, L, U = split_dlu(A)
    return D, D.to_sparse(), L, U


def _require_nonzero_diagonal(D: DiagonalMatrix):
    zero = np.flatnonzero(D.entries == 0.0)
    if zero.size:
        raise ZeroDiagonalError(int(zero[0]))


def _default_r(r: Optional[float], default: float) -> float:
    return default if r is None else float(r)


def _require_alpha(alpha: float, variant: Variant):
    if alpha is None or not alpha > 0:
        raise InvalidParameterError(f"{variant.value}: alpha must be positive, got {alpha}")


def _default_omega(A: SparseMatrix, omega) -> DiagonalMatrix:
    if omega is None:
        return DiagonalMatrix(A.diagonal())
    if isinstance(omega, DiagonalMatrix):
        return omega
    return resolve_omega(omega, A)


def make_nam_modulus(A: SparseMatrix, r: Optional[float] = None) -> SplittingSpec:
    """M = A, N = 0, Ω = I, r = 1"""
    _, _, L, _ = _parts(A)
    return SplittingSpec(Variant.NAM_MODULUS, A, M=A, N=SparseMatrix.zeros(A.n), L=L,
                         omega=DiagonalMatrix(np.ones(A.n)), r=_default_r(r, 1.0))


def make_nam_modified(A: SparseMatrix, alpha: float, r: Optional[float] = None) -> SplittingSpec:
    """M = A, N = 0, Ω = αI, r = 1"""
    _require_alpha(alpha, Variant.NAM_MODIFIED)
    _, _, L, _ = _parts(A)
    return SplittingSpec(Variant.NAM_MODIFIED, A, M=A, N=SparseMatrix.zeros(A.n), L=L,
                         omega=DiagonalMatrix(np.full(A.n, float(alpha))), r=_default_r(r, 1.0),
                         alpha=float(alpha))


def make_nam_jacobi(A: SparseMatrix, omega=None, r: Optional[float] = None) -> SplittingSpec:
    """M = D, N = L + U, r = 2"""
    D, Ds, L, U = _parts(A)
    _require_nonzero_diagonal(D)
    return SplittingSpec(Variant.NAM_JACOBI, A, M=Ds, N=L.add(U), L=L,
                         omega=_default_omega(A, omega), r=_default_r(r, 2.0))


def make_namgs(A: SparseMatrix, omega=None, r: Optional[float] = None) -> SplittingSpec:
    """M = D - L, N = U, r = 2"""
    D, Ds, L, U = _parts(A)
    _require_nonzero_diagonal(D)
    return SplittingSpec(Variant.NAMGS, A, M=Ds.sub(L), N=U, L=L,
                         omega=_default_omega(A, omega), r=_default_r(r, 2.0))


def make_namsor(A: SparseMatrix, omega=None, alpha: float = 1.0,
                r: Optional[float] = None) -> SplittingSpec:
    """M = D/α - L, N = (1/α - 1)D + U, r = 2"""
    _require_alpha(alpha, Variant.NAMSOR)
    D, Ds, L, U = _parts(A)
    _require_nonzero_diagonal(D)
    a = float(alpha)
    M = Ds.scale(1.0 / a).sub(L)
    N = Ds.scale(1.0 / a - 1.0).add(U)
    return SplittingSpec(Variant.NAMSOR, A, M=M, N=N, L=L, omega=_default_omega(A, omega),
                         r=_default_r(r, 2.0), alpha=a, beta=a)


def make_namaor(A: SparseMatrix, omega=None, alpha: float = 1.0, beta: float = 1.0,
                r: Optional[float] = None) -> SplittingSpec:
    """M = (D - βL)/α, N = ((1 - α)D + (α - β)L + αU)/α, r = 2"""
    _require_alpha(alpha, Variant.NAMAOR)
    if beta is None or not beta >= 0:
        raise InvalidParameterError(f"namaor: beta must be nonnegative, got {beta}")
    D, Ds, L, U = _parts(A)
    _require_nonzero_diagonal(D)
    a, b = float(alpha), float(beta)
    M = Ds.sub(L.scale(b)).scale(1.0 / a)
    N = Ds.scale(1.0 - a).add(L.scale(a - b)).add(U.scale(a)).scale(1.0 / a)
    return SplittingSpec(Variant.NAMAOR, A, M=M, N=N, L=L, omega=_default_omega(A, omega),
                         r=_default_r(r, 2.0), alpha=a, beta=b)


def make_baseline(A: SparseMatrix, omega=None, variant=Variant.MGS, alpha: float = 1.0,
                  beta: Optional[float] = None, r: Optional[float] = None) -> SplittingSpec:
    """Classical modulus splittings: MGS, MSOR(α) and MAOR(α, β)"""
    variant = variant if isinstance(variant, Variant) else Variant.parse(variant)
    if variant not in BASELINE_VARIANTS:
        raise InvalidParameterError(f"{variant.value} is not a baseline method")
    D, Ds, L, U = _parts(A)
    _require_nonzero_diagonal(D)
    omega = _default_omega(A, omega)
    if variant is Variant.MGS:
        return SplittingSpec(Variant.MGS, A, M=Ds.sub(L), N=U, L=L, omega=omega, r=_default_r(r, 2.0))
    _require_alpha(alpha, variant)
    a = float(alpha)
    b = a if variant is Variant.MSOR else beta
    if b is None or not b >= 0:
        raise InvalidParameterError(f"{variant.value}: beta must be nonnegative, got {beta}")
    b = float(b)
    M = Ds.sub(L.scale(b)).scale(1.0 / a)
    N = Ds.scale(1.0 - a).add(L.scale(a - b)).add(U.scale(a)).scale(1.0 / a)
    return SplittingSpec(variant, A, M=M, N=N, L=L, omega=omega, r=_default_r(r, 2.0), alpha=a, beta=b)


def make_spec(variant, A: SparseMatrix, omega="diag", alpha: Optional[float] = None,
              beta: Optional[float] = None, r: Optional[float] = None) -> SplittingSpec:
    """Dispatch by variant; omega may be a policy string, OmegaPolicy or DiagonalMatrix"""
    variant = variant if isinstance(variant, Variant) else Variant.parse(variant)
    if variant.needs_alpha and alpha is None:
        raise InvalidParameterError(f"{variant.value} requires alpha")
    if variant.needs_beta and beta is None:
        raise InvalidParameterError(f"{variant.value} requires beta")
    if variant is Variant.NAM_MODULUS:
        return make_nam_modulus(A, r=r)
    if variant is Variant.NAM_MODIFIED:
        return make_nam_modified(A, alpha, r=r)

    a = 1.0 if alpha is None else float(alpha)
    if not isinstance(omega, DiagonalMatrix):
        omega = resolve_omega(omega if omega is not None else "diag", A, variant, a)
    if variant is Variant.NAM_JACOBI:
        return make_nam_jacobi(A, omega, r=r)
    if variant is Variant.NAMGS:
        return make_namgs(A, omega, r=r)
    if variant is Variant.NAMSOR:
        return make_namsor(A, omega, a, r=r)
    if variant is Variant.NAMAOR:
        return make_namaor(A, omega, a, beta, r=r)
    return make_baseline(A, omega, variant, a, beta, r=r)


# -- operator assembly --------------------------------------------------------

def generic_operator(spec: SplittingSpec, q) -> IterationOperator:
    """
    Operator straight from (M, N):
        accelerated  (M + Ω + I - L) s+ = (N + I - L) s + (Ω - A)|s| - r q
        baseline     (Ω + M) s+ = N s + (Ω - A)|s| - r q
    """
    qv = as_vector(q, spec.A.n, what="q")
    Om = spec.omega.to_sparse()
    I = SparseMatrix.identity(spec.A.n)
    if spec.family is Family.NEW_ACCELERATED:
        lhs = spec.M.add(Om).add(I).sub(spec.L)
        rhs_s = spec.N.add(I).sub(spec.L)
    else:
        lhs = Om.add(spec.M)
        rhs_s = spec.N
    return IterationOperator(
        name=spec.name, lhs=lhs, rhs_s=rhs_s, rhs_abs=Om.sub(spec.A), abs_scale=1.0,
        rhs_const=-spec.r * qv, lhs_is_lower_triangular=spec.lhs_is_lower_triangular, r=spec.r,
    )


def _relaxed_operator(spec: SplittingSpec, qv: np.ndarray) -> IterationOperator:
    """α-scaled assembly from D, L, U without forming D/α"""
    a, b = spec.alpha, spec.beta
    D, Ds, L, U = _parts(spec.A)
    Om = spec.omega.to_sparse()
    if spec.family is Family.NEW_ACCELERATED:
        I = SparseMatrix.identity(spec.A.n)
        lhs = Ds.sub(L.scale(a + b)).add(Om.scale(a)).add(I.scale(a))
        rhs_s = Ds.scale(1.0 - a).sub(L.scale(b)).add(U.scale(a)).add(I.scale(a))
    else:
        lhs = Ds.sub(L.scale(b)).add(Om.scale(a))
        rhs_s = Ds.scale(1.0 - a).add(L.scale(a - b)).add(U.scale(a))
    return IterationOperator(
        name=spec.name, lhs=lhs, rhs_s=rhs_s, rhs_abs=Om.sub(spec.A), abs_scale=a,
        rhs_const=-(a * spec.r) * qv, lhs_is_lower_triangular=True, r=spec.r,
    )


def assemble_operator(spec: SplittingSpec, q) -> IterationOperator:
    """Iteration operator for spec; relaxed variants use the α-scaled form"""
    qv = as_vector(q, spec.A.n, what="q")
    if spec.name.relaxed:
        op = _relaxed_operator(spec, qv)
    else:
        op = generic_operator(spec, qv)
    logger.debug("assembled %s operator: n=%d lhs nnz=%d triangular=%s",
                 spec.name.value, op.n, op.lhs.nnz, op.lhs_is_lower_triangular)
    return op
