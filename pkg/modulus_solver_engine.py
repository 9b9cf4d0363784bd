"""
Modulus Iteration Engine for Linear Complementarity Problems
Runs the fixed-point sweep, recovers z, tracks the natural residual and decides termination
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg as dense_linalg
from scipy.sparse import linalg as sparse_linalg

from lcp_errors import (
    DimensionMismatchError, InvalidParameterError, NotLowerTriangularError, SingularLhsError,
    ZeroDiagonalError,
)
from lcp_problem import LcpProblem, residual
from sparse_matrix import as_vector, lower_triangular_solve
from splitting_methods import IterationOperator, SplittingSpec, assemble_operator

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12
PIVOT_TOLERANCE = 1e-14
DENSE_LIMIT = 2000


class StartPolicy(str, Enum):
    ALTERNATING = "alternating"
    ZERO = "zero"
    CUSTOM = "custom"


class Status(str, Enum):
    CONVERGED = "CONVERGED"
    MAX_ITERS = "MAX_ITERS"
    DIVERGED = "DIVERGED"


class EngineKind(str, Enum):
    AUTO = "auto"
    TRIANGULAR = "triangular"
    DENSE = "dense"
    SPARSE_LU = "sparse-lu"


@dataclass
class SolverConfig:
    """Stopping rule and starting vector of one solve"""

    epsilon: float = 1e-5
    max_iters: int = 10000
    s0: StartPolicy = StartPolicy.ALTERNATING
    initial: Optional[np.ndarray] = None
    record_history: bool = False
    engine: EngineKind = EngineKind.AUTO

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidParameterError(f"max_iters must be a positive integer, got {self.max_iters}")
        self.max_iters = int(self.max_iters)
        self.s0 = StartPolicy(self.s0)
        self.engine = EngineKind(self.engine)
        if self.initial is not None:
            self.s0 = StartPolicy.CUSTOM
        elif self.s0 is StartPolicy.CUSTOM:
            raise InvalidParameterError("custom start policy needs an initial vector")

    def initial_vector(self, n: int) -> np.ndarray:
        if self.s0 is StartPolicy.CUSTOM:
            return as_vector(self.initial, n, what="initial vector").copy()
        if self.s0 is StartPolicy.ZERO:
            return np.zeros(n)
        return alternating_start(n)


@dataclass
class SolveReport:
    status: Status
    iterations: int
    final_residual: float
    z: np.ndarray
    s: np.ndarray
    wall_time: float
    method: str = ""
    residual_history: Optional[List[float]] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_dict(self, include_solution: bool = False) -> Dict[str, Any]:
        out = {
            "method": self.method,
            "n": int(self.z.shape[0]),
            "status": self.status.value,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "wall_time": self.wall_time,
        }
        if self.residual_history is not None:
            out["residual_history"] = list(self.residual_history)
        if include_solution:
            out["z"] = self.z.tolist()
            out["s"] = self.s.tolist()
        return out


def alternating_start(n: int) -> np.ndarray:
    """(1, 0, 1, 0, ...)"""
    return np.where(np.arange(n) % 2 == 0, 1.0, 0.0)


def recover_z(s, r: float) -> np.ndarray:
    """z = (|s| + s) / r, nonnegative for every s"""
    if not r > 0:
        raise InvalidParameterError(f"r must be positive, got {r}")
    sv = np.asarray(s, dtype=np.float64)
    return (np.abs(sv) + sv) / r


def step(op: IterationOperator, s) -> np.ndarray:
    """One sweep by forward substitution on the lower-triangular lhs"""
    if not op.lhs_is_lower_triangular:
        raise NotLowerTriangularError(f"{op.name.value} lhs is not lower triangular, use dense_step")
    return lower_triangular_solve(op.lhs, op.rhs(s))


def _dense_factor(op: IterationOperator):
    lu, piv = dense_linalg.lu_factor(op.lhs.to_dense(), check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.size and (not np.all(np.isfinite(pivots)) or pivots.min() < PIVOT_TOLERANCE):
        raise SingularLhsError(f"{op.name.value} lhs is singular (smallest pivot {pivots.min():.3e})")
    return lu, piv


def dense_step(op: IterationOperator, s, factor=None) -> np.ndarray:
    """Same sweep as step() through a dense LU factorization of lhs"""
    lu_piv = factor if factor is not None else _dense_factor(op)
    return dense_linalg.lu_solve(lu_piv, op.rhs(s), check_finite=False)


class ModulusIterationEngine:
    """Holds one assembled operator and its factorization for repeated sweeps"""

    def __init__(self, op: IterationOperator, kind: EngineKind = EngineKind.AUTO):
        """
        Args:
            op: assembled iteration operator
            kind: AUTO picks forward substitution for triangular lhs, a cached
                  dense LU up to DENSE_LIMIT rows and a sparse LU above that
        """
        self.op = op
        self.kind = self._choose(op, EngineKind(kind))
        self._factor = None
        if self.kind is EngineKind.TRIANGULAR:
            if not op.lhs.is_lower_triangular():
                raise NotLowerTriangularError(f"{op.name.value} lhs has entries above the diagonal")
            diag = op.lhs.diagonal()
            zero = np.flatnonzero(np.abs(diag) < PIVOT_TOLERANCE)
            if zero.size:
                raise ZeroDiagonalError(int(zero[0]))
        elif self.kind is EngineKind.DENSE:
            self._factor = _dense_factor(op)
        else:
            try:
                self._factor = sparse_linalg.splu(op.lhs.csr.tocsc())
            except RuntimeError as exc:
                raise SingularLhsError(f"{op.name.value} lhs is singular: {exc}")
        logger.debug("engine %s for %s (n=%d)", self.kind.value, op.name.value, op.n)

    @staticmethod
    def _choose(op: IterationOperator, kind: EngineKind) -> EngineKind:
        if kind is not EngineKind.AUTO:
            if kind is EngineKind.TRIANGULAR and not op.lhs_is_lower_triangular:
                raise NotLowerTriangularError(f"{op.name.value} lhs is not lower triangular")
            return kind
        if op.lhs_is_lower_triangular:
            return EngineKind.TRIANGULAR
        return EngineKind.DENSE if op.n <= DENSE_LIMIT else EngineKind.SPARSE_LU

    def sweep(self, s: np.ndarray) -> np.ndarray:
        if self.kind is EngineKind.TRIANGULAR:
            return step(self.op, s)
        if self.kind is EngineKind.DENSE:
            return dense_step(self.op, s, self._factor)
        return self._factor.solve(self.op.rhs(s))


def _is_diverged(s: np.ndarray, res: float) -> bool:
    return not np.isfinite(res) or res > DIVERGENCE_THRESHOLD or not np.all(np.isfinite(s))


def solve(p: LcpProblem, spec: SplittingSpec, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """
    Run the modulus iteration until Res(z) < epsilon

    Args:
        p: problem; spec must be built from p.A
        spec: splitting and modulus parameters
        cfg: stopping rule and start vector (defaults when None)

    Returns:
        SolveReport; iterations counts completed updates of s, so a start that
        already satisfies the tolerance reports 0
    """
    cfg = cfg or SolverConfig()
    if spec.A.n != p.n:
        raise DimensionMismatchError(p.n, spec.A.n, what="splitting matrix")
    started = time.perf_counter()

    op = assemble_operator(spec, p.q)
    engine = ModulusIterationEngine(op, cfg.engine)
    r = spec.r

    s = cfg.initial_vector(p.n)
    z = recover_z(s, r)
    res = residual(p, z)
    history = [res] if cfg.record_history else None
    iterations = 0
    status = Status.MAX_ITERS

    while True:
        if _is_diverged(s, res):
            status = Status.DIVERGED
            break
        if res < cfg.epsilon:
            status = Status.CONVERGED
            break
        if iterations >= cfg.max_iters:
            break
        s = engine.sweep(s)
        iterations += 1
        z = recover_z(s, r)
        res = residual(p, z) if np.all(np.isfinite(z)) else float("inf")
        if history is not None:
            history.append(res)
        logger.debug("%s sweep %d: residual %.3e", spec.name.value, iterations, res)

    elapsed = time.perf_counter() - started
    if status is Status.DIVERGED:
        logger.warning("%s diverged on %s after %d sweeps (residual %.3e)",
                       spec.name.value, p.name, iterations, res)
    else:
        logger.info("%s on %s: %s in %d sweeps, residual %.3e, %.4fs",
                    spec.name.value, p.name, status.value, iterations, res, elapsed)
    return SolveReport(status=status, iterations=iterations, final_residual=float(res),
                       z=z, s=s, wall_time=elapsed, method=spec.name.value,
                       residual_history=history)


def fixed_point_start(spec: SplittingSpec, z_star, w_star=None) -> np.ndarray:
    """
    s* = r (z* - Ω⁻¹ w*) / 2 for a known solution pair

    Any fixed point satisfies r w = Ω(|s| - s), so the Ω⁻¹ w term carries r too.
    """
    zv = as_vector(z_star, spec.A.n, what="z")
    wv = np.zeros_like(zv) if w_star is None else as_vector(w_star, spec.A.n, what="w")
    return spec.r * (zv - wv / spec.omega.entries) / 2.0
