"""Brute-force steady-state solver on truncated Fock spaces.

Independent oracle for the linear lowering: builds the vacuum-input
Lindblad generator of a triple,

    d rho / dt = -i [H, rho] + sum_k ( L_k rho L_k† - {L_k† L_k, rho}/2 ),

vectorizes it (column stacking) and solves for the null state.  Scalar S
drops out of the master equation for vacuum inputs; coherent drives must
be embedded in the triple (``slh.embed_inputs`` or a drive component).
Frequencies should already be detunings (``slh.detune``) so the drive is
static in the frame used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ops import DimensionCapError, OperatorExpr
from .slh import SLHTriple

__all__ = [
    "DensityMatrix",
    "DegenerateSteadyStateError",
    "liouvillian",
    "steady_state_rho",
    "expectation",
    "converged_steady_state",
    "GENERATOR_DIM_CAP",
]

# the vectorized generator is capped at GENERATOR_DIM_CAP^2 entries per side,
# i.e. joint Fock dimension <= 64
GENERATOR_DIM_CAP = 4096

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = 1e-10


class DegenerateSteadyStateError(ArithmeticError):
    """The generator's null space is not one-dimensional (or the solve failed)."""


@dataclass
class DensityMatrix:
    """Validated steady-state density matrix on the joint truncated space."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        d = int(np.prod(self.dims))
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({d},{d})")
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > HERM_TOL:
            raise ValueError(f"density matrix not Hermitian ({herm:.3e})")
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} != 1")
        evals = np.linalg.eigvalsh(self.matrix)
        if evals.min() < -EIG_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {evals.min():.3e}")

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def _dims_tuple(G: SLHTriple, dims) -> tuple[int, ...]:
    n = len(G.registry)
    if isinstance(dims, int):
        dims = (dims,) * n
    dims = tuple(int(d) for d in dims)
    if len(dims) != n:
        raise ValueError(f"need {n} truncation dims, got {len(dims)}")
    if any(d < 2 for d in dims):
        raise ValueError("per-mode truncation must be >= 2")
    return dims


def liouvillian(G: SLHTriple, dims) -> sp.csr_matrix:
    """Vectorized Lindblad generator (sparse, column-stacking convention)."""
    if not G.has_scalar_S():
        raise ValueError("oracle requires scalar S (vacuum inputs)")
    dims = _dims_tuple(G, dims)
    d = int(np.prod(dims))
    if d * d > GENERATOR_DIM_CAP * GENERATOR_DIM_CAP or d > GENERATOR_DIM_CAP:
        raise DimensionCapError(
            f"generator dimension {d * d} exceeds cap "
            f"{GENERATOR_DIM_CAP}x{GENERATOR_DIM_CAP}")
    eye = sp.identity(d, format="csr", dtype=complex)
    H = sp.csr_matrix(G.H.to_matrix(dims, cap=GENERATOR_DIM_CAP))
    M = -1j * (sp.kron(eye, H, format="csr") - sp.kron(H.T, eye, format="csr"))
    for entry in G.L:
        if entry.is_zero():
            continue
        Lk = sp.csr_matrix(entry.to_matrix(dims, cap=GENERATOR_DIM_CAP))
        LdL = (Lk.conj().T @ Lk).tocsr()
        M = M + sp.kron(Lk.conj(), Lk, format="csr") \
            - 0.5 * sp.kron(eye, LdL, format="csr") \
            - 0.5 * sp.kron(LdL.T, eye, format="csr")
    return M.tocsr()


def steady_state_rho(superop: sp.spmatrix, dims) -> DensityMatrix:
    """Normalized null-space solution of the generator.

    For small generators the null space is found by dense SVD, which also
    verifies uniqueness through the singular-value gap.  Larger generators
    use a trace-constrained sparse solve cross-checked by the residual and
    a second, independent constraint row.
    """
    dims = tuple(int(x) for x in np.atleast_1d(dims))
    d = int(np.prod(dims))
    if superop.shape != (d * d, d * d):
        raise ValueError("superoperator does not match dims")

    scale = max(abs(superop).max(), 1.0)
    M = (superop / scale).tocsr()

    if d <= 20:  # dense SVD path: definitive rank check
        dense = M.toarray()
        _, s, vh = np.linalg.svd(dense)
        null_tol = max(1e-12, s[0] * 1e-12)
        if s[-1] > null_tol:
            raise DegenerateSteadyStateError(
                f"no null vector (smallest singular value {s[-1]:.3e})")
        if len(s) > 1 and s[-2] <= null_tol:
            raise DegenerateSteadyStateError(
                "generator null space is degenerate (rank deficiency > 1)")
        vec = vh[-1].conj()
    else:
        vec = _trace_constrained_solve(M, d, diag_index=0)
        resid = np.max(np.abs(M @ vec)) / max(np.max(np.abs(vec)), 1e-300)
        if not np.isfinite(resid) or resid > 1e-8:
            raise DegenerateSteadyStateError(
                f"sparse null-space solve did not converge (residual {resid:.3e})")
        # uniqueness proxy: replacing a different (dependent) diagonal row
        # must reproduce the same state
        vec2 = _trace_constrained_solve(M, d, diag_index=1)
        diff = np.max(np.abs(vec / np.trace(vec.reshape(d, d, order="F"))
                             - vec2 / np.trace(vec2.reshape(d, d, order="F"))))
        if not np.isfinite(diff) or diff > 1e-6:
            raise DegenerateSteadyStateError(
                f"generator null space appears degenerate (solutions differ by {diff:.3e})")

    rho = vec.reshape(d, d, order="F")
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise DegenerateSteadyStateError("null vector has zero trace")
    rho = rho / tr
    return DensityMatrix(matrix=rho, dims=dims)


def _trace_constrained_solve(M: sp.csr_matrix, d: int,
                             diag_index: int = 0) -> np.ndarray:
    """Replace one generator row with the trace functional and solve = 1.

    Trace preservation makes the rows at vectorized diagonal positions
    linearly dependent on the rest, so replacing one of those keeps the
    system square and nonsingular when the null space is 1-d.
    """
    row = diag_index * d + diag_index
    A = M.tolil(copy=True)
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[np.arange(d) * d + np.arange(d)] = 1.0  # column-stacked diagonal
    A[row, :] = trace_row
    b = np.zeros(d * d, dtype=complex)
    b[row] = 1.0
    try:
        x = spla.spsolve(A.tocsc(), b)
    except RuntimeError as exc:
        raise DegenerateSteadyStateError(f"sparse solve failed: {exc}") from exc
    return np.asarray(x, dtype=complex)


def expectation(op: OperatorExpr, rho: DensityMatrix) -> complex:
    """trace(to_matrix(op) rho)."""
    m = op.to_matrix(rho.dims, cap=GENERATOR_DIM_CAP)
    if m.shape != rho.matrix.shape:
        raise ValueError("operator and density matrix dimensions differ")
    return complex(np.trace(m @ rho.matrix))


def converged_steady_state(G: SLHTriple, dims=4, rel_tol: float = 1e-6,
                           max_doublings: int = 3):
    """Steady state with per-mode truncation doubled until mode amplitudes move
    less than ``rel_tol`` (relative), within the generator size cap.

    Returns ``(rho, dims, delta, converged)`` where ``delta`` is the last
    relative change of the mode-amplitude vector.
    """
    dims = _dims_tuple(G, dims)
    reg = G.registry

    def amps(rho: DensityMatrix) -> np.ndarray:
        return np.array([expectation(OperatorExpr.annihilation(reg, m), rho)
                         for m in reg])

    joint_cap = int(GENERATOR_DIM_CAP ** 0.5)  # generator stays <= 4096^2
    rho = steady_state_rho(liouvillian(G, dims), dims)
    prev = amps(rho)
    delta = np.inf
    for _ in range(max_doublings):
        bigger = tuple(2 * x for x in dims)
        if int(np.prod(bigger)) > joint_cap:
            break
        rho_big = steady_state_rho(liouvillian(G, bigger), bigger)
        cur = amps(rho_big)
        denom = max(float(np.max(np.abs(cur))), 1e-300)
        delta = float(np.max(np.abs(cur - prev))) / denom
        rho, dims, prev = rho_big, bigger, cur
        if delta < rel_tol:
            return rho, dims, delta, True
    return rho, dims, delta, delta < rel_tol
