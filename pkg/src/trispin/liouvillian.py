"""Vectorized master-equation generators.

Density matrices are vectorized by column stacking, ``vec(rho) =
rho.flatten(order="F")``, so that ``vec(A rho B) = (B^T kron A) vec(rho)``.
The dissipator uses the factor-2 form

    D[L] rho = 2 L rho L^dag - L^dag L rho - rho L^dag L,

and the full generator is

    W = -i [H, .] + Gc (nbar + 1) D[sm] + Gc nbar D[sp]
        + gs (nbar + 1) sum_i D[sm_i] + gs nbar sum_i D[sp_i]

with ``Gc = gamma_coll``, ``gs = gamma_single``, ``sm``/``sp`` the collective
jump operators and ``sm_i``/``sp_i`` the single-site ladder operators.

Biasing the collective-emission counting field by ``s`` deforms only the
collective sandwich terms:

    W_s = W + 2 Gc (nbar+1) (e^{-s} - 1) (sm . sp)
            + 2 Gc nbar (e^{s} - 1) (sp . sm)

where ``(L . L^dag)`` denotes the vectorized ``rho -> L rho L^dag``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spin_algebra import (
    HILBERT_DIM,
    ModelParams,
    SpinOperator,
    _as_matrix,
    build_hamiltonian,
    collective_jump,
    ladder,
)

_HERM_TOL = 1e-10
_TRACE_TOL = 1e-10
_EIG_TOL = -1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix.

    The matrix must be Hermitian to 1e-10, have unit trace to 1e-10, and
    have eigenvalues >= -1e-10.  ``null_dimension`` reports the dimension of
    the stationary subspace when the matrix was produced by a steady-state
    solve with a degenerate kernel (None otherwise).
    """

    matrix: np.ndarray
    null_dimension: Optional[int] = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() >= _HERM_TOL:
            raise ValueError("density matrix is not Hermitian to 1e-10")
        if abs(np.trace(m).real - 1.0) >= _TRACE_TOL or abs(np.trace(m).imag) >= _TRACE_TOL:
            raise ValueError(f"density matrix trace {np.trace(m)} is not 1 to 1e-10")
        eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if eigs.min() < _EIG_TOL:
            raise ValueError(
                f"density matrix has negative eigenvalue {eigs.min():.3e} below -1e-10"
            )
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Superoperator:
    """Dense vectorized generator.

    ``bias`` is the counting-field value ``s`` the generator was built with
    (0 for the unbiased generator) and ``params`` the model parameters, when
    known.
    """

    matrix: np.ndarray
    bias: float = 0.0
    params: Optional[ModelParams] = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        d = np.sqrt(m.shape[0])
        if d != int(d):
            raise ValueError(f"superoperator dimension {m.shape[0]} is not a square")
        object.__setattr__(self, "matrix", m)

    @property
    def hilbert_dim(self) -> int:
        return int(np.sqrt(self.matrix.shape[0]))


@dataclass(frozen=True)
class JumpChannel:
    """One decay channel: operator, rate prefactor, and the weight its
    jumps contribute to the collective-emission count."""

    operator: SpinOperator
    rate: float
    count_weight: int

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")
        if self.count_weight not in (-1, 0, 1):
            raise ValueError(f"count_weight must be -1, 0, or 1, got {self.count_weight}")


def vectorize(rho) -> np.ndarray:
    """Column-stack an operator into a vector."""
    m = _as_matrix(rho) if not isinstance(rho, DensityMatrix) else rho.matrix
    return m.flatten(order="F")


def unvectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(vec, dtype=complex)
    d = int(np.sqrt(v.size))
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a square")
    return v.reshape((d, d), order="F")


def _sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Vectorized ``rho -> left rho right``."""
    return np.kron(right.T, left)


def dissipator(op, rate: float = 1.0) -> Superoperator:
    """Vectorized ``rate * (2 L . L^dag - {L^dag L, .})`` for jump operator L.

    Works for any square operator (2x2 single-site blocks as well as the
    8x8 three-spin operators).
    """
    l_mat = _as_matrix(op)
    ident = np.eye(l_mat.shape[0], dtype=complex)
    ldl = l_mat.conj().T @ l_mat
    mat = 2.0 * _sandwich(l_mat, l_mat.conj().T) - _sandwich(ldl, ident) - _sandwich(ident, ldl)
    return Superoperator(rate * mat)


def commutator_part(op) -> Superoperator:
    """Vectorized ``rho -> -i [H, rho]``.  H must be Hermitian to 1e-12."""
    h = _as_matrix(op)
    if np.abs(h - h.conj().T).max() >= 1e-12:
        raise ValueError("commutator_part requires a Hermitian operator")
    ident = np.eye(h.shape[0], dtype=complex)
    return Superoperator(-1.0j * (_sandwich(h, ident) - _sandwich(ident, h)))


def build_generator(p: ModelParams) -> Superoperator:
    """Full master-equation generator for parameters ``p`` (64x64)."""
    h = build_hamiltonian(p)
    mat = commutator_part(h).matrix.copy()
    sm = collective_jump("-", p.convention).matrix
    sp = collective_jump("+", p.convention).matrix
    mat += p.gamma_coll * (p.nbar + 1.0) * dissipator(sm).matrix
    if p.nbar > 0:
        mat += p.gamma_coll * p.nbar * dissipator(sp).matrix
    if p.gamma_single > 0:
        for site in (1, 2, 3):
            low = ladder(site, "-", p.convention).matrix
            mat += p.gamma_single * (p.nbar + 1.0) * dissipator(low).matrix
            if p.nbar > 0:
                high = ladder(site, "+", p.convention).matrix
                mat += p.gamma_single * p.nbar * dissipator(high).matrix
    return Superoperator(mat, bias=0.0, params=p)


def tilt_generator(p: ModelParams, s: float) -> Superoperator:
    """Generator biased by the collective-emission counting field ``s``.

    Emission sandwich terms pick up ``e^{-s}``, absorption sandwich terms
    ``e^{s}``; single-site channels are never biased.
    """
    base = build_generator(p)
    mat = base.matrix.copy()
    sm = collective_jump("-", p.convention).matrix
    sp = collective_jump("+", p.convention).matrix
    g = p.gamma_coll
    mat += 2.0 * g * (p.nbar + 1.0) * (np.exp(-s) - 1.0) * _sandwich(sm, sp)
    if p.nbar > 0:
        mat += 2.0 * g * p.nbar * (np.exp(s) - 1.0) * _sandwich(sp, sm)
    return Superoperator(mat, bias=float(s), params=p)


def apply_generator(sop: Superoperator, rho) -> np.ndarray:
    """Apply a vectorized generator to a state and return the matrix result."""
    vec = vectorize(rho)
    if vec.size != sop.matrix.shape[0]:
        raise ValueError(
            f"state dimension {vec.size} does not match generator {sop.matrix.shape[0]}"
        )
    return unvectorize(sop.matrix @ vec)
