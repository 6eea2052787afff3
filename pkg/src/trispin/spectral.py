"""Spectral analysis of the biased generator.

The central object is the dynamical free energy ``theta(s)``: the largest
real part in the spectrum of the biased generator ``W_s``.  Its derivative
``k(s) = -d theta / d s`` is the mean net collective-emission rate of the
trajectory ensemble biased by ``s``.  The module provides

- ``dynamical_free_energy`` / ``theta_scan``: eigenvalue evaluation with
  realness checks, plus grid scans;
- ``activity_fd`` / ``activity_hf``: the activity by Richardson finite
  differences and by first-order perturbation of the leading eigenvalue
  (left/right eigenvector sandwich);
- ``detect_kinks``: locate derivative discontinuities of ``theta`` on a
  scan, refine them by bisection on the plateau boundary, and verify them
  with one-sided slopes;
- ``gc_residual``: deviation from the detailed-balance symmetry
  ``theta(s) = theta(s0 - s)`` with ``s0 = ln((nbar+1)/nbar)``;
- ``steady_state``: stationary state of the unbiased generator, with the
  kernel dimension reported when it is degenerate;
- ``dark_subspace``: the largest Hamiltonian-invariant subspace annihilated
  by both collective jump operators, with eigenenergies and residuals.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la

from .liouvillian import (
    DensityMatrix,
    Superoperator,
    _sandwich,
    build_generator,
    tilt_generator,
    unvectorize,
    vectorize,
)
from .spin_algebra import (
    HILBERT_DIM,
    ModelParams,
    build_hamiltonian,
    collective_jump,
    ladder,
)


class NumericalCheckError(Exception):
    """A numerical consistency check failed."""


class ComplexLeadingEigenvalueError(NumericalCheckError):
    """Every near-leading eigenvalue has a significant imaginary part."""


class DegenerateLeadingEigenvalueError(NumericalCheckError):
    """The leading eigenvalue is not separated from the rest of the
    spectrum, so perturbative formulas are ill-defined."""


class StructureError(NumericalCheckError):
    """The generator's kernel does not have the expected structure."""


class KinkStraddleError(ValueError):
    """A finite-difference stencil spans a derivative discontinuity."""


#: candidates within this distance of the max real part are considered leading
_REAL_WINDOW = 1e-9
#: max acceptable imaginary part of the leading eigenvalue
_IMAG_TOL = 1e-8
#: minimum real-part gap for perturbative (left/right sandwich) formulas
_GAP_TOL = 1e-10
#: absolute singular-value cutoff for kernel extraction
_KERNEL_TOL = 1e-10
#: relative singular-value cutoff for subspace computations
_SUBSPACE_RTOL = 1e-10
#: theta values below this are treated as exactly zero (plateau)
_PLATEAU_TOL = 1e-11


@dataclass(frozen=True)
class KinkInfo:
    """A verified derivative discontinuity of ``theta``."""

    location: float
    activity_left: float
    activity_right: float
    delta_activity: float


@dataclass(frozen=True)
class ScanResult:
    """Grid evaluation of ``theta`` and the activity.

    ``activity`` is the negative grid gradient of ``theta``; near a kink the
    grid value smears the jump, so refined one-sided values live in
    ``kinks``.  If the grid contains ``s = 0`` the corresponding ``theta``
    must vanish to 1e-9 (the unbiased generator is trace preserving).
    """

    s_values: np.ndarray
    theta: np.ndarray
    activity: np.ndarray
    params: ModelParams
    kinks: Tuple[KinkInfo, ...] = field(default=())

    def __post_init__(self):
        s = np.asarray(self.s_values, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        act = np.asarray(self.activity, dtype=float)
        if not (s.ndim == 1 and s.shape == th.shape == act.shape):
            raise ValueError("s_values, theta, activity must be 1-d and equal length")
        if s.size >= 2 and not np.all(np.diff(s) > 0):
            raise ValueError("s_values must be strictly increasing")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(th))):
            raise ValueError("s_values and theta must be finite")
        at_zero = np.abs(s) < 1e-12
        if np.any(at_zero) and np.abs(th[at_zero]).max() >= 1e-9:
            raise NumericalCheckError(
                f"theta at s=0 is {th[at_zero][0]:.3e}; the unbiased generator "
                "must have a zero leading eigenvalue to 1e-9"
            )
        object.__setattr__(self, "s_values", s)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "activity", act)
        object.__setattr__(self, "kinks", tuple(self.kinks))


@dataclass(frozen=True)
class DarkSubspace:
    """Hamiltonian-invariant subspace annihilated by both collective jumps.

    ``basis`` holds orthonormal columns that are eigenvectors of the
    Hamiltonian restricted to the subspace; ``energies`` are the matching
    eigenvalues (ascending); ``residuals`` the per-column max of the
    eigen-residual and the norms of both collective jumps applied to the
    column.  ``min_lowering_singular_value`` is the smallest singular value
    of a single-site lowering operator restricted to the subspace (nonzero:
    single-site decay removes population from the subspace), and
    ``single_site_kernel_dimension`` is the dimension of the joint kernel
    of the single-site ladder pair over the full space (zero: no state is
    dark with respect to single-site decay).
    """

    basis: np.ndarray
    dimension: int
    energies: np.ndarray
    residuals: np.ndarray
    min_lowering_singular_value: float
    single_site_kernel_dimension: int


def _leading_eigenvalue(matrix: np.ndarray) -> float:
    """Largest real part of the spectrum, with a realness check.

    Among all eigenvalues whose real part lies within 1e-9 of the maximum,
    at least one must have |imag| <= 1e-8; otherwise the leading behaviour
    is oscillatory and a scalar free energy is meaningless.
    """
    eigs = la.eigvals(matrix)
    top = eigs.real.max()
    candidates = eigs[eigs.real >= top - _REAL_WINDOW]
    if np.abs(candidates.imag).min() > _IMAG_TOL:
        raise ComplexLeadingEigenvalueError(
            f"leading eigenvalue {candidates[np.argmin(np.abs(candidates.imag))]:.6e} "
            "has a significant imaginary part"
        )
    return float(top)


def _leading_triple(matrix: np.ndarray):
    """Leading eigenvalue with left and right eigenvectors.

    Raises when the two largest real parts are closer than 1e-10, which
    makes the left/right sandwich ill-conditioned.
    """
    w, vl, vr = la.eig(matrix, left=True, right=True)
    order = np.argsort(w.real)[::-1]
    gap = w.real[order[0]] - w.real[order[1]]
    if gap < _GAP_TOL:
        raise DegenerateLeadingEigenvalueError(
            f"leading real parts separated by {gap:.3e} < 1e-10"
        )
    idx = order[0]
    if abs(w[idx].imag) > _IMAG_TOL:
        raise ComplexLeadingEigenvalueError(
            f"leading eigenvalue {w[idx]:.6e} has a significant imaginary part"
        )
    return w[idx], vl[:, idx], vr[:, idx]


def dynamical_free_energy(p: ModelParams, s: float) -> float:
    """``theta(s)``: largest real part of the spectrum of the biased
    generator."""
    return _leading_eigenvalue(tilt_generator(p, s).matrix)


def activity_fd(p: ModelParams, s: float, h: float = 1e-4) -> float:
    """Activity ``k(s) = -theta'(s)`` by Richardson-extrapolated central
    differences.

    Raises :class:`KinkStraddleError` when the one-sided slopes across the
    stencil disagree, which indicates a derivative discontinuity inside
    ``[s - h, s + h]``.
    """
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h}")
    th_m, th_mh, th_0, th_ph, th_p = (
        dynamical_free_energy(p, s - h),
        dynamical_free_energy(p, s - h / 2),
        dynamical_free_energy(p, s),
        dynamical_free_energy(p, s + h / 2),
        dynamical_free_energy(p, s + h),
    )
    d_left = (th_0 - th_m) / h
    d_right = (th_p - th_0) / h
    disagreement = abs(d_left - d_right)
    scale = max(abs(d_left), abs(d_right))
    if disagreement > 1e-6 and disagreement > 0.1 * scale:
        raise KinkStraddleError(
            f"one-sided slopes {d_left:.6e} and {d_right:.6e} disagree: the "
            f"stencil [{s - h}, {s + h}] straddles a kink; evaluate one-sided "
            "by shifting s away from the kink or reducing h"
        )
    coarse = (th_p - th_m) / (2 * h)
    fine = (th_ph - th_mh) / h
    return float(-(4 * fine - coarse) / 3)


def _tilt_derivative(p: ModelParams, s: float) -> np.ndarray:
    """``d W_s / d s`` as a dense matrix."""
    sm = collective_jump("-", p.convention).matrix
    sp = collective_jump("+", p.convention).matrix
    g = p.gamma_coll
    out = -2.0 * g * (p.nbar + 1.0) * np.exp(-s) * _sandwich(sm, sp)
    if p.nbar > 0:
        out = out + 2.0 * g * p.nbar * np.exp(s) * _sandwich(sp, sm)
    return out


def activity_hf(p: ModelParams, s: float) -> float:
    """Activity from first-order perturbation theory of the leading
    eigenvalue: ``k = -<l| dW_s/ds |r> / <l|r>``.

    Exact up to the eigensolve, so it needs no step-size tuning, but it
    requires a leading eigenvalue separated by more than 1e-10 (it fails on
    the inactive plateau, where the leading eigenvalue is degenerate).
    """
    _, left, right = _leading_triple(tilt_generator(p, s).matrix)
    dv = _tilt_derivative(p, s)
    num = left.conj() @ (dv @ right)
    den = left.conj() @ right
    return float(-(num / den).real)


def theta_scan(p: ModelParams, s_values, jump_threshold: Optional[float] = None) -> ScanResult:
    """Evaluate ``theta`` on a grid, differentiate it numerically, and run
    kink detection.

    The activity column is the negative ``numpy.gradient`` of ``theta`` on
    the grid; the refined one-sided activities at each detected kink live
    in the result's ``kinks``.  ``jump_threshold`` defaults to twice the
    median activity step between neighbouring grid points: a permissive
    candidate gate, since the one-sided secant verification inside
    :func:`detect_kinks` rejects smooth crossovers regardless.
    """
    s = np.asarray(s_values, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("s_values must be a 1-d grid with at least 2 points")
    if not np.all(np.diff(s) > 0):
        raise ValueError("s_values must be strictly increasing")
    theta = np.array([dynamical_free_energy(p, si) for si in s])
    activity = -np.gradient(theta, s)
    scan = ScanResult(s_values=s, theta=theta, activity=activity, params=p)
    if jump_threshold is None:
        jump_threshold = max(1e-8, 2.0 * float(np.median(np.abs(np.diff(activity)))))
    kinks = detect_kinks(scan, jump_threshold)
    return ScanResult(s_values=s, theta=theta, activity=activity, params=p, kinks=kinks)


def _refine_kink(p: ModelParams, lo: float, hi: float) -> Optional[float]:
    """Bisect on the plateau predicate ``theta(s) > 1e-11``.

    A genuine kink of this generator is the boundary of the region where
    ``theta`` vanishes identically, so the predicate changes value across
    it.  Returns None when the bracket does not straddle the boundary.
    """
    above_lo = dynamical_free_energy(p, lo) > _PLATEAU_TOL
    above_hi = dynamical_free_energy(p, hi) > _PLATEAU_TOL
    if above_lo == above_hi:
        return None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if (dynamical_free_energy(p, mid) > _PLATEAU_TOL) == above_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def detect_kinks(scan: ScanResult, jump_threshold: float) -> Tuple[KinkInfo, ...]:
    """Locate and verify derivative discontinuities of ``theta`` on a scan.

    Grid candidates are interior points where the activity changes by more
    than ``jump_threshold`` between neighbours and the second difference of
    ``theta`` exceeds ten times its median magnitude.  Consecutive
    candidates are grouped, each group is refined by bisection on the
    plateau boundary, and the refined location is kept only if one-sided
    secant slopes a distance 1e-6 from it differ by more than
    ``max(1e-4, 1e-3 * activity range)``.  A smooth crossover, however
    sharp on the grid, fails the one-sided test and is rejected.
    """
    if not jump_threshold > 0:
        raise ValueError(f"jump_threshold must be > 0, got {jump_threshold}")
    s, theta, act, p = scan.s_values, scan.theta, scan.activity, scan.params
    n = s.size
    if n < 5:
        return ()
    d2 = np.abs(theta[:-2] - 2.0 * theta[1:-1] + theta[2:])
    med = np.median(d2)
    dk = np.abs(np.diff(act))
    candidates = []
    for i in range(1, n - 1):
        curvature_ok = d2[i - 1] > 10.0 * med
        jump_ok = max(dk[i - 1], dk[i]) > jump_threshold
        if curvature_ok and jump_ok:
            candidates.append(i)
    if not candidates:
        return ()
    groups = [[candidates[0]]]
    for i in candidates[1:]:
        if i == groups[-1][-1] + 1:
            groups[-1].append(i)
        else:
            groups.append([i])
    verify_tol = max(1e-4, 1e-3 * (act.max() - act.min()))
    delta = 1e-6
    kinks = []
    for grp in groups:
        lo = s[max(grp[0] - 1, 0)]
        hi = s[min(grp[-1] + 1, n - 1)]
        star = _refine_kink(p, lo, hi)
        if star is None:
            star = s[grp[int(np.argmax([d2[i - 1] for i in grp]))]]
        th_star = dynamical_free_energy(p, star)
        k_left = -(th_star - dynamical_free_energy(p, star - delta)) / delta
        k_right = -(dynamical_free_energy(p, star + delta) - th_star) / delta
        if abs(k_left - k_right) < verify_tol:
            continue
        kinks.append(
            KinkInfo(
                location=float(star),
                activity_left=float(k_left),
                activity_right=float(k_right),
                delta_activity=float(k_left - k_right),
            )
        )
    return tuple(kinks)


def gc_residual(p: ModelParams, s_values) -> float:
    """Max over the grid of ``|theta(s) - theta(s0 - s)|`` with
    ``s0 = ln((nbar + 1) / nbar)``.

    Vanishes (to numerical precision) when collective dissipation is the
    only decay channel; single-site decay breaks the symmetry.  Requires
    ``nbar > 0`` (the symmetry point is at infinity otherwise).
    """
    if p.nbar <= 0:
        raise ValueError("gc_residual requires nbar > 0; s0 = ln((nbar+1)/nbar) "
                         "is infinite at nbar = 0")
    s0 = np.log((p.nbar + 1.0) / p.nbar)
    s = np.asarray(s_values, dtype=float)
    worst = 0.0
    for si in s:
        worst = max(
            worst,
            abs(dynamical_free_energy(p, si) - dynamical_free_energy(p, s0 - si)),
        )
    return float(worst)


def _kernel_basis(matrix: np.ndarray, atol: float = _KERNEL_TOL) -> np.ndarray:
    """Orthonormal basis of the kernel, singular values below ``atol``."""
    _, sv, vh = la.svd(matrix)
    svfull = np.concatenate([sv, np.zeros(matrix.shape[1] - sv.size)])
    return vh.conj().T[:, svfull <= atol]


def steady_state(p: ModelParams) -> DensityMatrix:
    """Stationary state of the unbiased generator.

    With single-site decay on, the kernel must be one-dimensional and the
    unique stationary state is returned.  With collective decay only, the
    kernel is degenerate; the returned representative is the stationary
    state reached from the maximally mixed state after one collective
    emission (the long-time state of the emitting mode), and
    ``null_dimension`` reports the kernel dimension.
    """
    if p.gamma_coll == 0 and p.gamma_single == 0:
        raise ValueError("no dissipative channels: gamma_coll and gamma_single are 0")
    w = build_generator(p)
    right = _kernel_basis(w.matrix)
    dim = right.shape[1]
    if dim == 0:
        raise StructureError("generator kernel is empty at tolerance 1e-10")
    if p.gamma_single > 0:
        if dim != 1:
            raise StructureError(
                f"expected a unique stationary state with single-site decay on, "
                f"found kernel dimension {dim}"
            )
        rho = unvectorize(right[:, 0])
        tr = np.trace(rho)
        if abs(tr) < 1e-12:
            raise StructureError("kernel vector is traceless; no stationary state")
        rho = rho / tr
        rho = (rho + rho.conj().T) / 2.0
        return DensityMatrix(rho, null_dimension=1)
    left = _kernel_basis(w.matrix.conj().T)
    if left.shape[1] != dim:
        raise StructureError(
            f"left/right kernel dimensions differ: {left.shape[1]} vs {dim}"
        )
    sm = collective_jump("-", p.convention).matrix
    seed = sm @ (np.eye(HILBERT_DIM, dtype=complex) / HILBERT_DIM) @ sm.conj().T
    seed = seed / np.trace(seed)
    coef = la.solve(left.conj().T @ right, left.conj().T @ vectorize(seed))
    rho = unvectorize(right @ coef)
    rho = (rho + rho.conj().T) / 2.0
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho, null_dimension=int(dim))


def _invariant_subspace(q: np.ndarray, h: np.ndarray, rtol: float = _SUBSPACE_RTOL) -> np.ndarray:
    """Largest ``h``-invariant subspace contained in span(q).

    Iteratively removes directions that ``h`` maps outside the current
    span.  Singular values are compared against ``rtol * ||h||_2`` — an
    absolute scale — because the residual matrix degenerates to pure noise
    exactly when the subspace becomes invariant.
    """
    scale = la.norm(h, 2)
    dim = h.shape[0]
    while q.shape[1] > 0:
        proj_out = np.eye(dim, dtype=complex) - q @ q.conj().T
        m = proj_out @ h @ q
        _, sv, vh = la.svd(m, full_matrices=True)
        svfull = np.concatenate([sv, np.zeros(q.shape[1] - sv.size)])
        null = vh.conj().T[:, svfull <= rtol * scale]
        if null.shape[1] == q.shape[1]:
            return q
        if null.shape[1] == 0:
            return q[:, :0]
        q = la.orth(q @ null)
    return q


def dark_subspace(p: ModelParams) -> DarkSubspace:
    """Compute the dark subspace: the largest Hamiltonian-invariant
    subspace annihilated by both collective jump operators.

    States in it never emit and never evolve out of it, so trajectories
    started (or, at zero measure, caught) inside stay silent forever.
    """
    h = build_hamiltonian(p).matrix
    sm = collective_jump("-", p.convention).matrix
    sp = collective_jump("+", p.convention).matrix
    stacked = np.vstack([sm, sp])
    joint = _kernel_basis(stacked, atol=_SUBSPACE_RTOL * la.norm(stacked, 2))
    basis = _invariant_subspace(joint, h)
    dim = basis.shape[1]
    if dim > 0:
        hr = basis.conj().T @ h @ basis
        energies, rot = la.eigh((hr + hr.conj().T) / 2.0)
        basis = basis @ rot
    else:
        energies = np.zeros(0)
    residuals = np.zeros(dim)
    for j in range(dim):
        v = basis[:, j]
        residuals[j] = max(
            la.norm(h @ v - energies[j] * v),
            la.norm(sm @ v),
            la.norm(sp @ v),
        )
    low1 = ladder(1, "-", p.convention).matrix
    if dim > 0:
        min_sv = float(la.svd(low1 @ basis, compute_uv=False).min())
    else:
        min_sv = float("nan")
    raise1 = ladder(1, "+", p.convention).matrix
    single_stack = np.vstack([low1, raise1])
    single_kernel = _kernel_basis(
        single_stack, atol=_SUBSPACE_RTOL * la.norm(single_stack, 2)
    )
    return DarkSubspace(
        basis=basis,
        dimension=int(dim),
        energies=np.asarray(energies, dtype=float),
        residuals=residuals,
        min_lowering_singular_value=min_sv,
        single_site_kernel_dimension=int(single_kernel.shape[1]),
    )


def active_phase_rate(p: ModelParams) -> float:
    """Mean total collective jump rate in the emitting stationary mode.

    Computed with single-site decay switched off (the emitting mode is
    defined by the collective channels); used as the natural rate scale for
    classifying bright and dark intervals of a trajectory.
    """
    import dataclasses

    p0 = dataclasses.replace(p, gamma_single=0.0)
    rho = steady_state(p0).matrix
    sm = collective_jump("-", p.convention).matrix
    sp = collective_jump("+", p.convention).matrix
    rate = 2.0 * p.gamma_coll * (p.nbar + 1.0) * np.trace(sp @ sm @ rho).real
    if p.nbar > 0:
        rate += 2.0 * p.gamma_coll * p.nbar * np.trace(sm @ sp @ rho).real
    return float(rate)
