"""Operators on the three-spin Hilbert space.

The Hilbert space is the tensor product of three spin-1/2 sites with the
computational basis ``|s1 s2 s3>``.  Site 1 is the most significant factor,
so basis index ``i = 4*b1 + 2*b2 + b3`` with ``b = 0`` for spin up and
``b = 1`` for spin down (``sigma_z |up> = +|up>``).

Two ladder-operator conventions are supported:

``unhalved``
    ``sigma_pm = sigma_x +- i sigma_y`` (matrix entries of modulus 2).
``halved``
    ``sigma_pm = (sigma_x +- i sigma_y) / 2`` (standard raising/lowering).

Every halved operator equals its unhalved counterpart scaled by 1/2 per
ladder factor; the collective jump operator carries two factors and scales
by 1/4.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

HILBERT_DIM = 8
N_SITES = 3
#: nearest-neighbour pairs on the triangle (all three pairs)
PAIRS = ((1, 2), (2, 3), (1, 3))

CONVENTIONS = ("unhalved", "halved")
DIRECTIONS = ("+", "-")

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

_HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Physical and convention parameters of the model.

    Parameters
    ----------
    alpha : float
        Transverse field strength.  Must be >= 0 (the pair coupling alone
        defines the model at ``alpha = 0``).
    b_field : float
        Longitudinal field B.  The intended regime is ``b_field << alpha``;
        a warning is emitted when ``b_field >= alpha / 2``.
    gamma_coll : float
        Collective damping rate Gamma (>= 0).
    gamma_single : float
        Single-spin damping rate gamma (>= 0).
    nbar : float
        Mean bath occupation (>= 0).
    convention : str
        Ladder-operator convention, ``"unhalved"`` (default) or ``"halved"``.
    """

    alpha: float = 10.0
    b_field: float = 0.5
    gamma_coll: float = 0.05
    gamma_single: float = 0.0
    nbar: float = 0.0
    convention: str = "unhalved"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.gamma_coll >= 0:
            raise ValueError(f"gamma_coll must be >= 0, got {self.gamma_coll}")
        if not self.gamma_single >= 0:
            raise ValueError(f"gamma_single must be >= 0, got {self.gamma_single}")
        if not self.nbar >= 0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if self.convention not in CONVENTIONS:
            raise ValueError(
                f"convention must be one of {CONVENTIONS}, got {self.convention!r}"
            )
        if self.b_field > 0 and self.b_field >= self.alpha / 2:
            warnings.warn(
                f"b_field={self.b_field} is not small against alpha={self.alpha}; "
                "the model is intended for b_field << alpha",
                stacklevel=2,
            )


@dataclass(frozen=True)
class SpinOperator:
    """Dense complex operator, either a 2x2 single-site block or an 8x8
    three-spin operator.

    When ``hermitian_hint`` is set the matrix is checked to be Hermitian to
    1e-12 at construction.
    """

    matrix: np.ndarray
    hermitian_hint: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, HILBERT_DIM):
            raise ValueError(f"expected a 2x2 or 8x8 matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.hermitian_hint and np.abs(m - m.conj().T).max() >= _HERMITIAN_TOL:
            raise ValueError("hermitian_hint set but matrix is not Hermitian to 1e-12")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _as_matrix(op) -> np.ndarray:
    """Accept a SpinOperator or a bare ndarray."""
    if isinstance(op, SpinOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def pauli(axis: str) -> SpinOperator:
    """Return the standard 2x2 Pauli matrix for ``axis`` in {"x", "y", "z"}."""
    try:
        m = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[axis]
    except KeyError:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None
    return SpinOperator(m, hermitian_hint=True)


def embed(op, site: int) -> SpinOperator:
    """Embed a 2x2 operator at ``site`` in {1, 2, 3}, identity elsewhere.

    Site ordering is fixed as ``1 (x) 2 (x) 3``.
    """
    m = _as_matrix(op)
    if m.shape != (2, 2):
        raise ValueError(f"embed expects a 2x2 operator, got shape {m.shape}")
    if site not in (1, 2, 3):
        raise ValueError(f"site must be in (1, 2, 3), got {site}")
    factors = [IDENTITY_2, IDENTITY_2, IDENTITY_2]
    factors[site - 1] = m
    out = np.kron(np.kron(factors[0], factors[1]), factors[2])
    return SpinOperator(out)


def build_hamiltonian(p: ModelParams) -> SpinOperator:
    """Assemble the three-spin Hamiltonian.

    ``H = alpha * sum_i sigma_x^i + sum_<i,j> sigma_x^i sigma_x^j
    - b_field * sum_i sigma_z^i`` with unit pair coupling and the
    nearest-neighbour sum running over all three pairs of the triangle.
    """
    h = np.zeros((HILBERT_DIM, HILBERT_DIM), dtype=complex)
    for i in (1, 2, 3):
        h += p.alpha * embed(PAULI_X, i).matrix - p.b_field * embed(PAULI_Z, i).matrix
    for (i, j) in PAIRS:
        h += embed(PAULI_X, i).matrix @ embed(PAULI_X, j).matrix
    return SpinOperator(h, hermitian_hint=True)


def ladder(site: int, direction: str, convention: str = "unhalved") -> SpinOperator:
    """Single-site ladder operator embedded at ``site``.

    ``direction`` is "+" (raising) or "-" (lowering).  The unhalved
    convention returns ``sigma_x +- i sigma_y``; halved divides by 2.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be '+' or '-', got {direction!r}")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    sign = 1.0 if direction == "+" else -1.0
    block = PAULI_X + 1.0j * sign * PAULI_Y
    if convention == "halved":
        block = block / 2.0
    return embed(block, site)


def collective_jump(direction: str, convention: str = "unhalved") -> SpinOperator:
    """Collective jump operator ``sigma_pm^1 (sigma_pm^2 - sigma_pm^3)``."""
    l1 = ladder(1, direction, convention).matrix
    l2 = ladder(2, direction, convention).matrix
    l3 = ladder(3, direction, convention).matrix
    return SpinOperator(l1 @ (l2 - l3))
