"""Exact two- and four-particle Hamiltonians, symmetries, and pair diagnostics.

The four-particle space is spanned by distinguishable-particle position
kets ordered (A1, B1, A2, B2); bosonic or fermionic constituent statistics
are imposed by symmetrizing states, not the basis.  Constituents of
different type attract/repel with +U on contact, constituents of the same
type with -U, so two intact composites carry interaction energy 2U no
matter how they are arranged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DegenerateInputError, DimensionMismatchError, InvalidParameterError
from .model import ModelParams, SparseHermitianOperator, StateVector, build_h1

__all__ = [
    "TwoParticleBasis",
    "FourParticleBasis",
    "SymmetrySector",
    "PermutationOperator",
    "PairedBasis",
    "BoundBand",
    "build_h2",
    "build_h4",
    "build_symmetry_ops",
    "symmetrize",
    "bound_band",
    "paired_subspace",
]


@dataclass(frozen=True)
class SymmetrySector:
    """Simultaneous eigenvalues (eps_A, eps_B, parity) of E_A, E_B, P."""

    eps_a: int
    eps_b: int
    parity: int | None = None

    def __post_init__(self):
        for name, val in (("eps_a", self.eps_a), ("eps_b", self.eps_b)):
            if val not in (-1, 1):
                raise InvalidParameterError(f"{name} must be +-1, got {val}")
        if self.parity not in (-1, 1, None):
            raise InvalidParameterError(f"parity must be +-1 or None, got {self.parity}")


@dataclass(frozen=True)
class TwoParticleBasis:
    """|l, l'> kets, offset = offset(l) * L + offset(l'), lexicographic."""

    L: int

    @property
    def dim(self) -> int:
        return self.L * self.L

    @property
    def label(self) -> str:
        return f"two_particle(L={self.L})"

    def index(self, l: int, lp: int) -> int:
        h = (self.L - 1) // 2
        return (l + h) * self.L + (lp + h)

    def config(self, n: int) -> tuple[int, int]:
        h = (self.L - 1) // 2
        return n // self.L - h, n % self.L - h


@dataclass(frozen=True)
class FourParticleBasis:
    """|l, l', m, m'> kets ordered (A1, B1, A2, B2), row-major offsets."""

    L: int

    @property
    def dim(self) -> int:
        return self.L ** 4

    @property
    def label(self) -> str:
        return f"four_particle(L={self.L})"

    def index(self, c: tuple[int, int, int, int]) -> int:
        h = (self.L - 1) // 2
        n = 0
        for x in c:
            if not -h <= x <= h:
                raise InvalidParameterError(f"site {x} outside the lattice")
            n = n * self.L + (x + h)
        return n

    def config(self, n: int) -> tuple[int, int, int, int]:
        h, L = (self.L - 1) // 2, self.L
        out = []
        for _ in range(4):
            out.append(n % L - h)
            n //= L
        return tuple(reversed(out))

    def coordinate_arrays(self) -> tuple[np.ndarray, ...]:
        """Site labels of all four particles for every flat offset."""
        L, h = self.L, (self.L - 1) // 2
        n = np.arange(self.dim)
        x4 = n % L
        x3 = (n // L) % L
        x2 = (n // L ** 2) % L
        x1 = n // L ** 3
        return x1 - h, x2 - h, x3 - h, x4 - h


class PermutationOperator:
    """Involutive permutation of basis kets (exchange or reflection)."""

    def __init__(self, perm: np.ndarray, label: str = ""):
        perm = np.asarray(perm, dtype=np.int64)
        if not np.array_equal(perm[perm], np.arange(perm.size)):
            raise InvalidParameterError(f"{label or 'permutation'} is not an involution")
        self.perm = perm
        self.dim = perm.size
        self.label = label

    def apply_amp(self, amp: np.ndarray) -> np.ndarray:
        return amp[self.perm]

    def apply(self, v: StateVector) -> StateVector:
        if v.basis.dim != self.dim:
            raise DimensionMismatchError("permutation and state dimensions differ")
        return StateVector(v.basis, self.apply_amp(v.amp))

    def expectation(self, v: StateVector) -> float:
        return float(np.real(np.vdot(v.amp, self.apply_amp(v.amp))))

    def commutes_with(self, other: "PermutationOperator") -> bool:
        return np.array_equal(self.perm[other.perm], other.perm[self.perm])

    def commutes_with_operator(self, op: SparseHermitianOperator) -> bool:
        """Exact check of [op, permutation] = 0 on the stored entries."""
        m = op.to_csr()
        permuted = m[self.perm][:, self.perm]
        return (permuted != m).nnz == 0


def build_h2(params: ModelParams) -> SparseHermitianOperator:
    """Two distinguishable particles on the chain with contact interaction U."""
    L = params.L
    basis = TwoParticleBasis(L)
    h1 = build_h1(params).to_csr()
    rows, cols, vals = [], [], []
    coo = h1.tocoo()
    # h1 (x) 1 + 1 (x) h1, keeping row <= col only
    for i, j, v in zip(coo.row, coo.col, coo.data):
        if i > j:
            continue
        for a in range(L):
            if i == j:
                rows.append(i * L + a)
                cols.append(j * L + a)
                vals.append(v)
                rows.append(a * L + i)
                cols.append(a * L + j)
                vals.append(v)
            else:
                rows.append(i * L + a)
                cols.append(j * L + a)
                vals.append(v)
                rows.append(a * L + i)
                cols.append(a * L + j)
                vals.append(v)
    for l in range(L):
        rows.append(l * L + l)
        cols.append(l * L + l)
        vals.append(params.U)
    coo2 = np.lexsort((np.array(cols), np.array(rows)))
    op = SparseHermitianOperator(
        basis.dim,
        np.array(rows)[coo2],
        np.array(cols)[coo2],
        np.array(vals, dtype=np.complex128)[coo2],
        label=f"h2(L={L})",
    )
    return op


def build_h4(params: ModelParams) -> SparseHermitianOperator:
    """Two A and two B particles: four hopping copies plus contact terms.

    Diagonal: +U per coinciding (A, B) pair, -U for A1=A2 and for B1=B2,
    and the barrier mu once per particle sitting on site 0.
    """
    basis = FourParticleBasis(params.L)
    L, dim = params.L, basis.dim
    n = np.arange(dim)
    x1, x2, x3, x4 = basis.coordinate_arrays()

    rows_list, cols_list, vals_list = [], [], []
    for coord, stride in ((x1, L ** 3), (x2, L ** 2), (x3, L), (x4, 1)):
        mask = coord < (L - 1) // 2
        rows_list.append(n[mask])
        cols_list.append(n[mask] + stride)
        vals_list.append(np.full(mask.sum(), -params.J, dtype=np.complex128))

    diag = params.U * (
        (x1 == x2).astype(float)
        + (x1 == x4)
        + (x3 == x2)
        + (x3 == x4)
        - (x1 == x3)
        - (x2 == x4)
    )
    diag += params.mu * ((x1 == 0).astype(float) + (x2 == 0) + (x3 == 0) + (x4 == 0))
    nz = diag != 0.0
    rows_list.append(n[nz])
    cols_list.append(n[nz])
    vals_list.append(diag[nz].astype(np.complex128))

    return SparseHermitianOperator(
        dim,
        np.concatenate(rows_list),
        np.concatenate(cols_list),
        np.concatenate(vals_list),
        label=f"h4(L={L})",
    )


def build_symmetry_ops(L: int) -> tuple[PermutationOperator, PermutationOperator, PermutationOperator]:
    """Constituent-exchange operators E_A, E_B and the lattice reflection P."""
    basis = FourParticleBasis(L)
    h = (L - 1) // 2
    x1, x2, x3, x4 = (c + h for c in basis.coordinate_arrays())

    def flat(a, b, c, d):
        return ((a * L + b) * L + c) * L + d

    e_a = PermutationOperator(flat(x3, x2, x1, x4), label="E_A")
    e_b = PermutationOperator(flat(x1, x4, x3, x2), label="E_B")
    par = PermutationOperator(
        flat(L - 1 - x1, L - 1 - x2, L - 1 - x3, L - 1 - x4), label="P"
    )
    return e_a, e_b, par


def symmetrize(v: StateVector, eps: int) -> StateVector:
    """Project onto the eps_A = eps_B = eps sector and renormalize.

    Applies (1 + eps E_A)(1 + eps E_B); a vanishing result means the input
    was annihilated by constituent statistics (e.g. two fermions of the
    same type on one site).
    """
    if eps not in (-1, 1):
        raise InvalidParameterError(f"eps must be +-1, got {eps}")
    L = getattr(v.basis, "L", None)
    if L is None or v.basis.dim != L ** 4:
        raise DimensionMismatchError("symmetrize expects a four-particle state")
    e_a, e_b, _ = build_symmetry_ops(L)
    amp = v.amp + eps * e_b.apply_amp(v.amp)
    amp = amp + eps * e_a.apply_amp(amp)
    norm = np.linalg.norm(amp)
    if norm < 1e-14:
        raise DegenerateInputError("symmetrization annihilated the state")
    return StateVector(v.basis, amp / norm)


@dataclass(frozen=True)
class BoundBand:
    """Sorted pair-band energies plus a completeness flag."""

    energies: np.ndarray
    complete: bool


def bound_band(params: ModelParams) -> BoundBand:
    """Eigenvalues of the two-particle problem detached from the continuum.

    The scattering continuum fills [-4J, 4J]; anything beyond
    4J + 2J^2/|U| on the interaction side is counted as a bound pair.
    A full band has exactly L levels.
    """
    params.require_interaction()
    ev = la.eigvalsh(build_h2(params).to_dense())
    threshold = 4.0 * params.J + 2.0 * params.J ** 2 / abs(params.U)
    if params.U > 0:
        band = ev[ev > threshold]
    else:
        band = ev[ev < -threshold]
    band = np.sort(band)
    return BoundBand(energies=band, complete=band.size == params.L)


class PairedBasis:
    """Four-particle configurations with interaction energy exactly 2U.

    Family one pairs (A1,B1) and (A2,B2) on sites (l, m); family two pairs
    (A1,B2) and (A2,B1).  The all-on-one-site configurations belong to both
    families and are enumerated once, giving dimension 2 L^2 - L.
    """

    def __init__(self, L: int):
        self.L = L
        sites = range(-(L - 1) // 2, (L - 1) // 2 + 1)
        configs: list[tuple[int, int, int, int]] = []
        configs += [(l, l, m, m) for l in sites for m in sites]
        configs += [(l, m, m, l) for l in sites for m in sites if l != m]
        self.configs = configs
        self.index = {c: i for i, c in enumerate(configs)}
        parent = FourParticleBasis(L)
        self.four_particle_indices = np.array(
            [parent.index(c) for c in configs], dtype=np.int64
        )

    @property
    def dim(self) -> int:
        return len(self.configs)

    @property
    def label(self) -> str:
        return f"paired(L={self.L})"

    def __contains__(self, config: tuple[int, int, int, int]) -> bool:
        return config in self.index


def paired_subspace(params: ModelParams) -> PairedBasis:
    """Enumerate the 2L^2 - L intact-composite configurations."""
    return PairedBasis(params.L)
