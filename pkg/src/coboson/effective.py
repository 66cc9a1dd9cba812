"""Effective Hamiltonians for one and two tightly bound composites.

Closed-form builders implement the second-order virtual-hopping rules
(pair hopping -J_eff = 2J^2/U, exchange shift, double-occupancy coupling);
`pt2_effective` re-derives the same matrix directly from the four-particle
model by degenerate perturbation theory and serves as the oracle.

On a finite open chain the second-order self-energy of a configuration is
proportional to the number of virtual hops actually available, so the
diagonal is reduced next to the lattice edges.  The builders reproduce
this, which is what makes the oracle comparison exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameterError
from .manybody import PairedBasis, paired_subspace
from .model import ModelParams, SparseHermitianOperator

__all__ = [
    "EffectiveParams",
    "CompositeBasisTwo",
    "ParityBlock",
    "effective_params",
    "build_heff_single",
    "build_heff_two",
    "pt2_effective",
    "symmetrization_isometry",
    "compare_heff",
    "parity_block",
]

VALIDITY_RATIO = 5.0


@dataclass(frozen=True)
class EffectiveParams:
    """Derived constants of the tightly-bound-composite description.

    j_eff      : composite hopping, -2 J^2 / U (negative for U > 0).
    barrier_eff: barrier seen by a composite, 2 mu.
    shift_one  : bulk energy of one composite, U - 2 j_eff.
    shift_two  : bulk energy of two composites, 2 (U - 2 j_eff).
    v_nn       : nearest-neighbour exchange interaction, -2 eps j_eff.
    t_double   : coupling onto the both-on-one-site state, -(1 + eps) j_eff.
    """

    j_eff: float
    barrier_eff: float
    shift_one: float
    shift_two: float
    v_nn: float
    t_double: float
    eps: int


def effective_params(params: ModelParams, eps: int) -> EffectiveParams:
    """Evaluate the composite constants for the eps_A = eps_B = eps sector."""
    if eps not in (-1, 1):
        raise InvalidParameterError(f"eps must be +-1, got {eps}")
    params.require_interaction()
    if abs(params.U) < VALIDITY_RATIO * params.J:
        warnings.warn(
            f"|U| = {abs(params.U)} < {VALIDITY_RATIO} J: tightly-bound "
            "description is only qualitative here",
            stacklevel=2,
        )
    j_eff = -2.0 * params.J ** 2 / params.U
    shift_one = params.U - 2.0 * j_eff
    return EffectiveParams(
        j_eff=j_eff,
        barrier_eff=2.0 * params.mu,
        shift_one=shift_one,
        shift_two=2.0 * shift_one,
        v_nn=-2.0 * eps * j_eff,
        t_double=-(1.0 + eps) * j_eff,
        eps=eps,
    )


def _avail(x: int, half: int) -> int:
    """Number of in-lattice neighbour sites of x."""
    return (1 if x - 1 >= -half else 0) + (1 if x + 1 <= half else 0)


def build_heff_single(params: ModelParams) -> SparseHermitianOperator:
    """One composite on the chain: hopping -j_eff, doubled barrier.

    Bulk diagonal U - 2 j_eff; next to an open end one virtual hop is
    missing, leaving U - j_eff there.
    """
    eff = effective_params(params, +1)
    L, h = params.L, params.half
    rows, cols, vals = [], [], []
    for i in range(L - 1):
        rows.append(i)
        cols.append(i + 1)
        vals.append(-eff.j_eff)
    for i in range(L):
        site = i - h
        d = params.U - _avail(site, h) * eff.j_eff
        if site == 0:
            d += eff.barrier_eff
        rows.append(i)
        cols.append(i)
        vals.append(d)
    return SparseHermitianOperator(L, rows, cols, vals, label=f"heff1(L={L})")


class CompositeBasisTwo:
    """Symmetry-adapted basis of two identical composites.

    Unordered pair states with the composites on distinct sites l > m,
    lexicographically ordered, followed (for eps = +1 only) by the
    double-occupancy states with both composites on one site.
    """

    def __init__(self, L: int, eps: int):
        if eps not in (-1, 1):
            raise InvalidParameterError(f"eps must be +-1, got {eps}")
        self.L = L
        self.eps = eps
        h = (L - 1) // 2
        self.half = h
        sites = range(-h, h + 1)
        self.pairs = [(l, m) for l in sites for m in sites if l > m]
        self.doubles = list(sites) if eps == +1 else []
        self._pair_index = {p: i for i, p in enumerate(self.pairs)}
        self._double_index = {
            l: len(self.pairs) + i for i, l in enumerate(self.doubles)
        }

    @property
    def dim(self) -> int:
        return len(self.pairs) + len(self.doubles)

    @property
    def label(self) -> str:
        return f"composite_two(L={self.L},eps={self.eps:+d})"

    def pair_index(self, l: int, m: int) -> int:
        if l < m:
            l, m = m, l
        return self._pair_index[(l, m)]

    def double_index(self, l: int) -> int:
        return self._double_index[l]

    def has_pair(self, l: int, m: int) -> bool:
        if l < m:
            l, m = m, l
        return (l, m) in self._pair_index

    def reflection_permutation(self) -> np.ndarray:
        """Index permutation induced by the lattice reflection x -> -x."""
        perm = np.empty(self.dim, dtype=np.int64)
        for (l, m), i in self._pair_index.items():
            perm[i] = self.pair_index(-m, -l)
        for l, i in self._double_index.items():
            perm[i] = self.double_index(-l)
        return perm


def build_heff_two(params: ModelParams, eps: int) -> SparseHermitianOperator:
    """Two identical composites: pair hopping, exchange, double occupancy.

    Matrix elements per the second-order rules:
      diagonal(l, m) : 2U - (avail(l)+avail(m)) j_eff + 2 mu per composite
                       on site 0, plus v_nn when |l - m| = 1;
      pair hop       : -j_eff between configurations differing by one
                       composite moved one site (distinct endpoints);
      double states  : coupled to the adjacent-pair states by t_double,
                       diagonal 2U - 2 avail(l) j_eff (+ 4 mu at the
                       barrier), no direct double-double coupling.
    """
    eff = effective_params(params, eps)
    basis = CompositeBasisTwo(params.L, eps)
    h = basis.half
    rows, cols, vals = [], [], []

    def add(i, j, v):
        if i > j:
            i, j = j, i
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for (l, m) in basis.pairs:
        i = basis.pair_index(l, m)
        d = (
            2.0 * params.U
            - (_avail(l, h) + _avail(m, h)) * eff.j_eff
            + eff.barrier_eff * ((l == 0) + (m == 0))
        )
        if l - m == 1:
            d += eff.v_nn
        add(i, i, d)
        for (a, b) in ((l + 1, m), (l, m + 1)):
            if not (-h <= a <= h and -h <= b <= h):
                continue
            if a == b:
                if eps == +1:
                    add(basis.double_index(a), i, eff.t_double)
            else:
                add(basis.pair_index(a, b), i, -eff.j_eff)
        # downward moves are the transposes of upward moves from other
        # states except the pair -> double ones, which exist only here
        if eps == +1 and l - m == 1:
            add(basis.double_index(m), i, eff.t_double)
    for l in basis.doubles:
        i = basis.double_index(l)
        add(i, i, 2.0 * params.U - 2.0 * _avail(l, h) * eff.j_eff + 2.0 * eff.barrier_eff * (l == 0))

    return SparseHermitianOperator(
        basis.dim, rows, cols, vals, label=f"heff2(L={params.L},eps={eps:+d})"
    )


def _interaction_energy(c: tuple[int, int, int, int], U: float) -> float:
    a1, b1, a2, b2 = c
    cross = (a1 == b1) + (a1 == b2) + (a2 == b1) + (a2 == b2)
    same = (a1 == a2) + (b1 == b2)
    return U * (cross - same)


def pt2_effective(params: ModelParams) -> np.ndarray:
    """Second-order effective matrix on the intact-composite subspace.

    Keeps the diagonal part (interaction energy 2U plus the first-order
    barrier) and adds every two-hop process through an intermediate
    configuration n outside the subspace, weighted by
    J^2 / (2U - E0(n)).  Single hops never connect two intact-composite
    configurations, so there is no first-order off-diagonal part.
    """
    params.require_interaction()
    basis = paired_subspace(params)
    h = params.half
    n_dim = basis.dim
    mat = np.zeros((n_dim, n_dim))

    def hops(c):
        for j in range(4):
            for d in (-1, 1):
                x = c[j] + d
                if -h <= x <= h:
                    yield c[:j] + (x,) + c[j + 1 :]

    for c, i in basis.index.items():
        mat[i, i] += 2.0 * params.U + params.mu * sum(x == 0 for x in c)
        for mid in hops(c):
            if mid in basis.index:
                raise AssertionError("single hop landed inside the paired subspace")
            denom = 2.0 * params.U - _interaction_energy(mid, params.U)
            w = params.J ** 2 / denom
            for c2 in hops(mid):
                j = basis.index.get(c2)
                if j is not None:
                    mat[j, i] += w
    return mat


def symmetrization_isometry(basis: PairedBasis, eps: int) -> sp.csr_matrix:
    """Columns express the eps-sector composite basis in paired coordinates.

    Pair column (l > m):  (|l,l,m,m> + |m,m,l,l> + eps |m,l,l,m>
                           + eps |l,m,m,l>) / 2
    Double column      :  |l,l,l,l>
    """
    comp = CompositeBasisTwo(basis.L, eps)
    rows, cols, vals = [], [], []
    for (l, m) in comp.pairs:
        j = comp.pair_index(l, m)
        for cfg, w in (
            ((l, l, m, m), 0.5),
            ((m, m, l, l), 0.5),
            ((m, l, l, m), 0.5 * eps),
            ((l, m, m, l), 0.5 * eps),
        ):
            rows.append(basis.index[cfg])
            cols.append(j)
            vals.append(w)
    for l in comp.doubles:
        rows.append(basis.index[(l, l, l, l)])
        cols.append(comp.double_index(l))
        vals.append(1.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, comp.dim))


def compare_heff(params: ModelParams, eps: int) -> float:
    """Largest elementwise gap between the oracle and the closed form."""
    params.require_interaction()
    basis = paired_subspace(params)
    w = symmetrization_isometry(basis, eps)
    projected = w.T @ pt2_effective(params) @ w.toarray()
    closed = build_heff_two(params, eps).to_dense().real
    return float(np.max(np.abs(projected - closed)))


@dataclass(frozen=True)
class ParityBlock:
    """A reflection-symmetry block together with its embedding isometry."""

    op: SparseHermitianOperator
    isometry: sp.csr_matrix
    parity: int

    def project(self, amp: np.ndarray) -> np.ndarray:
        return self.isometry.T.conj() @ amp

    def embed(self, amp: np.ndarray) -> np.ndarray:
        return self.isometry @ amp


def parity_block(
    h: SparseHermitianOperator, basis: CompositeBasisTwo, parity: int
) -> ParityBlock:
    """Restrict an operator on CompositeBasisTwo to one reflection sector.

    Basis states come in reflection orbits {x, Px}; even/odd combinations
    (x +- Px)/sqrt(2) plus the reflection-invariant states (even sector
    only) span the block.  Dynamics of a definite-parity state in the block
    coincide with the full-basis dynamics.
    """
    if parity not in (-1, 1):
        raise InvalidParameterError(f"parity must be +-1, got {parity}")
    if h.dim != basis.dim:
        raise InvalidParameterError("operator does not live on the given basis")
    perm = basis.reflection_permutation()
    rows, cols, vals = [], [], []
    col = 0
    for i in range(basis.dim):
        j = perm[i]
        if j == i:
            if parity == +1:
                rows.append(i)
                cols.append(col)
                vals.append(1.0)
                col += 1
        elif i < j:
            s = 2.0 ** -0.5
            rows += [i, j]
            cols += [col, col]
            vals += [s, parity * s]
            col += 1
    q = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, col))
    blk = (q.T @ h.to_csr() @ q).tocoo()
    upper = blk.row <= blk.col
    sym = {}
    for r, c, v in zip(blk.row[upper], blk.col[upper], blk.data[upper]):
        sym[(int(r), int(c))] = sym.get((int(r), int(c)), 0.0) + v
    items = sorted(sym.items())
    op = SparseHermitianOperator(
        col,
        [k[0] for k, _ in items],
        [k[1] for k, _ in items],
        [v for _, v in items],
        label=f"{h.label}/parity{parity:+d}",
    )
    return ParityBlock(op=op, isometry=q, parity=parity)
