"""Wave-packet preparation, unitary propagation, and bunching measurement.

The collision protocol: two Gaussian packets of width sigma start at +-c
with opposite quasimomenta aimed at the barrier, evolve for
t = (3L + 1) / 4|v_g| (long enough to scatter and fly back out), and the
final weight is classified by which side of the barrier the composites
ended on.  Weight sitting exactly on the barrier site is reported
separately as residual.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .effective import CompositeBasisTwo, EffectiveParams, effective_params
from .errors import (
    CapacityError,
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
    NumericalFailureError,
)
from .manybody import FourParticleBasis, symmetrize
from .model import (
    ModelParams,
    SparseHermitianOperator,
    StateVector,
    expectation,
    group_velocity,
    site_range,
)

__all__ = [
    "WavePacketSpec",
    "RunPlan",
    "BunchingResult",
    "FULL_MODEL_MAX_L",
    "OVERLAP_TOL",
    "gaussian_amplitudes",
    "auto_center",
    "aimed_momentum",
    "initial_state_effective",
    "initial_state_full",
    "auto_time",
    "propagate",
    "bunching",
    "bunching_full",
    "density_profile",
]

FULL_MODEL_MAX_L = 13
OVERLAP_TOL = 1e-8
PRODUCTION_K_RANGE = (math.pi / 6, 5 * math.pi / 6)
DENSE_PROPAGATION_MAX_DIM = 4096


@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian packet: centre site c, quasimomentum k, width sigma."""

    c: int
    k: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 2.0:
            raise InvalidParameterError(
                f"sigma = {self.sigma} < 2 is not quasimomentum-sharp"
            )
        if not 0.0 < abs(self.k) < math.pi:
            raise InvalidParameterError(f"|k| must lie in (0, pi), got {self.k}")
        lo, hi = PRODUCTION_K_RANGE
        if not lo <= abs(self.k) <= hi:
            warnings.warn(
                f"|k| = {abs(self.k):.4f} outside the production range "
                f"[{lo:.4f}, {hi:.4f}]: group velocity is small and "
                "dispersion strong",
                stacklevel=2,
            )


@dataclass(frozen=True)
class RunPlan:
    """One propagation: which model, which sector, packet, and how long."""

    t_end: float
    model: str
    eps: int
    packet: WavePacketSpec

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise InvalidParameterError(f"t_end must be positive, got {self.t_end}")
        if self.model not in ("effective", "full"):
            raise InvalidParameterError(f"unknown model {self.model!r}")


@dataclass(frozen=True)
class BunchingResult:
    """Side-of-barrier weights; the three components sum to one."""

    p_same: float
    p_opposite: float
    residual: float


def gaussian_amplitudes(spec: WavePacketSpec, sites: list[int]) -> np.ndarray:
    """Unnormalized envelope exp[-(l-c)^2 / 4 sigma^2 + i k l] per site."""
    l = np.asarray(sites, dtype=float)
    return np.exp(-((l - spec.c) ** 2) / (4.0 * spec.sigma ** 2) + 1j * spec.k * l)


def auto_center(L: int) -> int:
    """Packet offset (L + 1) / 4 rounded to the nearest site."""
    return int(math.floor((L + 1) / 4.0 + 0.5))


def aimed_momentum(k: float, j_eff: float, side: int) -> float:
    """Quasimomentum of magnitude k whose group velocity points barrier-ward.

    side = +1 for the packet starting right of the barrier, -1 for left.
    A negative hopping flips the dispersion, so the sign choice depends on
    sign(j_eff).
    """
    if k <= 0 or k >= math.pi:
        raise InvalidParameterError(f"k must lie in (0, pi), got {k}")
    want = -side  # sign of the desired group velocity
    sign = want if j_eff > 0 else -want
    return sign * k


def _packet_pair(params: ModelParams, eff: EffectiveParams, k: float,
                 sigma: float, c: int | None):
    if c is None:
        c = auto_center(params.L)
    if not 0 < c <= params.half:
        raise InvalidParameterError(f"packet centre {c} outside the half-lattice")
    if sigma > params.L / 8.0:
        warnings.warn(
            f"sigma = {sigma} exceeds L/8 = {params.L / 8:.2f}: packets are "
            "not cleanly separated from the barrier and the edges",
            stacklevel=3,
        )
    right = WavePacketSpec(c=c, k=aimed_momentum(k, eff.j_eff, +1), sigma=sigma)
    left = WavePacketSpec(c=-c, k=aimed_momentum(k, eff.j_eff, -1), sigma=sigma)
    sites = site_range(params.L)
    g_r = gaussian_amplitudes(right, sites)
    g_l = gaussian_amplitudes(left, sites)
    ovl = abs(np.vdot(g_r, g_l)) ** 2 / (
        np.vdot(g_r, g_r).real * np.vdot(g_l, g_l).real
    )
    if ovl >= OVERLAP_TOL:
        raise InvalidParameterError(
            f"packet overlap {ovl:.3e} >= {OVERLAP_TOL}: increase |c| or "
            "decrease sigma"
        )
    return g_r, g_l


def initial_state_effective(
    params: ModelParams, eps: int, k: float, sigma: float = 10.0,
    c: int | None = None,
) -> StateVector:
    """Symmetrized two-packet state in the composite pair basis.

    The product packet psi(l, m) = G_{+c}(l) G_{-c}(m) populates unordered
    pair states with (psi(l, m) + psi(m, l)) / 2 and (bosonic sector) the
    double-occupancy states with psi(l, l).
    """
    eff = effective_params(params, eps)
    g_r, g_l = _packet_pair(params, eff, k, sigma, c)
    basis = CompositeBasisTwo(params.L, eps)
    h = params.half
    psi = np.outer(g_r, g_l)

    amp = np.zeros(basis.dim, dtype=np.complex128)
    for (l, m) in basis.pairs:
        i, j = l + h, m + h
        amp[basis.pair_index(l, m)] = 0.5 * (psi[i, j] + psi[j, i])
    for l in basis.doubles:
        amp[basis.double_index(l)] = psi[l + h, l + h]
    norm = np.linalg.norm(amp)
    if norm < 1e-14:
        raise DegenerateInputError("packet construction produced a null state")
    return StateVector(basis, amp / norm)


def initial_state_full(
    params: ModelParams, eps: int, k: float, sigma: float = 2.0,
    c: int | None = None,
) -> StateVector:
    """The same two-packet state embedded in the four-particle space."""
    if params.L > FULL_MODEL_MAX_L:
        raise CapacityError(
            f"L = {params.L} exceeds the four-particle cap {FULL_MODEL_MAX_L}"
        )
    eff = effective_params(params, eps)
    g_r, g_l = _packet_pair(params, eff, k, sigma, c)
    basis = FourParticleBasis(params.L)
    L = params.L
    amp = np.zeros(basis.dim, dtype=np.complex128)
    # |l, l, m, m> has flat offset ((i*L + i)*L + j)*L + j with i, j offsets
    i = np.arange(L)
    flat = ((i[:, None] * L + i[:, None]) * L + i[None, :]) * L + i[None, :]
    amp[flat.ravel()] = np.outer(g_r, g_l).ravel()
    return symmetrize(StateVector(basis, amp), eps)


def auto_time(params: ModelParams, k: float, eff: EffectiveParams) -> float:
    """Scattering-protocol duration (3L + 1) / 4 |v_g| in units of hbar/J."""
    v_g = group_velocity(k, eff.j_eff)
    if abs(v_g) < 1e-6 * params.J:
        raise InvalidParameterError(
            f"group velocity {v_g:.2e} too small for a finite-time protocol"
        )
    return (3 * params.L + 1) / (4.0 * abs(v_g))


def _chebyshev_expm(h: SparseHermitianOperator, amp: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) amp by Chebyshev expansion with Bessel coefficients."""
    emin, emax = h.gershgorin_bounds()
    half_span = 0.5 * (emax - emin)
    center = 0.5 * (emax + emin)
    if half_span == 0.0:
        return np.exp(-1j * center * t) * amp
    z = half_span * abs(t)
    n_terms = int(z + 14.0 * (1.0 + z ** (1.0 / 3.0)) + 20)
    while True:
        orders = np.arange(n_terms + 1)
        bessel = jv(orders, z)
        if abs(bessel[-1]) < 1e-17 and abs(bessel[-2]) < 1e-17:
            break
        n_terms += max(32, n_terms // 10)
        if n_terms > 10_000_000:
            raise NumericalFailureError("Chebyshev expansion does not converge")
    sign = 1.0 if t >= 0 else -1.0
    coef = 2.0 * bessel * (-1j * sign) ** orders
    coef[0] *= 0.5

    m = h.to_csr()

    def x_apply(v):
        return (m @ v - center * v) / half_span

    phi_prev = amp
    phi_cur = x_apply(amp)
    acc = coef[0] * phi_prev + coef[1] * phi_cur
    for n in range(2, n_terms + 1):
        if abs(coef[n]) < 1e-18 and n > z:
            break
        phi_next = 2.0 * x_apply(phi_cur) - phi_prev
        acc += coef[n] * phi_next
        phi_prev, phi_cur = phi_cur, phi_next
    return np.exp(-1j * center * t) * acc


def propagate(
    h: SparseHermitianOperator,
    v: StateVector,
    t: float,
    method: str = "auto",
    norm_tol: float = 1e-10,
    energy_tol: float = 1e-8,
) -> StateVector:
    """Evolve v by exp(-i h t), verifying unitarity and energy conservation.

    method "spectral" diagonalizes once (cached on the operator) and is
    exact; "chebyshev" uses a polynomial expansion with rigorous spectral
    bounds and suits large sparse problems.  "auto" picks by dimension.
    Norm drift beyond norm_tol (relative) or energy drift beyond
    energy_tol raises NumericalFailureError rather than returning silently
    degraded amplitudes.
    """
    if h.dim != v.basis.dim:
        raise DimensionMismatchError(f"operator dim {h.dim} != state dim {v.basis.dim}")
    if method == "auto":
        method = "spectral" if h.dim <= DENSE_PROPAGATION_MAX_DIM else "chebyshev"
    e_before = expectation(h, v)
    n_before = v.norm()
    if method == "spectral":
        w, vec = h.spectral()
        amp = vec @ (np.exp(-1j * w * t) * (vec.conj().T @ v.amp))
    elif method == "chebyshev":
        amp = _chebyshev_expm(h, v.amp, t)
    else:
        raise InvalidParameterError(f"unknown propagation method {method!r}")
    out = StateVector(v.basis, amp)
    drift = abs(out.norm() - n_before) / n_before
    if drift > norm_tol:
        raise NumericalFailureError(f"norm drift {drift:.3e} exceeds {norm_tol}")
    e_drift = abs(expectation(h, out) - e_before)
    if e_drift > energy_tol:
        raise NumericalFailureError(
            f"energy drift {e_drift:.3e} exceeds {energy_tol}"
        )
    return out


def _composite_site_arrays(basis: CompositeBasisTwo):
    pl = np.array([p[0] for p in basis.pairs], dtype=np.int64)
    pm = np.array([p[1] for p in basis.pairs], dtype=np.int64)
    dl = np.array(basis.doubles, dtype=np.int64)
    return pl, pm, dl


def bunching(v: StateVector) -> BunchingResult:
    """Classify pair-basis weight by the side each composite ended on.

    Both strictly positive or both strictly negative (including double
    occupancy off the barrier) counts as bunched; strictly opposite sides
    as anti-bunched; any weight involving site 0 as residual.
    """
    basis = v.basis
    if not isinstance(basis, CompositeBasisTwo):
        raise DimensionMismatchError("bunching expects a CompositeBasisTwo state")
    pl, pm, dl = _composite_site_arrays(basis)
    w = np.abs(v.amp) ** 2
    wp = w[: pl.size]
    wd = w[pl.size :]
    same = wp[((pl > 0) & (pm > 0)) | ((pl < 0) & (pm < 0))].sum()
    same += wd[dl != 0].sum()
    opposite = wp[((pl > 0) & (pm < 0)) | ((pl < 0) & (pm > 0))].sum()
    residual = wp[(pl == 0) | (pm == 0)].sum() + wd[dl == 0].sum()
    return BunchingResult(float(same), float(opposite), float(residual))


def bunching_full(v: StateVector) -> BunchingResult:
    """Four-particle analogue of :func:`bunching`.

    Bunched: all four constituents strictly on one side.  Anti-bunched:
    a 2-2 split with one A and one B on each side (the composites remain
    intact across the barrier).  Anything else -- weight on the barrier
    site or same-type splittings -- is residual.
    """
    basis = v.basis
    if not isinstance(basis, FourParticleBasis):
        raise DimensionMismatchError("bunching_full expects a four-particle state")
    x1, x2, x3, x4 = basis.coordinate_arrays()
    w = np.abs(v.amp) ** 2
    pos = [(x > 0) for x in (x1, x2, x3, x4)]
    neg = [(x < 0) for x in (x1, x2, x3, x4)]
    nonzero = (x1 != 0) & (x2 != 0) & (x3 != 0) & (x4 != 0)
    all_pos = pos[0] & pos[1] & pos[2] & pos[3]
    all_neg = neg[0] & neg[1] & neg[2] & neg[3]
    a_pos = pos[0].astype(np.int8) + pos[2]
    b_pos = pos[1].astype(np.int8) + pos[3]
    opposite = nonzero & (a_pos == 1) & (b_pos == 1)
    same = all_pos | all_neg
    resid = ~(same | opposite)
    return BunchingResult(
        float(w[same].sum()), float(w[opposite].sum()), float(w[resid].sum())
    )


def density_profile(v: StateVector) -> np.ndarray:
    """Expected composite count per site; sums to two over the lattice."""
    basis = v.basis
    if not isinstance(basis, CompositeBasisTwo):
        raise DimensionMismatchError("density_profile expects a CompositeBasisTwo state")
    pl, pm, dl = _composite_site_arrays(basis)
    w = np.abs(v.amp) ** 2
    h = basis.half
    rho = np.zeros(basis.L)
    np.add.at(rho, pl + h, w[: pl.size])
    np.add.at(rho, pm + h, w[: pl.size])
    if dl.size:
        np.add.at(rho, dl + h, 2.0 * w[pl.size :])
    return rho
