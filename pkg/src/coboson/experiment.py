"""Run configuration, experiment orchestration, and result emission.

A run is described by a JSON document with the exact field names of
RunConfig (unknown keys are rejected).  Simulation rows always carry the
closed-form predictions alongside the simulated bunching probability so a
failed propagation still leaves the analytic curve usable.  Output is
deterministic: fixed row order, fixed formatting, no randomness anywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import scattering
from .dynamics import (
    auto_center,
    auto_time,
    bunching,
    bunching_full,
    initial_state_effective,
    initial_state_full,
    propagate,
)
from .effective import (
    CompositeBasisTwo,
    build_heff_single,
    build_heff_two,
    compare_heff,
    effective_params,
    parity_block,
)
from .errors import ConfigError, InvalidParameterError
from .manybody import bound_band, build_h4
from .model import ModelParams, StateVector

__all__ = [
    "MODES",
    "DEFAULT_K_GRID",
    "DEFAULT_MUU_GRID",
    "DEFAULT_EPS_LIST",
    "RunConfig",
    "ResultRow",
    "ValidationCase",
    "ValidationReport",
    "run_single",
    "run_sweep",
    "run_validation",
    "emit",
    "export_operator",
]

MODES = ("analytic", "effective", "full", "validate-effective", "validate-pt2", "bands")

DEFAULT_K_GRID = (
    math.pi / 6,
    math.pi / 4,
    math.pi / 3,
    5 * math.pi / 12,
    math.pi / 2,
    7 * math.pi / 12,
    2 * math.pi / 3,
    3 * math.pi / 4,
    5 * math.pi / 6,
)
DEFAULT_MUU_GRID = (1.0, 2.0, 4.0)
DEFAULT_EPS_LIST = (-1, 1)

CSV_HEADER = (
    "k,muU_over_J2,eps,L,sigma,U_over_J,t_evolve,"
    "Pb_sim,Pb_analytic,Pb_elem,s_k,residual,norm_err"
)

PT2_GRID_L = (7, 9, 11)
PT2_GRID_U = (-50.0, -20.0, -10.0, 10.0, 20.0, 50.0)
PT2_GRID_MU = (0.0, 0.5, 1.0)
PT2_TOL = 1e-12
BAND_LEVEL_TOL_COEF = 5.0
EFFECTIVE_VS_FULL_TOL = 0.05
QUANTITATIVE_U_RATIO = 20.0


@dataclass
class RunConfig:
    """Everything needed to reproduce one invocation."""

    L: int = 101
    J: float = 1.0
    mu: float | None = None
    U: float = 20.0
    eps: int = -1
    mode: str = "effective"
    sigma: float = 10.0
    k: float | None = None
    k_grid: list[float] | None = None
    muU: float | None = None
    muU_grid: list[float] | None = None
    eps_list: list[int] | None = None
    c: int | str = "auto"
    t: float | str = "auto"
    out: str | None = None
    format: str = "csv"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eps not in (-1, 1):
            raise ConfigError(f"eps must be +-1, got {self.eps}")
        if self.eps_list is not None and any(e not in (-1, 1) for e in self.eps_list):
            raise ConfigError(f"eps_list entries must be +-1, got {self.eps_list}")
        for kk in self.k_values():
            if not 0.0 < kk < math.pi:
                raise ConfigError(f"k must lie strictly inside (0, pi), got {kk}")
        if self.mu is not None and self.muU is not None:
            raise ConfigError("give either mu or muU (= mu U / J^2), not both")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.c != "auto" and not isinstance(self.c, int):
            raise ConfigError(f"c must be an integer or 'auto', got {self.c!r}")
        if self.t != "auto" and not isinstance(self.t, (int, float)):
            raise ConfigError(f"t must be a number or 'auto', got {self.t!r}")
        try:
            self.model_params()
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def k_values(self) -> list[float]:
        if self.k_grid is not None:
            return list(self.k_grid)
        if self.k is not None:
            return [self.k]
        return []

    def beta(self) -> float:
        """Barrier-strength parameter mu U / J^2 of this configuration."""
        if self.muU is not None:
            return self.muU
        if self.mu is not None:
            return self.mu * self.U / self.J ** 2
        return 1.0

    def resolved_mu(self) -> float:
        if self.mu is not None:
            return self.mu
        return self.beta() * self.J ** 2 / self.U

    def model_params(self) -> ModelParams:
        return ModelParams(L=self.L, J=self.J, mu=self.resolved_mu(), U=self.U)

    def resolved_c(self) -> int:
        return auto_center(self.L) if self.c == "auto" else int(self.c)

    def echo(self, **extra) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d["c"] = self.resolved_c()
        d["mu"] = self.resolved_mu()
        d.update(extra)
        return d


@dataclass
class ResultRow:
    """One measurement point; the CSV/JSON record."""

    k: float
    muU_over_J2: float
    eps: int
    L: int
    sigma: float
    U_over_J: float
    t_evolve: float
    Pb_sim: float
    Pb_analytic: float
    Pb_elem: float
    s_k: float
    residual: float
    norm_err: float

    FIELDS = (
        "k", "muU_over_J2", "eps", "L", "sigma", "U_over_J", "t_evolve",
        "Pb_sim", "Pb_analytic", "Pb_elem", "s_k", "residual", "norm_err",
    )


def _analytic_columns(k: float, beta: float, eps: int) -> tuple[float, float, float]:
    s_k = scattering.suppression(k, eps)
    pb_elem = scattering.p_b_elem(k, beta)
    return s_k * pb_elem, pb_elem, s_k


def analytic_row(cfg: RunConfig, k: float, beta: float, eps: int) -> ResultRow:
    """Closed-form-only row; Pb_sim mirrors the analytic prediction."""
    params = ModelParams(L=cfg.L, J=cfg.J, mu=beta * cfg.J ** 2 / cfg.U, U=cfg.U)
    eff = effective_params(params, eps)
    pb, pb_elem, s_k = _analytic_columns(k, beta, eps)
    return ResultRow(
        k=k, muU_over_J2=beta, eps=eps, L=cfg.L, sigma=cfg.sigma,
        U_over_J=cfg.U / cfg.J, t_evolve=auto_time(params, k, eff),
        Pb_sim=pb, Pb_analytic=pb, Pb_elem=pb_elem, s_k=s_k,
        residual=0.0, norm_err=0.0,
    )


class _PlainBasis:
    def __init__(self, dim, label):
        self.dim = dim
        self.label = label


def _evolve_effective(params, eps, k, sigma, c, t_end, cache):
    key = ("eff", params.L, params.J, params.mu, params.U, eps)
    entry = cache.get(key) if cache is not None else None
    if entry is None:
        basis = CompositeBasisTwo(params.L, eps)
        h = build_heff_two(params, eps)
        entry = (basis, h, parity_block(h, basis, +1))
        if cache is not None:
            cache[key] = entry
    basis, h, block = entry
    v0 = initial_state_effective(params, eps, k, sigma=sigma, c=c)
    y0 = block.project(v0.amp)
    leak = abs(1.0 - float(np.vdot(y0, y0).real))
    if leak < 1e-12:
        blk_basis = _PlainBasis(block.op.dim, block.op.label)
        yt = propagate(
            block.op, StateVector(blk_basis, y0), t_end,
            energy_tol=1e-8 * params.J,
        )
        vt = StateVector(basis, block.embed(yt.amp))
    else:
        vt = propagate(h, v0, t_end, energy_tol=1e-8 * params.J)
    return vt


def run_single(cfg: RunConfig, k: float | None = None, beta: float | None = None,
               eps: int | None = None, cache: dict | None = None) -> ResultRow:
    """Propagate one configuration and measure bunching.

    k, beta, and eps default to the values in cfg; passing them explicitly
    lets sweeps share one config object.
    """
    if cfg.mode not in ("effective", "full"):
        raise ConfigError(f"run_single needs mode effective or full, got {cfg.mode!r}")
    eps = cfg.eps if eps is None else eps
    k_val = cfg.k_values()[0] if k is None else k
    if k_val is None:
        raise ConfigError("no quasimomentum given (set k or k_grid)")
    beta = cfg.beta() if beta is None else beta
    params = ModelParams(L=cfg.L, J=cfg.J, mu=beta * cfg.J ** 2 / cfg.U, U=cfg.U)
    eff = effective_params(params, eps)
    t_end = auto_time(params, k_val, eff) if cfg.t == "auto" else float(cfg.t)
    c = None if cfg.c == "auto" else int(cfg.c)
    pb_an, pb_elem, s_k = _analytic_columns(k_val, beta, eps)

    if cfg.mode == "effective":
        vt = _evolve_effective(params, eps, k_val, cfg.sigma, c, t_end, cache)
        res = bunching(vt)
    else:
        key = ("full", params.L, params.J, params.mu, params.U)
        if cache is not None and key in cache:
            h4 = cache[key]
        else:
            h4 = build_h4(params)
            if cache is not None:
                cache[key] = h4
        v0 = initial_state_full(params, eps, k_val, sigma=cfg.sigma, c=c)
        vt = propagate(h4, v0, t_end, energy_tol=1e-8 * params.J)
        res = bunching_full(vt)

    return ResultRow(
        k=k_val, muU_over_J2=beta, eps=eps, L=cfg.L, sigma=cfg.sigma,
        U_over_J=cfg.U / cfg.J, t_evolve=t_end,
        Pb_sim=res.p_same, Pb_analytic=pb_an, Pb_elem=pb_elem, s_k=s_k,
        residual=res.residual, norm_err=abs(1.0 - vt.norm()),
    )


def run_sweep(cfg: RunConfig) -> tuple[list[ResultRow], list[str]]:
    """Cartesian product over eps_list x muU_grid x k_grid, stable order.

    Returns the rows sorted by (eps, beta, k) plus a list of per-point
    failure messages; failed points still contribute a row with the
    analytic columns filled and NaN in the simulated ones.
    """
    ks = cfg.k_grid if cfg.k_grid is not None else (
        [cfg.k] if cfg.k is not None else list(DEFAULT_K_GRID)
    )
    betas = cfg.muU_grid if cfg.muU_grid is not None else (
        [cfg.beta()] if (cfg.muU is not None or cfg.mu is not None)
        else list(DEFAULT_MUU_GRID)
    )
    eps_list = cfg.eps_list if cfg.eps_list is not None else list(DEFAULT_EPS_LIST)

    rows: list[ResultRow] = []
    failures: list[str] = []
    cache: dict = {}
    for eps in sorted(eps_list):
        for beta in sorted(betas):
            for k in sorted(ks):
                if cfg.mode == "analytic":
                    rows.append(analytic_row(cfg, k, beta, eps))
                    continue
                try:
                    rows.append(run_single(cfg, k=k, beta=beta, eps=eps, cache=cache))
                except Exception as exc:  # noqa: BLE001 - flagged, not swallowed
                    failures.append(
                        f"(eps={eps:+d}, muU={beta:g}, k={k:.6f}): {exc}"
                    )
                    pb_an, pb_elem, s_k = _analytic_columns(k, beta, eps)
                    rows.append(ResultRow(
                        k=k, muU_over_J2=beta, eps=eps, L=cfg.L, sigma=cfg.sigma,
                        U_over_J=cfg.U / cfg.J, t_evolve=float("nan"),
                        Pb_sim=float("nan"), Pb_analytic=pb_an,
                        Pb_elem=pb_elem, s_k=s_k,
                        residual=float("nan"), norm_err=float("nan"),
                    ))
    rows.sort(key=lambda r: (r.eps, r.muU_over_J2, r.k))
    return rows, failures


@dataclass
class ValidationCase:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    mode: str
    cases: list[ValidationCase] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def lines(self) -> list[str]:
        out = []
        for c in self.cases:
            status = "pass" if c.passed else "FAIL"
            out.append(
                f"[{status}] {c.name}: measured {c.measured:.6e} "
                f"(tolerance {c.tolerance:.6e}){' ' + c.detail if c.detail else ''}"
            )
        return out


def _validate_pt2(cfg: RunConfig) -> ValidationReport:
    report = ValidationReport(mode="validate-pt2")
    for L in PT2_GRID_L:
        for U in PT2_GRID_U:
            for mu in PT2_GRID_MU:
                for eps in (-1, 1):
                    params = ModelParams(L=L, J=cfg.J, mu=mu * cfg.J, U=U * cfg.J)
                    dev = compare_heff(params, eps)
                    tol = PT2_TOL * cfg.J
                    report.cases.append(ValidationCase(
                        name=f"pt2 L={L} U={U:+g}J mu={mu:g}J eps={eps:+d}",
                        measured=dev, tolerance=tol, passed=dev <= tol,
                    ))
    return report


def _validate_effective(cfg: RunConfig) -> ValidationReport:
    report = ValidationReport(mode="validate-effective")
    k = cfg.k if cfg.k is not None else math.pi / 2
    beta = cfg.beta()
    full_cfg = RunConfig(
        L=cfg.L, J=cfg.J, U=cfg.U, muU=beta, eps=cfg.eps, mode="full",
        sigma=cfg.sigma, k=k, c=cfg.c, t=cfg.t,
    )
    eff_cfg = RunConfig(
        L=cfg.L, J=cfg.J, U=cfg.U, muU=beta, eps=cfg.eps, mode="effective",
        sigma=cfg.sigma, k=k, c=cfg.c, t=cfg.t,
    )
    row_full = run_single(full_cfg)
    row_eff = run_single(eff_cfg)
    gap = abs(row_full.Pb_sim - row_eff.Pb_sim)
    if abs(cfg.U) >= QUANTITATIVE_U_RATIO * cfg.J:
        report.cases.append(ValidationCase(
            name=f"|Pb_full - Pb_eff| at U={cfg.U:g}J k={k:.4f} eps={cfg.eps:+d}",
            measured=gap, tolerance=EFFECTIVE_VS_FULL_TOL,
            passed=gap <= EFFECTIVE_VS_FULL_TOL,
            detail=f"Pb_full={row_full.Pb_sim:.4f} Pb_eff={row_eff.Pb_sim:.4f}",
        ))
    else:
        dev_full = row_full.Pb_sim - row_full.Pb_elem
        dev_eff = row_eff.Pb_sim - row_eff.Pb_elem
        agree = math.copysign(1.0, dev_full) == math.copysign(1.0, dev_eff)
        report.cases.append(ValidationCase(
            name=f"sign(Pb - Pb_elem) agreement at U={cfg.U:g}J k={k:.4f} "
                 f"eps={cfg.eps:+d}",
            measured=dev_full, tolerance=0.0, passed=agree,
            detail=f"dev_full={dev_full:+.4f} dev_eff={dev_eff:+.4f}",
        ))
    return report


def _validate_bands(cfg: RunConfig) -> ValidationReport:
    report = ValidationReport(mode="bands")
    L = cfg.L if cfg.L != 101 else 21
    params = ModelParams(L=L, J=cfg.J, mu=0.0, U=cfg.U)
    band = bound_band(params)
    report.cases.append(ValidationCase(
        name=f"bound-pair level count at L={L} U={cfg.U:g}J",
        measured=float(band.energies.size), tolerance=float(L),
        passed=band.complete,
    ))
    u, j = params.U, params.J
    lo, hi = (u - 0.05 * j, u + 0.45 * j) if u > 0 else (u - 0.45 * j, u + 0.05 * j)
    inside = bool(np.all((band.energies >= lo) & (band.energies <= hi)))
    report.cases.append(ValidationCase(
        name=f"band inside [{lo:g}, {hi:g}]",
        measured=float(band.energies.max() if u > 0 else band.energies.min()),
        tolerance=hi if u > 0 else lo, passed=inside,
    ))
    if band.complete:
        eff_levels = np.sort(np.linalg.eigvalsh(build_heff_single(params).to_dense().real))
        dev = float(np.max(np.abs(eff_levels - band.energies)))
        tol = BAND_LEVEL_TOL_COEF * j ** 4 / abs(u) ** 3
        report.cases.append(ValidationCase(
            name="per-level gap exact band vs effective chain",
            measured=dev, tolerance=tol, passed=dev <= tol,
        ))
    return report


def run_validation(cfg: RunConfig) -> ValidationReport:
    """Dispatch to one of the validation suites by cfg.mode."""
    if cfg.mode == "validate-pt2":
        return _validate_pt2(cfg)
    if cfg.mode == "validate-effective":
        return _validate_effective(cfg)
    if cfg.mode == "bands":
        return _validate_bands(cfg)
    raise ConfigError(f"{cfg.mode!r} is not a validation mode")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def emit(rows: list[ResultRow], fmt: str, path: str, config_echo: dict | None = None):
    """Write rows as CSV (with '#' metadata lines) or JSON, deterministically."""
    if fmt == "csv":
        lines = []
        if config_echo is not None:
            lines.append("# config: " + json.dumps(config_echo, sort_keys=True))
        lines.append(CSV_HEADER)
        for r in rows:
            lines.append(",".join(_fmt(getattr(r, name)) for name in ResultRow.FIELDS))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        doc = {
            "config": config_echo or {},
            "rows": [
                {name: getattr(r, name) for name in ResultRow.FIELDS} for r in rows
            ],
        }
        text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def export_operator(op, path: str):
    """Dump stored triplets as 'row col re im' lines (debugging aid)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r, c, v in zip(op.rows, op.cols, op.vals):
            fh.write(f"{r} {c} {format(v.real, '.12g')} {format(v.imag, '.12g')}\n")
