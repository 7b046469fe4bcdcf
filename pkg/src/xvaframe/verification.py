"""Numerical residual checks and closed-form oracles.

Nothing here calls the engine's interval weights: the discount relation is
checked with its own left-endpoint Riemann sum, and the oracles are plain
closed forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from xvaframe.exposure import Deal, PathSet, Portfolio, RiskFactorModel, build_grid, mark_to_future
from xvaframe.termstructures import TermCurve, curve_combine


@dataclass
class ResidualReport:
    test_id: str
    residual: float
    tolerance: float
    passed: bool = field(init=False)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(abs(self.residual) <= self.tolerance)

    def to_dict(self) -> dict:
        return asdict(self)


def reports_to_json(reports: Sequence[ResidualReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


# --- discount relation -------------------------------------------------------------

def _static_paths(grid: np.ndarray, model: RiskFactorModel) -> PathSet:
    spots = np.array([np.full((1, len(grid)), u.spot) for u in model.underlyings]).reshape(-1, 1, len(grid))
    return PathSet(grid, tuple(u.id for u in model.underlyings), spots)


def _values(deals, grid, curve, model) -> tuple[np.ndarray, np.ndarray]:
    """Summed left and right node values of deterministic deals."""
    cube = mark_to_future(deals, _static_paths(grid, model), curve, model)
    left = cube.values[:, 0, :].sum(axis=0)
    right = left.copy()
    right[cube.jumps] = cube.right[:, 0, :].sum(axis=0)
    return left, right


def _trapezoid_exit_term(deals, r_sys, r_f, hazard, horizon, step, model) -> float:
    """``int p^{r_F} Q lambda V^{sys} ds`` by trapezoid on a fine grid."""
    extra = np.concatenate([d.flow_times() for d in deals])
    grid = build_grid(step, horizon, np.concatenate([extra, r_f.times, r_sys.times, hazard.times]))
    left, right = _values(deals, grid, r_sys, model)
    g_r = np.exp(-r_f.integral(grid) - hazard.integral(grid))
    a, b = grid[:-1], grid[1:]
    lam = hazard.rate(a)
    f_start = g_r[:-1] * lam * right[:-1]
    f_end = g_r[1:] * lam * left[1:]
    return float(np.sum(0.5 * (f_start + f_end) * (b - a)))


def check_discount_relation(
    deals: Sequence[Deal],
    r_sys: TermCurve,
    r_f: TermCurve,
    hazard: TermCurve | None = None,
    grid_step: float = 1.0 / 365.0,
    exit: str = "system",
    model: RiskFactorModel | None = None,
    tolerance: float = 1e-6,
    test_id: str = "discount_relation",
) -> ResidualReport:
    """Compare a direct r_F valuation with the system value plus the
    spread integral ``int p^{r_F} Q (r_sys - r_F) V^{sys} ds``.

    Deterministic deals only. With a hazard curve, ``exit`` picks what the
    direct valuation receives on default: ``"system"`` settles at the
    system mark, ``"self"`` is the default-free r_F re-mark (then the
    relation leaves out ``int p^{r_F} Q lambda (V^{r_F} - V^{sys}) ds``,
    reported in the diagnostics). The residual is relative to
    ``|V^{r_F}_0|``.
    """
    model = model or RiskFactorModel()
    if exit not in ("system", "self"):
        raise ValueError(f"unknown exit convention {exit!r}")
    deals = list(deals)
    horizon = max(d.maturity for d in deals)
    extra = np.concatenate([d.flow_times() for d in deals])
    grid = build_grid(grid_step, horizon, extra)
    lam = hazard if hazard is not None else TermCurve.flat(0.0, kind="hazard")

    # relation side: plain left-endpoint Riemann sum on the cube grid
    left, right = _values(deals, grid, r_sys, model)
    a, h = grid[:-1], np.diff(grid)
    integrand = np.exp(-r_f.integral(a) - lam.integral(a)) * (r_sys.rate(a) - r_f.rate(a)) * right[:-1]
    relation = left[0] + float(np.sum(integrand * h))

    # direct side
    v_rf = _values(deals, grid, r_f, model)[0][0]
    fine = grid_step / 16.0
    omitted = None
    if hazard is None or exit == "self":
        direct = v_rf
        if hazard is not None:
            risky = curve_combine(r_f, lam, "add", kind="discount")
            # default-free r_F value minus the value with exit at the system mark
            v_risky = _values(deals, grid, risky, model)[0][0]
            w = v_risky + _trapezoid_exit_term(deals, r_sys, r_f, lam, horizon, fine, model)
            omitted = v_rf - w
    else:
        risky = curve_combine(r_f, lam, "add", kind="discount")
        v_risky = _values(deals, grid, risky, model)[0][0]
        direct = v_risky + _trapezoid_exit_term(deals, r_sys, r_f, lam, horizon, fine, model)
    scale = abs(direct) if direct != 0.0 else 1.0
    diag = {
        "grid_step": grid_step,
        "n_paths": 1,
        "direct": direct,
        "relation": relation,
        "v_sys": float(left[0]),
        "exit": exit if hazard is not None else "none",
        "absolute_residual": direct - relation,
    }
    if omitted is not None:
        diag["omitted_default_term"] = omitted
    return ResidualReport(test_id, (direct - relation) / scale, tolerance, diag)


def grid_halving(deals, r_sys, r_f, hazard=None, grid_step=1.0 / 365.0, exit="system",
                 model=None, band: float = 0.2) -> ResidualReport:
    """Ratio of residuals at ``h`` and ``h/2``; first order gives 2."""
    r1 = check_discount_relation(deals, r_sys, r_f, hazard, grid_step, exit, model)
    r2 = check_discount_relation(deals, r_sys, r_f, hazard, grid_step / 2.0, exit, model)
    ratio = r1.residual / r2.residual if r2.residual != 0.0 else math.inf
    rep = ResidualReport("discount_relation_grid_halving", ratio - 2.0, 2.0 * band,
                         {"ratio": ratio, "residual_h": r1.residual, "residual_h2": r2.residual,
                          "grid_step": grid_step})
    return rep


# --- invariance -----------------------------------------------------------------------

def check_invariance(portfolio: Portfolio, hierarchy, curves, ledger, config, curve_a: TermCurve,
                     curve_b: TermCurve, n_paths: int = 1, seed: int = 1, grid_step: float = 1.0 / 365.0,
                     rel_tol: float = 1e-6, n_se: float = 3.0, threads: int | None = None,
                     test_id: str = "marking_invariance") -> ResidualReport:
    """``V_hat`` under two marking curves with common random numbers.

    Deterministic portfolios are held to ``rel_tol`` relative to ``|V_hat_A|``;
    stochastic ones to ``n_se`` pooled standard errors.
    """
    from xvaframe.xva import run_engine

    ra = run_engine(portfolio, hierarchy, curves, ledger, config, n_paths, seed, grid_step, curve_a, threads)
    rb = run_engine(portfolio, hierarchy, curves, ledger, config, n_paths, seed, grid_step, curve_b, threads)
    a, b = ra.legal_entity, rb.legal_entity
    resid = a.v_hat - b.v_hat
    stochastic = bool(portfolio.model.underlyings) and n_paths > 1
    pooled = math.hypot(a.se_v_hat, b.se_v_hat)
    diag = {
        "grid_step": grid_step,
        "n_paths": n_paths,
        "v_hat_a": a.v_hat,
        "v_hat_b": b.v_hat,
        "pooled_se": pooled,
        "delta_v": a.v - b.v,
        "delta_colva": a.colva - b.colva,
        "delta_fva": a.fva - b.fva,
        "delta_cva": a.cva - b.cva,
        "delta_dva": a.dva - b.dva,
    }
    if stochastic:
        return ResidualReport(test_id, resid, n_se * pooled, diag)
    scale = abs(a.v_hat) if a.v_hat != 0.0 else 1.0
    diag["absolute_residual"] = resid
    return ResidualReport(test_id, resid / scale, rel_tol, diag)


# --- closed forms ------------------------------------------------------------------------

ORACLE_CASES = ("constant_exposure_cva", "constant_funding_fva", "constant_margin_colva")


def _annuity(rate: float, T: float) -> float:
    return T if rate == 0.0 else (1.0 - math.exp(-rate * T)) / rate


def analytic_oracles(case: str, **p) -> float:
    """Closed forms for flat curves and constant exposures.

    constant_exposure_cva: (1-R) V lam_C (1 - e^{-(r_F + lam_tot) T}) / (r_F + lam_tot)
        with lam_tot = lam_C (+ lam_B under first-to-default).
    constant_funding_fva: F (r_F - r_sys) (1 - e^{-(r_F + lam) T}) / (r_F + lam).
    constant_margin_colva: M (r_C - r_sys) (1 - e^{-(r_F + lam) T}) / (r_F + lam).
    """
    T = float(p.get("maturity", 1.0))
    r_f = float(p.get("r_f", 0.0))
    if case == "constant_exposure_cva":
        lam_c = float(p["lambda_c"])
        lam_tot = lam_c + (float(p.get("lambda_b", 0.0)) if p.get("first_to_default") else 0.0)
        return (1.0 - float(p["recovery"])) * float(p["exposure"]) * lam_c * _annuity(r_f + lam_tot, T)
    lam = float(p.get("lambda_joint", 0.0))
    if case == "constant_funding_fva":
        return float(p["funding"]) * (r_f - float(p.get("r_sys", 0.0))) * _annuity(r_f + lam, T)
    if case == "constant_margin_colva":
        return float(p["margin"]) * (float(p["r_c"]) - float(p.get("r_sys", 0.0))) * _annuity(r_f + lam, T)
    raise ValueError(f"unknown oracle case {case!r}")
