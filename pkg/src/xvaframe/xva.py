"""ColVA, FVA, CVA and DVA on system-marked exposures.

The adjusted value is

    V_hat = V_sys - ColVA - FVA - CVA + DVA

with every integral discounted at the funding rate ``r_F``. ``dva`` is
reported as a nonnegative benefit. Time integrals treat the pathwise
quantity as linear between grid nodes (with jumps at flow dates) and
integrate the discount, survival and spread factors exactly; see
``termstructures.interval_weights``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np

from xvaframe import kernels
from xvaframe.collateral import NettingHierarchy, NettingSet, margin_paths
from xvaframe.exposure import NodeValues, Portfolio, mark_to_future, portfolio_grid, simulate
from xvaframe.funding_ledger import IssuanceLedger, ftp_accounting, ftp_management
from xvaframe.termstructures import (
    CurveError,
    CurveSet,
    RecoverySchedule,
    TermCurve,
    curve_combine,
    curve_product,
    interval_weights,
    zero_curve,
)

BLOCK_SIZE = 1024
FUNDING_SOURCES = ("accounting_liquidity", "management_yield", "explicit")
SURVIVAL_MODES = ("unilateral", "first_to_default")
SYMMETRIES = ("symmetric", "asymmetric")
AGGREGATIONS = ("per_netting_set_sum", "legal_entity_single_set")
MARGIN_MARKING = ("csa_curve", "system")


class ConfigError(ValueError):
    """Contradictory or incomplete perspective configuration."""


@dataclass(frozen=True)
class PerspectiveConfig:
    """Objects of selection that distinguish one perspective from another.

    The exit price on default is always the system-marked value and the
    invariance rate is always the funding rate; neither is configurable.
    """

    name: str = "custom"
    funding_rate_source: str = "accounting_liquidity"
    funding_curve_id: str | None = None
    survival_mode: str = "unilateral"
    include_dva: bool = True
    bank_defaultable: bool = True
    funding_symmetry: str = "symmetric"
    borrow_curve_id: str | None = None
    lend_curve_id: str | None = None
    funding_aggregation: str = "per_netting_set_sum"
    ftp_approximate: bool = False
    marking_curve_id: str | None = None
    bank_hazard_curve_id: str | None = None
    margin_marking: str = "csa_curve"

    exit_price = "system_marking"
    invariance_rate = "funding_rate"

    @classmethod
    def accounting(cls, **kw) -> "PerspectiveConfig":
        return cls(**{"name": "accounting", "funding_rate_source": "accounting_liquidity",
                      "survival_mode": "unilateral", "include_dva": True, "bank_defaultable": True,
                      "funding_symmetry": "symmetric", "funding_aggregation": "per_netting_set_sum", **kw})

    @classmethod
    def management(cls, **kw) -> "PerspectiveConfig":
        return cls(**{"name": "management", "funding_rate_source": "management_yield",
                      "survival_mode": "first_to_default", "include_dva": False, "bank_defaultable": False,
                      "funding_symmetry": "symmetric", "funding_aggregation": "per_netting_set_sum", **kw})

    @classmethod
    def preset(cls, name: str, **kw) -> "PerspectiveConfig":
        if name == "accounting":
            return cls.accounting(**kw)
        if name == "management":
            return cls.management(**kw)
        raise ConfigError(f"unknown perspective preset {name!r}")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PerspectiveConfig":
        doc = dict(doc)
        base = doc.pop("preset", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown perspective fields {sorted(unknown)}")
        cfg = cls.preset(base, **doc) if base else cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.funding_rate_source not in FUNDING_SOURCES:
            raise ConfigError(f"unknown funding_rate_source {self.funding_rate_source!r}")
        if self.survival_mode not in SURVIVAL_MODES:
            raise ConfigError(f"unknown survival_mode {self.survival_mode!r}")
        if self.funding_symmetry not in SYMMETRIES:
            raise ConfigError(f"unknown funding_symmetry {self.funding_symmetry!r}")
        if self.funding_aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown funding_aggregation {self.funding_aggregation!r}")
        if self.margin_marking not in MARGIN_MARKING:
            raise ConfigError(f"unknown margin_marking {self.margin_marking!r}")
        if self.funding_rate_source == "explicit" and not self.funding_curve_id:
            raise ConfigError("explicit funding_rate_source needs funding_curve_id")
        if self.funding_symmetry == "asymmetric":
            if self.funding_aggregation != "legal_entity_single_set":
                raise ConfigError("asymmetric funding requires funding_aggregation = legal_entity_single_set")
            if not (self.borrow_curve_id and self.lend_curve_id):
                raise ConfigError("asymmetric funding needs borrow_curve_id and lend_curve_id")


# --- weights ---------------------------------------------------------------------

@dataclass(frozen=True)
class SurvivalWeights:
    """Default densities and joint survival at grid nodes."""

    w_cva: np.ndarray
    w_dva: np.ndarray
    w_joint: np.ndarray


def survival_weights(bank_hazard: TermCurve, cpty_hazard: TermCurve, grid, mode: str) -> SurvivalWeights:
    """Node values of the default densities used by CVA/DVA and of the
    survival factor used by FVA/ColVA (always bilateral)."""
    if mode not in SURVIVAL_MODES:
        raise ConfigError(f"unknown survival_mode {mode!r}")
    grid = np.asarray(grid, dtype=float)
    qb = np.exp(-bank_hazard.integral(grid))
    qc = np.exp(-cpty_hazard.integral(grid))
    lb, lc = bank_hazard.rate(grid), cpty_hazard.rate(grid)
    if mode == "first_to_default":
        return SurvivalWeights(qb * qc * lc, qb * qc * lb, qb * qc)
    return SurvivalWeights(qc * lc, qb * lb, qb * qc)


@dataclass(frozen=True)
class IntervalWeights:
    """Start/end weights of a linear-between-nodes time integral."""

    wl: np.ndarray
    wr: np.ndarray

    @classmethod
    def build(cls, grid, kappa: TermCurve, coeff: TermCurve) -> "IntervalWeights":
        return cls(*interval_weights(grid, kappa, coeff))

    def __add__(self, other: "IntervalWeights") -> "IntervalWeights":
        return IntervalWeights(self.wl + other.wl, self.wr + other.wr)

    def total(self) -> float:
        return float(self.wl.sum() + self.wr.sum())


def _apply(x: NodeValues, w: IntervalWeights) -> np.ndarray:
    return x.starts() @ w.wl + x.ends() @ w.wr


def _apply_split(x: NodeValues, pos: IntervalWeights, neg: IntervalWeights, k) -> np.ndarray:
    a = np.ascontiguousarray(x.starts())
    b = np.ascontiguousarray(x.ends())
    return (k.split_weighted_sum(a, np.ascontiguousarray(pos.wl), np.ascontiguousarray(neg.wl))
            + k.split_weighted_sum(b, np.ascontiguousarray(pos.wr), np.ascontiguousarray(neg.wr)))


def _zero_w(n: int) -> IntervalWeights:
    return IntervalWeights(np.zeros(n), np.zeros(n))


def _spread(a: TermCurve, b: TermCurve) -> TermCurve:
    return curve_combine(a, b, "subtract", kind="discount")


def _funding_kappa(r_f: TermCurve, bank_hazard: TermCurve) -> TermCurve:
    return curve_combine(r_f, bank_hazard, "add", kind="discount")


def credit_weights(grid, r_f: TermCurve, cpty_hazard: TermCurve, cpty_recovery: RecoverySchedule,
                   bank_hazard: TermCurve, bank_recovery: RecoverySchedule, mode: str
                   ) -> tuple[IntervalWeights, IntervalWeights]:
    """Discounted loss-density weights for CVA and DVA."""
    if mode == "first_to_default":
        k_c = k_b = curve_combine(_funding_kappa(r_f, bank_hazard), cpty_hazard, "add", kind="discount")
    elif mode == "unilateral":
        k_c = curve_combine(r_f, cpty_hazard, "add", kind="discount")
        k_b = curve_combine(r_f, bank_hazard, "add", kind="discount")
    else:
        raise ConfigError(f"unknown survival_mode {mode!r}")
    c_c = curve_product(cpty_recovery.loss_curve(), cpty_hazard)
    c_b = curve_product(bank_recovery.loss_curve(), bank_hazard)
    return IntervalWeights.build(grid, k_c, c_c), IntervalWeights.build(grid, k_b, c_b)


def funding_weights(grid, r_f: TermCurve, bank_hazard: TermCurve, spread: TermCurve) -> IntervalWeights:
    """Weights for ``int p^{r_F} Q^B x(s) spread(s) ds``; counterparty
    survival is applied to ``x`` at the nodes."""
    return IntervalWeights.build(grid, _funding_kappa(r_f, bank_hazard), spread)


def compute_colva(margins: NodeValues, grid, r_sys: TermCurve, r_c: TermCurve, r_f: TermCurve,
                  bank_hazard: TermCurve | None = None, cpty_hazard: TermCurve | None = None) -> np.ndarray:
    """Per-path ColVA of one CSA's margin paths."""
    bank_hazard = bank_hazard or zero_curve()
    w = funding_weights(grid, r_f, bank_hazard, _spread(r_c, r_sys))
    if cpty_hazard is not None:
        margins = margins.scale_nodes(np.exp(-cpty_hazard.integral(np.asarray(grid))))
    return _apply(margins, w)


def compute_fva(funding: NodeValues, grid, r_sys: TermCurve, r_f: TermCurve,
                bank_hazard: TermCurve | None = None, cpty_hazard: TermCurve | None = None,
                borrow: TermCurve | None = None, lend: TermCurve | None = None,
                backend: str | None = None) -> np.ndarray:
    """Per-path FVA. With ``borrow``/``lend`` the spread depends on the sign of F."""
    bank_hazard = bank_hazard or zero_curve()
    if cpty_hazard is not None:
        funding = funding.scale_nodes(np.exp(-cpty_hazard.integral(np.asarray(grid))))
    if (borrow is None) != (lend is None):
        raise ConfigError("asymmetric funding needs both borrow and lend curves")
    if borrow is None:
        return _apply(funding, funding_weights(grid, r_f, bank_hazard, _spread(r_f, r_sys)))
    wb = funding_weights(grid, r_f, bank_hazard, _spread(borrow, r_sys))
    wl = funding_weights(grid, r_f, bank_hazard, _spread(lend, r_sys))
    return _apply_split(funding, wb, wl, kernels.get_backend(backend))


def compute_cva_dva(exposure: NodeValues, grid, r_f: TermCurve, cpty_hazard: TermCurve,
                    cpty_recovery: RecoverySchedule, bank_hazard: TermCurve | None = None,
                    bank_recovery: RecoverySchedule | None = None, mode: str = "unilateral",
                    include_dva: bool = True, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-path CVA and DVA of the uncollateralized exposure ``V - M``."""
    bank_hazard = bank_hazard or zero_curve()
    bank_recovery = bank_recovery or RecoverySchedule.constant(0.4)
    wc, wd = credit_weights(grid, r_f, cpty_hazard, cpty_recovery, bank_hazard, bank_recovery, mode)
    k = kernels.get_backend(backend)
    n = len(grid)
    cva = _apply_split(exposure, wc, _zero_w(n), k)
    if not include_dva:
        return cva, np.zeros_like(cva)
    neg = IntervalWeights(-wd.wl, -wd.wr)
    return cva, _apply_split(exposure, _zero_w(n), neg, k)


# --- resolved run inputs ------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedCurves:
    r_sys: TermCurve
    r_f: TermCurve
    bank_hazard: TermCurve
    bank_recovery: RecoverySchedule
    borrow: TermCurve | None = None
    lend: TermCurve | None = None


def resolve_curves(config: PerspectiveConfig, curves: CurveSet, ledger: IssuanceLedger | None,
                   marking_curve: TermCurve | None = None) -> ResolvedCurves:
    config.validate()
    if marking_curve is not None:
        r_sys = marking_curve
    elif config.marking_curve_id:
        r_sys = curves[config.marking_curve_id]
    else:
        r_sys = curves.first_of_kind("discount")
    src = config.funding_rate_source
    if src == "explicit":
        r_f = curves[config.funding_curve_id]
    elif ledger is None:
        raise ConfigError(f"funding_rate_source {src!r} needs an issuance ledger")
    elif src == "accounting_liquidity":
        r_f = ftp_accounting(ledger, approximate=config.ftp_approximate)
    else:
        r_f = curves[config.funding_curve_id] if config.funding_curve_id else ftp_management(ledger)
    if not config.bank_defaultable:
        bank_hazard = zero_curve("bank_hazard")
    elif config.bank_hazard_curve_id:
        bank_hazard = curves[config.bank_hazard_curve_id]
    elif ledger is not None:
        bank_hazard = ledger.bank_hazard
    else:
        bank_hazard = zero_curve("bank_hazard")
    bank_recovery = ledger.bank_recovery if ledger is not None else RecoverySchedule.constant(0.4)
    borrow = lend = None
    if config.funding_symmetry == "asymmetric":
        borrow, lend = curves[config.borrow_curve_id], curves[config.lend_curve_id]
    return ResolvedCurves(r_sys, r_f, bank_hazard, bank_recovery, borrow, lend)


@dataclass
class _NSPlan:
    ns: NettingSet
    q_c: np.ndarray
    w_cva: IntervalWeights
    w_dva: IntervalWeights
    w_colva: dict[str, IntervalWeights]


@dataclass
class _Plan:
    grid: np.ndarray
    rc: ResolvedCurves
    config: PerspectiveConfig
    sets: list[_NSPlan]
    w_fund: IntervalWeights
    w_borrow: IntervalWeights | None
    w_lend: IntervalWeights | None


def _build_plan(portfolio: Portfolio, hierarchy: NettingHierarchy, rc: ResolvedCurves,
                config: PerspectiveConfig, grid_step: float) -> _Plan:
    grid = portfolio_grid(portfolio, grid_step)
    horizon = grid[-1]
    named = [rc.r_sys, rc.r_f] + [c for c in (rc.borrow, rc.lend) if c is not None]
    for c in named:
        if c.horizon < horizon:
            raise CurveError(f"curve {c.id!r} horizon {c.horizon} shorter than portfolio horizon {horizon}")
    sets = []
    for ns in hierarchy.netting_sets:
        w_cva, w_dva = credit_weights(grid, rc.r_f, ns.hazard, ns.recovery, rc.bank_hazard,
                                      rc.bank_recovery, config.survival_mode)
        w_colva = {c.id: funding_weights(grid, rc.r_f, rc.bank_hazard, _spread(c.remuneration_curve, rc.r_sys))
                   for c in ns.csas}
        sets.append(_NSPlan(ns, np.exp(-ns.hazard.integral(grid)), w_cva, w_dva, w_colva))
    w_fund = funding_weights(grid, rc.r_f, rc.bank_hazard, _spread(rc.r_f, rc.r_sys))
    w_b = w_l = None
    if rc.borrow is not None:
        w_b = funding_weights(grid, rc.r_f, rc.bank_hazard, _spread(rc.borrow, rc.r_sys))
        w_l = funding_weights(grid, rc.r_f, rc.bank_hazard, _spread(rc.lend, rc.r_sys))
    return _Plan(grid, rc, config, sets, w_fund, w_b, w_l)


METRICS = ("cva", "dva", "fva", "colva")


def _run_block(portfolio: Portfolio, plan: _Plan, seed: int, start: int, n: int, backend: str | None):
    k = kernels.get_backend(backend)
    grid = plan.grid
    paths = simulate(portfolio.model, grid, n, seed, start, backend=backend)
    deals = portfolio.deals
    cube = mark_to_future(deals, paths, plan.rc.r_sys, portfolio.model, backend=backend)
    by_id = {d.id: d for d in deals}
    margin_cubes: dict[str, object] = {}
    out: dict[str, np.ndarray] = {}
    n_t = len(grid)
    zero = _zero_w(n_t)
    g_le = NodeValues.zeros(n, n_t, cube.jumps)
    fva_sum = np.zeros(n)
    for sp in plan.sets:
        ns = sp.ns
        v = cube.aggregate(ns.deal_ids)
        m = NodeValues.zeros(n, n_t, cube.jumps)
        colva = np.zeros(n)
        for c in ns.csas:
            if plan.config.margin_marking == "system":
                src = cube
            else:
                key = c.remuneration_curve.id + repr(c.remuneration_curve.pillars)
                if key not in margin_cubes:
                    margin_cubes[key] = mark_to_future(deals, paths, c.remuneration_curve, portfolio.model,
                                                       backend=backend)
                src = margin_cubes[key]
            mc = margin_paths(src, c)
            m = m + mc
            colva += _apply(mc.scale_nodes(sp.q_c), sp.w_colva[c.id])
        x = v - m
        f = x.scale_nodes(sp.q_c)
        cva = _apply_split(x, sp.w_cva, zero, k)
        if plan.config.include_dva:
            dva = _apply_split(x, zero, IntervalWeights(-sp.w_dva.wl, -sp.w_dva.wr), k)
        else:
            dva = np.zeros(n)
        if plan.w_borrow is not None:
            fva = _apply_split(f, plan.w_borrow, plan.w_lend, k)
        else:
            fva = _apply(f, plan.w_fund)
        g_le = g_le + f
        fva_sum += fva
        for name, val in zip(METRICS, (cva, dva, fva, colva)):
            out[f"{ns.id}/{name}"] = val
    if plan.w_borrow is not None:
        out["LE/fva_single_set"] = _apply_split(g_le, plan.w_borrow, plan.w_lend, k)
    else:
        out["LE/fva_single_set"] = _apply(g_le, plan.w_fund)
    out["LE/fva_ns_sum"] = fva_sum
    v0 = {d.id: float(cube.values[i, 0, 0]) for i, d in enumerate(deals)} if start == 0 else None
    return out, v0


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("XVA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def inputs_digest(portfolio: Portfolio, hierarchy: NettingHierarchy, r_sys: TermCurve) -> str:
    """Fingerprint of everything that fixes the exposure cube."""
    doc = {
        "underlyings": [(u.id, u.spot, u.volatility, u.drift.pillars) for u in portfolio.model.underlyings],
        "correlation": np.asarray(portfolio.model.correlation).tolist(),
        "deals": [
            {**{k: v for k, v in d.__dict__.items() if k != "profile_curve"},
             "profile_curve": None if d.profile_curve is None else d.profile_curve.pillars}
            for d in portfolio.deals
        ],
        "netting_sets": [
            (ns.id, ns.hazard.pillars, ns.recovery.steps, ns.uncovered_deal_ids,
             [(c.id, c.mode, c.deal_ids, c.threshold_bank, c.threshold_cpty, c.remuneration_curve.pillars)
              for c in ns.csas])
            for ns in hierarchy.netting_sets
        ],
        "r_sys": r_sys.pillars,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]


# --- report --------------------------------------------------------------------------

@dataclass
class MetricBlock:
    v: float
    cva: float
    dva: float
    fva: float
    colva: float
    v_hat: float
    se_cva: float
    se_dva: float
    se_fva: float
    se_colva: float
    se_v_hat: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class XVAReport:
    netting_sets: dict[str, MetricBlock]
    legal_entity: MetricBlock
    fva_ns_sum: float
    fva_single_set: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "netting_sets": {k: v.to_dict() for k, v in self.netting_sets.items()},
            "legal_entity": {**self.legal_entity.to_dict(), "fva_ns_sum": self.fva_ns_sum,
                             "fva_single_set": self.fva_single_set},
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["level", "id", "v", "cva", "dva", "fva", "colva", "v_hat",
                "se_cva", "se_dva", "se_fva", "se_colva", "se_v_hat"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for nid, b in self.netting_sets.items():
            w.writerow(["netting_set", nid] + [repr(getattr(b, c)) for c in cols[2:]])
        w.writerow(["legal_entity", "LE"] + [repr(getattr(self.legal_entity, c)) for c in cols[2:]])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: dict) -> "XVAReport":
        le = dict(doc["legal_entity"])
        ns_sum = le.pop("fva_ns_sum")
        single = le.pop("fva_single_set")
        return cls({k: MetricBlock(**v) for k, v in doc["netting_sets"].items()}, MetricBlock(**le),
                   ns_sum, single, doc.get("metadata", {}))

    @classmethod
    def from_json(cls, text: str) -> "XVAReport":
        return cls.from_dict(json.loads(text))


def _stats(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = float(np.sum(x) / n)
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _block(v: float, cva, dva, fva, colva) -> MetricBlock:
    v_hat_paths = v - colva - fva - cva + dva
    (c, sc), (d, sd), (f, sf), (co, sco), (vh, svh) = map(_stats, (cva, dva, fva, colva, v_hat_paths))
    return MetricBlock(v, c, d, f, co, vh, sc, sd, sf, sco, svh)


def run_engine(portfolio: Portfolio, hierarchy: NettingHierarchy, curves: CurveSet,
               ledger: IssuanceLedger | None, config: PerspectiveConfig, n_paths: int = 10000,
               seed: int = 1, grid_step: float = 1.0 / 52.0, marking_curve: TermCurve | None = None,
               threads: int | None = None, backend: str | None = None) -> XVAReport:
    """Simulate, mark, margin and integrate; aggregate per the configuration."""
    if n_paths < 1:
        raise ConfigError("n_paths must be at least 1")
    if not grid_step > 0.0:
        raise ConfigError("grid_step must be positive")
    config.validate()
    hierarchy.validate(portfolio)
    rc = resolve_curves(config, curves, ledger, marking_curve)
    plan = _build_plan(portfolio, hierarchy, rc, config, grid_step)
    starts = list(range(0, n_paths, BLOCK_SIZE))
    sizes = [min(BLOCK_SIZE, n_paths - s) for s in starts]
    job = lambda a: _run_block(portfolio, plan, seed, a[0], a[1], backend)
    n_workers = min(_threads(threads), len(starts))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, zip(starts, sizes)))
    else:
        results = [job(a) for a in zip(starts, sizes)]
    keys = results[0][0].keys()
    paths = {key: np.concatenate([r[0][key] for r in results]) for key in keys}
    v0 = results[0][1]

    blocks = {}
    tot = {m: np.zeros(n_paths) for m in METRICS}
    v_le = 0.0
    for ns in hierarchy.netting_sets:
        v_ns = float(sum(v0[d] for d in ns.deal_ids))
        v_le += v_ns
        arr = [paths[f"{ns.id}/{m}"] for m in METRICS]
        blocks[ns.id] = _block(v_ns, *arr)
        for m, a in zip(METRICS, arr):
            tot[m] = tot[m] + a
    if config.funding_aggregation == "legal_entity_single_set":
        tot["fva"] = paths["LE/fva_single_set"]
    le = _block(v_le, tot["cva"], tot["dva"], tot["fva"], tot["colva"])
    meta = {
        "perspective": config.name,
        "config": config.to_dict(),
        "seed": int(seed),
        "n_paths": int(n_paths),
        "grid_step": float(grid_step),
        "grid_nodes": int(len(plan.grid)),
        "marking_curve": rc.r_sys.to_dict(),
        "funding_curve": rc.r_f.to_dict(),
        "bank_hazard": rc.bank_hazard.pillars,
        "inputs_digest": inputs_digest(portfolio, hierarchy, rc.r_sys),
        "kernels": kernels.BACKEND if backend is None else backend,
    }
    return XVAReport(blocks, le, float(np.sum(paths["LE/fva_ns_sum"]) / n_paths),
                     float(np.sum(paths["LE/fva_single_set"]) / n_paths), meta)


# --- transition ------------------------------------------------------------------------

class TransitionError(ValueError):
    """Reports that cannot be compared."""


@dataclass
class TransitionSummary:
    delta_v_hat: float
    dva_removal: float
    funding_delta: float
    credit_delta: float
    netting_sets: dict[str, dict[str, float]]
    metadata: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _delta(a: MetricBlock, b: MetricBlock) -> dict[str, float]:
    return {
        "delta_v_hat": b.v_hat - a.v_hat,
        "dva_removal": b.dva - a.dva,
        "funding_delta": -((b.fva + b.colva) - (a.fva + a.colva)),
        "credit_delta": -(b.cva - a.cva),
    }


def transition_report(report_acc: XVAReport, report_mgmt: XVAReport) -> TransitionSummary:
    """Change in adjusted value when moving from the first report's
    perspective to the second's, split into DVA, funding and credit parts."""
    for key in ("seed", "n_paths", "grid_step", "inputs_digest"):
        a, b = report_acc.metadata.get(key), report_mgmt.metadata.get(key)
        if a != b:
            raise TransitionError(f"run metadata mismatch on {key!r}: {a!r} vs {b!r}")
    if set(report_acc.netting_sets) != set(report_mgmt.netting_sets):
        raise TransitionError("reports cover different netting sets")
    le = _delta(report_acc.legal_entity, report_mgmt.legal_entity)
    per_ns = {k: _delta(report_acc.netting_sets[k], report_mgmt.netting_sets[k]) for k in report_acc.netting_sets}
    meta = {"from": report_acc.metadata.get("perspective"), "to": report_mgmt.metadata.get("perspective"),
            **{k: report_acc.metadata.get(k) for k in ("seed", "n_paths", "grid_step", "inputs_digest")}}
    return TransitionSummary(le["delta_v_hat"], le["dva_removal"], le["funding_delta"], le["credit_delta"],
                             per_ns, meta)


def with_overrides(config: PerspectiveConfig, **kw) -> PerspectiveConfig:
    cfg = replace(config, **kw)
    cfg.validate()
    return cfg
