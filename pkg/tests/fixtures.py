"""Shared portfolios, hierarchies, curves and ledgers for the test-suite."""

from __future__ import annotations

import numpy as np

from xvaframe.collateral import CSATerms, NettingHierarchy, NettingSet
from xvaframe.exposure import Deal, Portfolio, RiskFactorModel, Underlying
from xvaframe.funding_ledger import BondIssuance, IssuanceLedger
from xvaframe.termstructures import CurveSet, RecoverySchedule, TermCurve, curve_combine

OIS = TermCurve([(0.0, 0.01), (2.0, 0.015), (4.0, 0.02)], id="ois", kind="discount")
OIS_UP = curve_combine(OIS, TermCurve.flat(0.02), "add", id="ois_plus_2", kind="discount")


def curve_set(*extra: TermCurve) -> CurveSet:
    cs = CurveSet()
    for c in (OIS, OIS_UP) + extra:
        cs.add(c)
    return cs


def ledger(cds_hist: float = 0.012, cds_now: float = 0.012, bank_hazard: TermCurve | None = None) -> IssuanceLedger:
    bonds = (
        BondIssuance(-2.0, 5.0, 300.0, 0.01, cds_hist, 0.006, "b1"),
        BondIssuance(-1.0, 8.0, 200.0, 0.012, cds_hist, 0.009, "b2"),
    )
    return IssuanceLedger(bonds, cds_now, RecoverySchedule.constant(0.4), bank_hazard)


def hazards(scale: float = 1.0) -> list[TermCurve]:
    return [
        TermCurve([(0.0, 0.01 * scale), (3.0, 0.02 * scale)], id="h1", kind="hazard"),
        TermCurve.flat(0.03 * scale, id="h2", kind="hazard"),
        TermCurve([(0.0, 0.02 * scale), (1.5, 0.04 * scale)], id="h3", kind="hazard"),
    ]


def three_set_hierarchy(hazard_scale: float = 1.0, csa_curve: TermCurve = OIS,
                        stochastic: bool = False) -> NettingHierarchy:
    h = hazards(hazard_scale)
    rec = RecoverySchedule.constant(0.4)
    if stochastic:
        ids = (("c1", "c2"), ("u1", "u2"), ("t1", "t2"))
    else:
        ids = (("c1", "c2"), ("u1", "u2"), ("t1", "t2"))
    return NettingHierarchy((
        NettingSet("NS_collat", h[0], rec, (CSATerms("CSA_full", "bilateral_full", csa_curve, ids[0]),)),
        NettingSet("NS_unsecured", h[1], RecoverySchedule(((0.0, 0.4), (2.5, 0.3))), (), ids[1]),
        NettingSet("NS_threshold", h[2], rec,
                   (CSATerms("CSA_thr", "threshold", csa_curve, ids[2], threshold_bank=5.0, threshold_cpty=10.0),)),
    ))


def deterministic_portfolio(profile_curve: TermCurve = OIS) -> Portfolio:
    def d(i, T, prof):
        return Deal(i, "deterministic_exposure", T, profile=prof, profile_curve=profile_curve)
    return Portfolio(RiskFactorModel(), (
        d("c1", 4.0, ((0.0, 80.0), (4.0, 10.0))),
        d("c2", 3.0, ((0.0, -30.0), (1.0, -35.0), (3.0, -5.0))),
        d("u1", 5.0, ((0.0, 120.0), (2.0, 90.0), (5.0, 30.0))),
        d("u2", 2.5, ((0.0, 25.0), (2.5, 20.0))),
        d("t1", 3.0, ((0.0, 50.0), (3.0, -40.0))),
        d("t2", 1.75, ((0.0, -12.0), (1.75, 8.0))),
    ))


def stochastic_portfolio() -> Portfolio:
    model = RiskFactorModel((
        Underlying("EURUSD", 1.10, 0.10, TermCurve.flat(0.005, id="eur_carry")),
        Underlying("SPX", 100.0, 0.20, TermCurve([(0.0, 0.01), (2.0, 0.015)], id="spx_drift")),
    ), np.array([[1.0, 0.3], [0.3, 1.0]]))
    return Portfolio(model, (
        Deal("c1", "fx_forward", 3.0, notional=1000.0, strike=1.12, underlying="EURUSD"),
        Deal("c2", "european_option", 2.0, notional=1.0, strike=105.0, underlying="SPX", direction=-1.0),
        Deal("u1", "european_option", 4.0, notional=1.5, strike=95.0, underlying="SPX"),
        Deal("u2", "interest_flow_strip", 3.0, notional=400.0, strike=0.02),
        Deal("t1", "fx_forward", 2.5, notional=-800.0, strike=1.08, underlying="EURUSD"),
        Deal("t2", "european_option", 1.5, notional=2.0, strike=100.0, underlying="SPX", option_type="put"),
    ))
