import math

import numpy as np
import pytest
from scipy.integrate import quad

from xvaframe.collateral import NettingHierarchy, NettingSet
from xvaframe.exposure import Deal, NodeValues, Portfolio, RiskFactorModel
from xvaframe.termstructures import RecoverySchedule, TermCurve
from xvaframe.xva import (
    ConfigError, PerspectiveConfig, TransitionError, XVAReport, compute_colva, compute_cva_dva, compute_fva,
    run_engine, survival_weights, transition_report, with_overrides,
)

from fixtures import OIS, curve_set, deterministic_portfolio, ledger, stochastic_portfolio, three_set_hierarchy

# frozen from tests/oracles/derive.py
CVA_CONSTANT_EXPOSURE = 5.308781206286282
CVA_CONSTANT_EXPOSURE_FTD = 5.183635586365643
W_JOINT_FLAT_S5 = 0.9048374180359595
FVA_CONSTANT_F = 1.5
COLVA_CONSTANT_M = 1.0

BORROW = TermCurve.flat(0.03, id="borrow", kind="funding")
LEND = TermCurve.flat(0.012, id="lend", kind="funding")
ZERO = TermCurve.flat(0.0, kind="hazard")


def const(value, T, step=1 / 365):
    grid = np.linspace(0.0, T, int(round(T / step)) + 1)
    return grid, NodeValues(np.full((1, len(grid)), float(value)), np.zeros((1, 0)), np.array([], dtype=np.intp))


def det_run(config, pf=None, h=None, led=None, **kw):
    return run_engine(pf or deterministic_portfolio(), h or three_set_hierarchy(), curve_set(BORROW, LEND),
                      led or ledger(), config, kw.pop("n_paths", 1), 1, kw.pop("grid_step", 1 / 52), **kw)


# --- weights ----------------------------------------------------------------------

def test_ftd_degenerates_to_unilateral_without_bank_hazard():
    grid = np.linspace(0, 5, 11)
    h = TermCurve([(0.0, 0.01), (2.0, 0.03)], kind="hazard")
    a = survival_weights(ZERO, h, grid, "first_to_default")
    b = survival_weights(ZERO, h, grid, "unilateral")
    np.testing.assert_array_equal(a.w_cva, b.w_cva)


def test_joint_survival_example():
    h = TermCurve.flat(0.01, kind="hazard")
    assert survival_weights(h, h, [0.0, 5.0], "first_to_default").w_joint[-1] == pytest.approx(W_JOINT_FLAT_S5,
                                                                                              abs=1e-15)


@pytest.mark.parametrize("T", [0.7, 3.0, 9.0])
def test_probability_mass_conservation(T):
    hb = TermCurve([(0.0, 0.02), (1.0, 0.05)], kind="hazard")
    hc = TermCurve([(0.0, 0.04), (2.5, 0.01)], kind="hazard")
    w = lambda s: survival_weights(hb, hc, [s], "first_to_default")
    mass = sum(quad(lambda s: getattr(w(s), k)[0], 0, T, points=[1.0, 2.5], epsabs=1e-14)[0]
               for k in ("w_cva", "w_dva"))
    assert mass + w(T).w_joint[0] == pytest.approx(1.0, abs=1e-12)


def test_unknown_mode():
    with pytest.raises(ConfigError):
        survival_weights(ZERO, ZERO, [0.0, 1.0], "bilateral")


# --- closed-form oracles ------------------------------------------------------------

def test_cva_oracle():
    grid, x = const(100.0, 5.0)
    cva, dva = compute_cva_dva(x, grid, TermCurve.flat(0.03), TermCurve.flat(0.02, kind="hazard"),
                               RecoverySchedule.constant(0.4))
    assert cva[0] == pytest.approx(CVA_CONSTANT_EXPOSURE, abs=1e-4)
    assert abs(cva[0] - CVA_CONSTANT_EXPOSURE) < 1e-10
    assert dva[0] == 0.0


def test_cva_oracle_first_to_default():
    grid, x = const(100.0, 5.0)
    cva, _ = compute_cva_dva(x, grid, TermCurve.flat(0.03), TermCurve.flat(0.02, kind="hazard"),
                             RecoverySchedule.constant(0.4), TermCurve.flat(0.01, kind="hazard"),
                             mode="first_to_default")
    assert cva[0] == pytest.approx(CVA_CONSTANT_EXPOSURE_FTD, abs=1e-10)


def test_dva_is_a_positive_benefit():
    grid, x = const(-100.0, 5.0)
    cva, dva = compute_cva_dva(x, grid, TermCurve.flat(0.03), ZERO, RecoverySchedule.constant(0.4),
                               TermCurve.flat(0.02, kind="hazard"), RecoverySchedule.constant(0.4))
    assert cva[0] == 0.0
    assert dva[0] == pytest.approx(CVA_CONSTANT_EXPOSURE, abs=1e-10)


def test_full_recovery_and_full_collateral_give_no_credit_charge():
    grid, x = const(100.0, 5.0)
    h = TermCurve.flat(0.02, kind="hazard")
    assert compute_cva_dva(x, grid, TermCurve.flat(0.03), h, RecoverySchedule.constant(1.0))[0][0] == 0.0
    zero_x = x - x
    cva, dva = compute_cva_dva(zero_x, grid, TermCurve.flat(0.03), h, RecoverySchedule.constant(0.4), h)
    assert cva[0] == 0.0 and dva[0] == 0.0


def test_fva_oracle():
    grid, f = const(100.0, 1.0)
    fva = compute_fva(f, grid, TermCurve.flat(-0.015), TermCurve.flat(0.0))
    assert fva[0] == pytest.approx(FVA_CONSTANT_F, abs=1e-12)
    assert compute_fva(f, grid, OIS, OIS)[0] == 0.0
    assert compute_fva(f - f, grid, TermCurve.flat(-0.015), TermCurve.flat(0.0))[0] == 0.0


def test_colva_oracle():
    grid, m = const(100.0, 1.0)
    colva = compute_colva(m, grid, TermCurve.flat(0.0), TermCurve.flat(0.01), TermCurve.flat(0.0))
    assert colva[0] == pytest.approx(COLVA_CONSTANT_M, abs=1e-12)
    assert compute_colva(m, grid, OIS, OIS, TermCurve.flat(0.03))[0] == 0.0


def test_fva_asymmetric_rates_by_sign():
    grid, f = const(100.0, 1.0)
    z = TermCurve.flat(0.0)
    assert compute_fva(f, grid, z, z, borrow=BORROW, lend=LEND)[0] == pytest.approx(3.0, abs=1e-12)
    assert compute_fva(f * -1.0, grid, z, z, borrow=BORROW, lend=LEND)[0] == pytest.approx(-1.2, abs=1e-12)
    with pytest.raises(ConfigError):
        compute_fva(f, grid, z, z, borrow=BORROW)


# --- configuration --------------------------------------------------------------------

def test_presets():
    acc, mgmt = PerspectiveConfig.accounting(), PerspectiveConfig.management()
    assert (acc.funding_rate_source, acc.survival_mode, acc.include_dva) == ("accounting_liquidity", "unilateral", True)
    assert (mgmt.funding_rate_source, mgmt.include_dva, mgmt.bank_defaultable) == ("management_yield", False, False)
    assert acc.exit_price == "system_marking" and acc.invariance_rate == "funding_rate"
    assert PerspectiveConfig.from_dict(acc.to_dict()) == acc


def test_config_contradictions_rejected():
    with pytest.raises(ConfigError):
        PerspectiveConfig.accounting(funding_symmetry="asymmetric", borrow_curve_id="borrow",
                                     lend_curve_id="lend").validate()
    with pytest.raises(ConfigError):
        PerspectiveConfig.from_dict({"preset": "accounting", "funding_symmetry": "asymmetric",
                                     "funding_aggregation": "legal_entity_single_set"})
    with pytest.raises(ConfigError):
        PerspectiveConfig.from_dict({"survival": "unilateral"})
    with pytest.raises(ConfigError):
        PerspectiveConfig.preset("regulatory")
    with pytest.raises(ConfigError):
        det_run(PerspectiveConfig.accounting(), led=None, n_paths=0)


def test_ledger_required_for_ledger_based_rates():
    with pytest.raises(ConfigError):
        run_engine(deterministic_portfolio(), three_set_hierarchy(), curve_set(), None,
                   PerspectiveConfig.accounting(), 1, 1)


# --- engine ---------------------------------------------------------------------------

def test_empty_portfolio():
    r = run_engine(Portfolio(), NettingHierarchy(()), curve_set(), ledger(), PerspectiveConfig.accounting(), 4, 1)
    le = r.legal_entity
    assert (le.v, le.cva, le.dva, le.fva, le.colva, le.v_hat) == (0.0,) * 6


def test_management_has_no_dva():
    r = det_run(PerspectiveConfig.management())
    assert r.legal_entity.dva == 0.0
    assert all(b.dva == 0.0 for b in r.netting_sets.values())


def test_le_credit_is_sum_of_netting_sets():
    r = det_run(PerspectiveConfig.accounting())
    for k in ("cva", "dva", "colva", "fva"):
        assert getattr(r.legal_entity, k) == pytest.approx(sum(getattr(b, k) for b in r.netting_sets.values()),
                                                           rel=1e-13)
    le = r.legal_entity
    assert le.v_hat == pytest.approx(le.v - le.colva - le.fva - le.cva + le.dva, rel=1e-13)


def test_first_to_default_dominance():
    for scale in (0.5, 1.0, 3.0):
        h = three_set_hierarchy(scale)
        u = det_run(PerspectiveConfig.accounting(), h=h)
        f = det_run(PerspectiveConfig.accounting(survival_mode="first_to_default"), h=h)
        for k in u.netting_sets:
            assert f.netting_sets[k].cva <= u.netting_sets[k].cva
        assert f.legal_entity.cva < u.legal_entity.cva


def test_first_to_default_equal_without_bank_hazard():
    led = ledger(bank_hazard=TermCurve.flat(0.0, kind="hazard"))
    u = det_run(PerspectiveConfig.accounting(), led=led)
    f = det_run(PerspectiveConfig.accounting(survival_mode="first_to_default"), led=led)
    assert f.legal_entity.cva == u.legal_entity.cva


def test_symmetric_aggregation_matches_single_set():
    pf = stochastic_portfolio()
    cfg = PerspectiveConfig.accounting()
    r = run_engine(pf, three_set_hierarchy(stochastic=True), curve_set(), ledger(), cfg, 2048, 3, 1 / 26)
    notional = sum(abs(d.notional) for d in pf.deals)
    assert abs(r.fva_ns_sum - r.fva_single_set) <= 1e-12 * notional
    single = with_overrides(cfg, funding_aggregation="legal_entity_single_set")
    r2 = run_engine(pf, three_set_hierarchy(stochastic=True), curve_set(), ledger(), single, 2048, 3, 1 / 26)
    assert abs(r2.legal_entity.fva - r.legal_entity.fva) <= 1e-12 * notional


def asymmetric():
    return PerspectiveConfig.management(funding_symmetry="asymmetric", borrow_curve_id="borrow",
                                        lend_curve_id="lend", funding_aggregation="legal_entity_single_set")


def test_asymmetric_dominance():
    r = det_run(asymmetric())
    assert r.fva_ns_sum > r.fva_single_set
    assert r.legal_entity.fva == r.fva_single_set


def test_zero_hazard_degeneracy():
    h = three_set_hierarchy(0.0)
    led = ledger(0.0, 0.0)
    r = det_run(PerspectiveConfig.accounting(), h=h, led=led)
    assert r.legal_entity.cva == 0.0 and r.legal_entity.dva == 0.0
    w = survival_weights(led.bank_hazard, h.netting_sets[0].hazard, np.linspace(0, 5, 6), "unilateral")
    assert np.all(w.w_joint == 1.0)


def test_linearity():
    pf, h = deterministic_portfolio(), three_set_hierarchy()
    a = det_run(PerspectiveConfig.accounting(), pf, h)
    b = det_run(PerspectiveConfig.accounting(), pf.scaled(2.5), h.scaled_thresholds(2.5))
    for k in ("v", "cva", "dva", "fva", "colva", "v_hat"):
        assert getattr(b.legal_entity, k) == pytest.approx(2.5 * getattr(a.legal_entity, k), rel=1e-12)


def test_standard_errors_reported():
    r = run_engine(stochastic_portfolio(), three_set_hierarchy(stochastic=True), curve_set(), ledger(),
                   PerspectiveConfig.accounting(), 512, 5, 1 / 12)
    assert r.legal_entity.se_cva > 0.0 and r.legal_entity.se_v_hat > 0.0
    assert det_run(PerspectiveConfig.accounting()).legal_entity.se_cva == 0.0


def test_perspectives_share_the_cube():
    a = det_run(PerspectiveConfig.accounting())
    b = det_run(PerspectiveConfig.management())
    assert a.legal_entity.v == b.legal_entity.v
    assert a.metadata["inputs_digest"] == b.metadata["inputs_digest"]
    assert a.metadata["funding_curve"] != b.metadata["funding_curve"]


def test_report_round_trip():
    r = det_run(PerspectiveConfig.accounting())
    assert XVAReport.from_json(r.to_json()).to_json() == r.to_json()
    assert r.to_csv().splitlines()[0].startswith("level,id,v,cva")


# --- transition ------------------------------------------------------------------------

def asset_heavy():
    prof = ((0.0, 100.0), (3.0, 60.0), (5.0, 10.0))
    return Portfolio(RiskFactorModel(), (Deal("a1", "deterministic_exposure", 5.0, profile=prof, profile_curve=OIS),
                                         Deal("a2", "deterministic_exposure", 3.0, profile=((0.0, 40.0), (3.0, 5.0)),
                                              profile_curve=OIS)))



def one_set(pf):
    return NettingHierarchy((NettingSet("N", TermCurve.flat(0.02, kind="hazard"), RecoverySchedule.constant(0.4),
                                        (), tuple(d.id for d in pf.deals)),))


def transition(pf, led):
    h = one_set(pf)
    a = det_run(PerspectiveConfig.accounting(), pf, h, led)
    b = det_run(PerspectiveConfig.management(), pf, h, led)
    return transition_report(a, b)


def test_transition_asset_heavy_loses():
    t = transition(asset_heavy(), ledger(0.012, 0.015))
    assert t.delta_v_hat < 0.0 and t.funding_delta < 0.0 and t.dva_removal <= 0.0


def test_transition_liability_heavy_gains_on_funding():
    t = transition(Portfolio(RiskFactorModel(), tuple(Deal(d.id, d.kind, d.maturity, direction=-1.0,
                                                           profile=d.profile, profile_curve=OIS)
                                                      for d in asset_heavy().deals)), ledger(0.012, 0.015))
    assert t.funding_delta > 0.0
    assert t.dva_removal < 0.0


def test_transition_zero_cds_is_dva_only():
    t = transition(asset_heavy(), ledger(0.0, 0.0))
    assert t.delta_v_hat == pytest.approx(t.dva_removal, abs=1e-12)
    assert abs(t.funding_delta) < 1e-12 and t.credit_delta == 0.0


def test_transition_metadata_mismatch():
    a = det_run(PerspectiveConfig.accounting())
    b = det_run(PerspectiveConfig.management(), grid_step=1 / 12)
    with pytest.raises(TransitionError):
        transition_report(a, b)
