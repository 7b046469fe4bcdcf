"""The frozen reference values in the suite match a fresh oracle run."""

import importlib.util
from pathlib import Path

import pytest

import test_acceptance
import test_exposure
import test_funding_ledger
import test_termstructures
import test_xva

spec = importlib.util.spec_from_file_location("derive", Path(__file__).parent / "oracles" / "derive.py")
derive = importlib.util.module_from_spec(spec)
spec.loader.exec_module(derive)

FROZEN = {
    "df_two_pillar_s4": test_termstructures.DF_TWO_PILLAR_S4,
    "surv_stepped_s5": test_termstructures.SURV_STEPPED_S5,
    "ftp_acc_two_bonds": test_funding_ledger.FTP_ACC_TWO_BONDS,
    "ftp_mgmt_two_bonds": test_funding_ledger.FTP_MGMT_TWO_BONDS,
    "cva_constant_exposure": test_xva.CVA_CONSTANT_EXPOSURE,
    "cva_constant_exposure_ftd": test_xva.CVA_CONSTANT_EXPOSURE_FTD,
    "w_joint_flat_s5": test_xva.W_JOINT_FLAT_S5,
    "colva_constant_m": test_acceptance.COLVA_CONSTANT_M,
    "remark_profile_s1": test_exposure.REMARK_PROFILE_S1,
}


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_frozen_values_match_oracle():
    fresh = derive.derive()
    for key, frozen in FROZEN.items():
        assert fresh[key] == pytest.approx(frozen, rel=1e-13, abs=1e-15), key
    assert round(fresh["cva_constant_exposure"], 5) == 5.30878
