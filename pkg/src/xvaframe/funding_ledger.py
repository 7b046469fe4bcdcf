"""Bond issuance ledger and funds-transfer-pricing estimators.

Each bond records a flat decomposition of its yield at issue into an OIS
rate, a CDS spread and a liquidity spread. The accounting estimator keeps the
liquidity part and the drift of the bank's CDS since issue; the management
estimator is the notional-weighted issue yield.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from xvaframe.termstructures import CurveError, RecoverySchedule, TermCurve


class LedgerError(ValueError):
    """Invalid ledger or an estimator evaluated with no outstanding debt."""


@dataclass(frozen=True)
class BondIssuance:
    issue_time: float
    maturity: float
    notional: float
    ois: float
    cds: float
    liquidity: float
    id: str = ""

    def __post_init__(self):
        if not self.issue_time < self.maturity:
            raise LedgerError(f"bond {self.id!r}: issue_time must precede maturity")
        if not self.notional > 0.0:
            raise LedgerError(f"bond {self.id!r}: notional must be positive")
        for name in ("ois", "cds", "liquidity"):
            if not math.isfinite(getattr(self, name)):
                raise LedgerError(f"bond {self.id!r}: {name} must be finite")

    @property
    def yield_at_issue(self) -> float:
        return self.ois + self.cds + self.liquidity

    def outstanding(self, t: float) -> bool:
        return self.issue_time < t < self.maturity or (self.issue_time == t == 0.0)


@dataclass(frozen=True)
class IssuanceLedger:
    """Issued debt plus today's credit state of the bank.

    ``bank_hazard`` defaults to the flat intensity implied by
    ``current_cds / (1 - R)``.
    """

    bonds: tuple[BondIssuance, ...]
    current_cds: float
    bank_recovery: RecoverySchedule = field(default_factory=lambda: RecoverySchedule.constant(0.4))
    bank_hazard: TermCurve | None = None

    def __post_init__(self):
        object.__setattr__(self, "bonds", tuple(self.bonds))
        if self.bank_hazard is None:
            lgd = 1.0 - self.bank_recovery.steps[0][1]
            lam = self.current_cds / lgd if lgd > 0.0 else 0.0
            if lam < 0.0:
                raise LedgerError("current_cds must be nonnegative")
            object.__setattr__(self, "bank_hazard", TermCurve.flat(lam, id="bank_hazard", kind="hazard"))
        elif self.bank_hazard.kind != "hazard":
            raise LedgerError("bank_hazard must be a hazard curve")

    def outstanding(self, t: float) -> list[BondIssuance]:
        return [b for b in self.bonds if b.outstanding(t)]

    def weights(self, t: float) -> tuple[list[BondIssuance], np.ndarray]:
        live = self.outstanding(t)
        if not live:
            raise LedgerError(f"no outstanding bonds at t={t}")
        f = np.array([b.notional for b in live])
        return live, f / f.sum()

    def total_notional(self, t: float) -> float:
        return float(sum(b.notional for b in self.outstanding(t)))

    def averages(self, t: float) -> dict[str, float]:
        live, w = self.weights(t)
        return {
            "ois": float(w @ [b.ois for b in live]),
            "cds": float(w @ [b.cds for b in live]),
            "liquidity": float(w @ [b.liquidity for b in live]),
            "yield": float(w @ [b.yield_at_issue for b in live]),
        }

    def horizon(self, t: float) -> float:
        return max(b.maturity for b in self.outstanding(t))

    def scaled(self, k: float) -> "IssuanceLedger":
        bonds = [BondIssuance(b.issue_time, b.maturity, b.notional * k, b.ois, b.cds, b.liquidity, b.id)
                 for b in self.bonds]
        return IssuanceLedger(bonds, self.current_cds, self.bank_recovery, self.bank_hazard)


def ftp_accounting(ledger: IssuanceLedger, t: float = 0.0, approximate: bool = False) -> TermCurve:
    """Zero-profit FTP curve for a defaultable bank.

    ``approximate=True`` drops the CDS drift term and returns OIS + liquidity.
    """
    avg = ledger.averages(t)
    rate = avg["ois"] + avg["liquidity"]
    if not approximate:
        rate += avg["cds"] - ledger.current_cds
    return TermCurve.flat(rate, id="ftp_accounting", kind="funding", horizon=ledger.horizon(t))


def ftp_management(ledger: IssuanceLedger, t: float = 0.0) -> TermCurve:
    """Zero-profit FTP curve for a default-free bank: the weighted issue yield."""
    avg = ledger.averages(t)
    return TermCurve.flat(avg["yield"], id="ftp_management", kind="funding", horizon=ledger.horizon(t))


def _fa_nodes(ledger: IssuanceLedger, curves: list[TermCurve], t: float, T: float, max_step: float) -> np.ndarray:
    knots = {t, T}
    for c in curves:
        knots.update(float(x) for x in c.times if t < x < T)
    knots.update(b.maturity for b in ledger.bonds if t < b.maturity < T)
    knots = sorted(knots)
    nodes = [knots[0]]
    for a, b in zip(knots, knots[1:]):
        n = max(1, math.ceil((b - a) / max_step - 1e-12))
        nodes.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return np.array(nodes)


def financial_area_balance(
    ledger: IssuanceLedger,
    ftp: TermCurve,
    risk_free: TermCurve,
    t: float = 0.0,
    defaultable_bank: bool = True,
    max_step: float = 1.0 / 52.0,
) -> float:
    """Financial-area P&L of lending ``ftp`` internally against issued debt.

    Evaluated by composite trapezoid up to the longest outstanding maturity,
    with outstanding notionals held at their value on ``t``.
    """
    live, _ = ledger.weights(t)
    T = max(b.maturity for b in live)
    if ftp.horizon < T or risk_free.horizon < T:
        raise CurveError(f"curve horizon shorter than longest bond maturity {T}")
    hazard = ledger.bank_hazard
    loss = ledger.bank_recovery.loss_curve()
    nodes = _fa_nodes(ledger, [ftp, risk_free, hazard, loss], t, T, max_step)
    # step curves: evaluate each trapezoid interval with the rates of its left end
    a, b = nodes[:-1], nodes[1:]
    disc = lambda s: np.exp(-(risk_free.integral(s) - risk_free.integral(t)))
    if defaultable_bank:
        surv = lambda s: np.exp(-(hazard.integral(s) - hazard.integral(t)))
    else:
        surv = lambda s: np.ones_like(s)
    total = np.zeros_like(a)
    for bond in live:
        spread = ftp.rate(a) - bond.yield_at_issue
        if defaultable_bank:
            spread = spread + loss.rate(a) * hazard.rate(a)
        total += bond.notional * spread
    fa, fb = disc(a) * surv(a), disc(b) * surv(b)
    return float(np.sum(0.5 * (fa + fb) * total * (b - a)))


def ledger_from_dict(doc: dict) -> IssuanceLedger:
    try:
        bonds = [
            BondIssuance(float(b["issue_time"]), float(b["maturity"]), float(b["notional"]),
                         float(b["ois"]), float(b["cds"]), float(b["liquidity"]), str(b.get("id", i)))
            for i, b in enumerate(doc["bonds"])
        ]
        rec = RecoverySchedule.constant(float(doc.get("bank_recovery", 0.4)))
        hazard = None
        if "bank_hazard_pillars" in doc:
            hazard = TermCurve(doc["bank_hazard_pillars"], id="bank_hazard", kind="hazard")
        return IssuanceLedger(tuple(bonds), float(doc["current_cds"]), rec, hazard)
    except KeyError as exc:
        raise LedgerError(f"ledger document missing field {exc}") from None


def load_ledger(path: str | Path) -> IssuanceLedger:
    return ledger_from_dict(json.loads(Path(path).read_text()))
