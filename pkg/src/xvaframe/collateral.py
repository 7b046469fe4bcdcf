"""Variation margin per CSA and funding positions per netting set / legal entity.

Sign convention: a positive margin is collateral held by the bank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from xvaframe.exposure import ExposureError, NodeValues, Portfolio, ScenarioCube
from xvaframe.termstructures import CurveSet, RecoverySchedule, TermCurve

CSA_MODES = ("bilateral_full", "unilateral_counterparty_posts", "unilateral_bank_posts", "threshold")


class HierarchyError(ValueError):
    """Inconsistent netting hierarchy."""


@dataclass(frozen=True)
class CSATerms:
    id: str
    mode: str
    remuneration_curve: TermCurve
    deal_ids: tuple[str, ...] = ()
    threshold_bank: float = 0.0
    threshold_cpty: float = 0.0
    rehypothecable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "deal_ids", tuple(self.deal_ids))
        if self.mode not in CSA_MODES:
            raise HierarchyError(f"CSA {self.id!r}: unknown mode {self.mode!r}")
        if self.threshold_bank < 0.0 or self.threshold_cpty < 0.0:
            raise HierarchyError(f"CSA {self.id!r}: thresholds must be nonnegative")


def margin_rule(v: np.ndarray, csa: CSATerms) -> np.ndarray:
    """Margin balance as a function of the CSA-netted value."""
    if csa.mode == "bilateral_full":
        return v.copy()
    if csa.mode == "unilateral_counterparty_posts":
        return np.maximum(v, 0.0)
    if csa.mode == "unilateral_bank_posts":
        return np.minimum(v, 0.0)
    return np.maximum(v - csa.threshold_cpty, 0.0) + np.minimum(v + csa.threshold_bank, 0.0)


@dataclass(frozen=True)
class NettingSet:
    id: str
    hazard: TermCurve
    recovery: RecoverySchedule
    csas: tuple[CSATerms, ...] = ()
    uncovered_deal_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "csas", tuple(self.csas))
        object.__setattr__(self, "uncovered_deal_ids", tuple(self.uncovered_deal_ids))
        if self.hazard.kind != "hazard":
            raise HierarchyError(f"netting set {self.id!r}: counterparty curve must be a hazard curve")
        ids = self.deal_ids
        if len(ids) != len(set(ids)):
            raise HierarchyError(f"netting set {self.id!r}: a deal appears in more than one CSA")

    @property
    def deal_ids(self) -> tuple[str, ...]:
        out: list[str] = []
        for c in self.csas:
            out.extend(c.deal_ids)
        return tuple(out) + self.uncovered_deal_ids


@dataclass(frozen=True)
class NettingHierarchy:
    """Netting sets of a single legal entity."""

    netting_sets: tuple[NettingSet, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "netting_sets", tuple(self.netting_sets))
        seen: dict[str, str] = {}
        csa_ids: set[str] = set()
        for ns in self.netting_sets:
            for did in ns.deal_ids:
                if did in seen:
                    raise HierarchyError(f"deal {did!r} is in netting sets {seen[did]!r} and {ns.id!r}")
                seen[did] = ns.id
            for c in ns.csas:
                if c.id in csa_ids:
                    raise HierarchyError(f"duplicate CSA id {c.id!r}")
                csa_ids.add(c.id)
        ns_ids = [ns.id for ns in self.netting_sets]
        if len(ns_ids) != len(set(ns_ids)):
            raise HierarchyError("duplicate netting set ids")

    @property
    def deal_ids(self) -> tuple[str, ...]:
        return tuple(d for ns in self.netting_sets for d in ns.deal_ids)

    def validate(self, portfolio: Portfolio) -> None:
        """Every deal maps to exactly one netting set, consistent with deal tags."""
        known = {d.id for d in portfolio.deals}
        for ns in self.netting_sets:
            for did in ns.deal_ids:
                if did not in known:
                    raise HierarchyError(f"netting set {ns.id!r}: unknown deal {did!r}")
        placed = set(self.deal_ids)
        for d in portfolio.deals:
            if d.id not in placed:
                raise HierarchyError(f"deal {d.id!r} is not assigned to any netting set")
        owner = {did: ns for ns in self.netting_sets for did in ns.deal_ids}
        for d in portfolio.deals:
            ns = owner[d.id]
            if d.netting_set_id is not None and d.netting_set_id != ns.id:
                raise HierarchyError(f"deal {d.id!r} tagged {d.netting_set_id!r} but listed under {ns.id!r}")
            if d.csa_id is not None:
                csa = next((c for c in ns.csas if d.id in c.deal_ids), None)
                if csa is None or csa.id != d.csa_id:
                    raise HierarchyError(f"deal {d.id!r} tagged with CSA {d.csa_id!r} but not listed under it")

    def scaled_thresholds(self, k: float) -> "NettingHierarchy":
        sets = []
        for ns in self.netting_sets:
            csas = [CSATerms(c.id, c.mode, c.remuneration_curve, c.deal_ids, c.threshold_bank * k,
                             c.threshold_cpty * k, c.rehypothecable) for c in ns.csas]
            sets.append(NettingSet(ns.id, ns.hazard, ns.recovery, tuple(csas), ns.uncovered_deal_ids))
        return NettingHierarchy(tuple(sets))


def margin_paths(cube: ScenarioCube, csa: CSATerms) -> NodeValues:
    """Margin ``M[path, node]`` of one CSA from its netted value in ``cube``."""
    for did in csa.deal_ids:
        if did not in cube.deal_ids:
            raise ExposureError(f"CSA {csa.id!r}: unknown deal {did!r}")
    return cube.aggregate(csa.deal_ids).map(lambda v: margin_rule(v, csa))


@dataclass
class FundingPositions:
    v: dict[str, NodeValues]
    m: dict[str, NodeValues]
    f: dict[str, NodeValues]
    m_csa: dict[str, NodeValues]
    v_le: NodeValues
    m_le: NodeValues
    f_le: NodeValues


def funding_positions(cube: ScenarioCube, hierarchy: NettingHierarchy,
                      margin_cube: ScenarioCube | None = None) -> FundingPositions:
    """Netting-set and legal-entity values, margins and funding positions.

    ``margin_cube`` holds the values the CSAs margin against (by default the
    same cube); ``F = V - M`` holds pathwise at every level.
    """
    margin_cube = cube if margin_cube is None else margin_cube
    v, m, f, m_csa = {}, {}, {}, {}
    zeros = NodeValues.zeros(cube.n_paths, len(cube.time_grid), cube.jumps)
    v_le, m_le = zeros, zeros
    for ns in hierarchy.netting_sets:
        v[ns.id] = cube.aggregate(ns.deal_ids)
        m_ns = zeros
        for c in ns.csas:
            m_csa[c.id] = margin_paths(margin_cube, c)
            m_ns = m_ns + m_csa[c.id]
        m[ns.id] = m_ns
        f[ns.id] = v[ns.id] - m_ns
        v_le = v_le + v[ns.id]
        m_le = m_le + m_ns
    return FundingPositions(v, m, f, m_csa, v_le, m_le, v_le - m_le)


def _recovery(val) -> RecoverySchedule:
    if val is None:
        return RecoverySchedule.constant(0.4)
    if isinstance(val, (int, float)):
        return RecoverySchedule.constant(float(val))
    return RecoverySchedule(tuple((float(t), float(r)) for t, r in val))


def hierarchy_from_dict(doc: dict, curves: CurveSet | None = None) -> NettingHierarchy:
    sets = []
    for ns in doc.get("netting_sets", []):
        try:
            if "hazard_pillars" in ns:
                hazard = TermCurve(ns["hazard_pillars"], id=f"{ns['id']}_hazard", kind="hazard")
            elif "hazard_curve_id" in ns and curves is not None:
                hazard = curves[ns["hazard_curve_id"]]
            else:
                hazard = TermCurve.flat(0.0, id=f"{ns['id']}_hazard", kind="hazard")
            csas = []
            for c in ns.get("csas", []):
                rem = c.get("remuneration_curve_id")
                if rem is None or curves is None:
                    raise HierarchyError(f"CSA {c.get('id')!r}: remuneration_curve_id must name a loaded curve")
                csas.append(CSATerms(
                    id=str(c["id"]), mode=c["mode"], remuneration_curve=curves[rem],
                    deal_ids=tuple(c.get("deal_ids", [])),
                    threshold_bank=float(c.get("threshold_bank", 0.0)),
                    threshold_cpty=float(c.get("threshold_cpty", 0.0)),
                    rehypothecable=bool(c.get("rehypothecable", True)),
                ))
            sets.append(NettingSet(str(ns["id"]), hazard, _recovery(ns.get("recovery")), tuple(csas),
                                   tuple(ns.get("uncovered_deal_ids", []))))
        except KeyError as exc:
            raise HierarchyError(f"netting set {ns.get('id', '?')!r}: missing field {exc}") from None
    return NettingHierarchy(tuple(sets))


def load_hierarchy(path: str | Path, curves: CurveSet | None = None) -> NettingHierarchy:
    return hierarchy_from_dict(json.loads(Path(path).read_text()), curves)


def csa_for(hierarchy: NettingHierarchy, csa_id: str) -> CSATerms:
    for ns in hierarchy.netting_sets:
        for c in ns.csas:
            if c.id == csa_id:
                return c
    raise HierarchyError(f"unknown CSA {csa_id!r}")


def all_csas(hierarchy: NettingHierarchy) -> Sequence[CSATerms]:
    return [c for ns in hierarchy.netting_sets for c in ns.csas]
