"""Risk-factor simulation and mark-to-future exposure cubes.

Cube convention: the value stored at grid node ``s`` is the left limit, i.e.
it still contains any cash flow paid at ``s``. Nodes where a deal pays a flow
also carry the right limit (value after the flow) in ``right``; a deal is
worth exactly 0 strictly after its maturity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from xvaframe import kernels
from xvaframe.termstructures import CurveError, CurveSet, TermCurve, exp_moments, merged_knots

DEAL_KINDS = ("deterministic_exposure", "fx_forward", "european_option", "interest_flow_strip")
TIME_TOL = 1e-10


class ExposureError(ValueError):
    """Invalid deal, model or cube request."""


# --- risk factors -------------------------------------------------------------

@dataclass(frozen=True)
class Underlying:
    id: str
    spot: float
    volatility: float
    drift: TermCurve

    def __post_init__(self):
        if not self.spot > 0.0:
            raise ExposureError(f"underlying {self.id!r}: spot must be positive")
        if not self.volatility >= 0.0:
            raise ExposureError(f"underlying {self.id!r}: volatility must be nonnegative")


def psd_factor(corr: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Lower factor ``L`` with ``L @ L.T == corr`` for a PSD correlation matrix."""
    corr = np.asarray(corr, dtype=float)
    n = corr.shape[0]
    if corr.shape != (n, n):
        raise ExposureError("correlation matrix must be square")
    if not np.allclose(corr, corr.T, atol=1e-14, rtol=0.0):
        raise ExposureError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-14, rtol=0.0):
        raise ExposureError("correlation matrix must have unit diagonal")
    eig = np.linalg.eigvalsh(corr)
    if eig.min() < -tol:
        raise ExposureError(f"correlation matrix is not positive semidefinite (min eigenvalue {eig.min():.3g})")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        # singular but PSD: pivot-free LDL-style factor via eigenvectors, then QR to lower form
        w, v = np.linalg.eigh(corr)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        _, r = np.linalg.qr(root.T)
        lower = r.T
        return lower * np.sign(np.where(np.diag(lower) == 0.0, 1.0, np.diag(lower)))


@dataclass(frozen=True)
class RiskFactorModel:
    underlyings: tuple[Underlying, ...] = ()
    correlation: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "underlyings", tuple(self.underlyings))
        n = len(self.underlyings)
        ids = [u.id for u in self.underlyings]
        if len(set(ids)) != n:
            raise ExposureError("duplicate underlying ids")
        corr = np.eye(n) if self.correlation is None else np.asarray(self.correlation, dtype=float)
        factor = psd_factor(corr) if n else np.zeros((0, 0))
        object.__setattr__(self, "correlation", corr)
        object.__setattr__(self, "_factor", factor)

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    def index(self, uid: str) -> int:
        for i, u in enumerate(self.underlyings):
            if u.id == uid:
                return i
        raise ExposureError(f"unknown underlying {uid!r}")


@dataclass
class PathSet:
    """Simulated spot paths ``spots[underlying, path, node]``."""

    grid: np.ndarray
    ids: tuple[str, ...]
    spots: np.ndarray
    path_start: int = 0

    @property
    def n_paths(self) -> int:
        return self.spots.shape[1]

    def spot(self, uid: str) -> np.ndarray:
        return self.spots[self.ids.index(uid)]


def validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1 or grid[0] != 0.0:
        raise ExposureError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0.0):
        raise ExposureError("time grid must be strictly increasing")
    return grid


def simulate(model: RiskFactorModel, grid, n_paths: int, seed: int, path_start: int = 0,
             backend: str | None = None) -> PathSet:
    """Correlated geometric Brownian paths, sampled exactly at grid nodes.

    Normals come from a counter-based generator keyed by (seed, underlying,
    path, step), so any path range can be produced independently.
    """
    grid = validate_grid(grid)
    if n_paths < 1:
        raise ExposureError("n_paths must be at least 1")
    k = kernels.get_backend(backend)
    n_u, n_t = len(model.underlyings), len(grid)
    dt = np.diff(grid)
    spots = np.empty((n_u, n_paths, n_t))
    if n_u == 0:
        return PathSet(grid, (), spots, path_start)
    z = np.stack([k.philox_normals(seed, i, path_start, n_paths, n_t - 1) for i in range(n_u)])
    zc = np.einsum("ij,jpt->ipt", model.factor, z)
    for i, u in enumerate(model.underlyings):
        mu = np.diff(u.drift.integral(grid))
        incr = mu - 0.5 * u.volatility**2 * dt + u.volatility * np.sqrt(dt) * zc[i]
        spots[i, :, 0] = u.spot
        spots[i, :, 1:] = u.spot * np.exp(np.cumsum(incr, axis=1))
    return PathSet(grid, tuple(u.id for u in model.underlyings), spots, path_start)


# --- deals ---------------------------------------------------------------------

@dataclass(frozen=True)
class Deal:
    """A single trade.

    ``direction`` is +1 for long (the bank receives the payoff) and -1 for
    short. ``profile`` rows are ``(time, value)`` for deterministic exposures;
    ``profile_curve`` names the curve under which that profile is quoted.
    """

    id: str
    kind: str
    maturity: float
    notional: float = 1.0
    direction: float = 1.0
    strike: float | None = None
    underlying: str | None = None
    option_type: str = "call"
    frequency: int = 4
    profile: tuple[tuple[float, float], ...] | None = None
    profile_curve: TermCurve | None = None
    netting_set_id: str | None = None
    csa_id: str | None = None

    def __post_init__(self):
        if self.kind not in DEAL_KINDS:
            raise ExposureError(f"deal {self.id!r}: unknown kind {self.kind!r}")
        if not self.maturity > 0.0:
            raise ExposureError(f"deal {self.id!r}: maturity must be positive")
        if self.notional == 0.0 or not math.isfinite(self.notional):
            raise ExposureError(f"deal {self.id!r}: notional must be finite and nonzero")
        if self.direction not in (1.0, -1.0):
            raise ExposureError(f"deal {self.id!r}: direction must be +1 or -1")
        if self.kind in ("fx_forward", "european_option"):
            if self.underlying is None or self.strike is None:
                raise ExposureError(f"deal {self.id!r}: {self.kind} needs underlying and strike")
        if self.kind == "european_option" and self.option_type not in ("call", "put"):
            raise ExposureError(f"deal {self.id!r}: option_type must be call or put")
        if self.kind == "interest_flow_strip":
            if self.strike is None:
                raise ExposureError(f"deal {self.id!r}: interest_flow_strip needs a rate in strike")
            if self.frequency < 1:
                raise ExposureError(f"deal {self.id!r}: frequency must be positive")
        if self.kind == "deterministic_exposure":
            if not self.profile:
                raise ExposureError(f"deal {self.id!r}: deterministic_exposure needs a profile")
            pts = np.asarray(self.profile, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or np.any(np.diff(pts[:, 0]) <= 0.0) or pts[0, 0] < 0.0:
                raise ExposureError(f"deal {self.id!r}: profile times must be increasing from >= 0")
            object.__setattr__(self, "profile", tuple(map(tuple, pts.tolist())))

    @property
    def scale(self) -> float:
        return self.direction * self.notional

    def flow_times(self) -> np.ndarray:
        """Times at which the deal pays (the cube carries right limits there)."""
        if self.kind == "interest_flow_strip":
            n = max(1, int(round(self.maturity * self.frequency)))
            return np.linspace(self.maturity / n, self.maturity, n)
        return np.array([self.maturity])

    def scaled(self, k: float) -> "Deal":
        return Deal(**{**self.__dict__, "notional": self.notional * k})


@dataclass
class Portfolio:
    model: RiskFactorModel = field(default_factory=RiskFactorModel)
    deals: tuple[Deal, ...] = ()

    def __post_init__(self):
        self.deals = tuple(self.deals)
        ids = [d.id for d in self.deals]
        if len(set(ids)) != len(ids):
            raise ExposureError("duplicate deal ids")
        for d in self.deals:
            if d.underlying is not None:
                try:
                    self.model.index(d.underlying)
                except ExposureError:
                    raise ExposureError(f"deal {d.id!r}: unknown underlying {d.underlying!r}") from None

    def deal(self, did: str) -> Deal:
        for d in self.deals:
            if d.id == did:
                return d
        raise ExposureError(f"unknown deal {did!r}")

    @property
    def horizon(self) -> float:
        return max((d.maturity for d in self.deals), default=0.0)

    def scaled(self, k: float) -> "Portfolio":
        return Portfolio(self.model, tuple(d.scaled(k) for d in self.deals))


def build_grid(step: float, horizon: float, extra: Sequence[float] = ()) -> np.ndarray:
    """Uniform grid of ``step`` up to ``horizon`` with ``extra`` times inserted."""
    if not step > 0.0:
        raise ExposureError("grid step must be positive")
    if horizon <= 0.0:
        return np.array([0.0])
    n = int(math.floor(horizon / step + 1e-9))
    pts = np.concatenate([np.arange(n + 1) * step, [horizon], np.asarray(extra, dtype=float)])
    pts = np.unique(pts[(pts >= 0.0) & (pts <= horizon + TIME_TOL)])
    keep = np.concatenate([[True], np.diff(pts) > TIME_TOL])
    pts = pts[keep]
    # snap any extra time to the grid point that absorbed it
    return pts


def portfolio_grid(portfolio: Portfolio, step: float) -> np.ndarray:
    extra = np.concatenate([d.flow_times() for d in portfolio.deals]) if portfolio.deals else np.array([])
    grid = build_grid(step, portfolio.horizon, extra)
    for t in extra:
        if np.min(np.abs(grid - t)) > TIME_TOL:
            raise ExposureError(f"flow time {t} missing from grid")
    return grid


# --- node values with jumps -------------------------------------------------------

@dataclass
class NodeValues:
    """Per-path values on a grid: left limits plus right limits at jump nodes."""

    left: np.ndarray
    right: np.ndarray
    jumps: np.ndarray

    def starts(self) -> np.ndarray:
        """Values at the start of each interval (right limits)."""
        out = self.left.copy()
        if len(self.jumps):
            out[:, self.jumps] = self.right
        return out

    def ends(self) -> np.ndarray:
        return self.left

    def map(self, fn) -> "NodeValues":
        return NodeValues(fn(self.left), fn(self.right), self.jumps)

    def scale_nodes(self, factors: np.ndarray) -> "NodeValues":
        factors = np.asarray(factors, dtype=float)
        return NodeValues(self.left * factors, self.right * factors[self.jumps], self.jumps)

    def __add__(self, other: "NodeValues") -> "NodeValues":
        return NodeValues(self.left + other.left, self.right + other.right, self.jumps)

    def __sub__(self, other: "NodeValues") -> "NodeValues":
        return NodeValues(self.left - other.left, self.right - other.right, self.jumps)

    def __mul__(self, k: float) -> "NodeValues":
        return NodeValues(self.left * k, self.right * k, self.jumps)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, n_paths: int, n_t: int, jumps: np.ndarray) -> "NodeValues":
        return cls(np.zeros((n_paths, n_t)), np.zeros((n_paths, len(jumps))), jumps)


@dataclass
class ScenarioCube:
    """Mark-to-future values ``values[deal, path, node]`` under one marking curve."""

    time_grid: np.ndarray
    deal_ids: tuple[str, ...]
    values: np.ndarray
    right: np.ndarray
    jumps: np.ndarray
    marking_curve_id: str
    path_start: int = 0

    @property
    def n_paths(self) -> int:
        return self.values.shape[1]

    def index(self, did: str) -> int:
        try:
            return self.deal_ids.index(did)
        except ValueError:
            raise ExposureError(f"deal {did!r} not in cube") from None

    def deal_values(self, did: str) -> NodeValues:
        i = self.index(did)
        return NodeValues(self.values[i], self.right[i], self.jumps)

    def aggregate(self, deal_ids: Sequence[str]) -> NodeValues:
        idx = [self.index(d) for d in deal_ids]
        if not idx:
            return NodeValues.zeros(self.n_paths, len(self.time_grid), self.jumps)
        return NodeValues(self.values[idx].sum(axis=0), self.right[idx].sum(axis=0), self.jumps)


def _remark_profile(deal: Deal, grid: np.ndarray, curve: TermCurve) -> np.ndarray:
    """Deterministic profile re-expressed under ``curve`` on ``grid`` (nodes <= maturity).

    With the profile ``V`` quoted under ``r_ref``, the value under ``r`` is
    ``V_s + int_s^T exp(-int_s^u r) (r_ref - r)(u) V_u du``, integrated exactly
    for piecewise-linear ``V`` and step curves.
    """
    pts = np.asarray(deal.profile)
    T = deal.maturity
    prof = lambda s: np.interp(s, pts[:, 0], pts[:, 1])
    live = grid[grid <= T + TIME_TOL]
    base = prof(live)
    ref = deal.profile_curve
    if ref is None or ref == curve:
        return base
    spread = TermCurve(zip(np.union1d(ref.times, curve.times),
                           ref.rate(np.union1d(ref.times, curve.times)) - curve.rate(np.union1d(ref.times, curve.times))))
    knots = merged_knots(np.union1d(live, pts[(pts[:, 0] > 0) & (pts[:, 0] < T), 0]), (curve, spread))
    knots = knots[knots <= T + TIME_TOL]
    a, b = knots[:-1], knots[1:]
    va, vb = prof(a), prof(b)
    m0, m1 = exp_moments(curve.rate(a), b - a)
    slope = (vb - va) / (b - a)
    seg = spread.rate(a) * np.exp(-curve.integral(a)) * (va * m0 + slope * m1)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    idx = np.searchsorted(knots, live - TIME_TOL)
    return base + tail[idx] * np.exp(curve.integral(live))


def _mark_deal(deal: Deal, paths: PathSet, curve: TermCurve, model: RiskFactorModel,
               jumps: np.ndarray, backend) -> tuple[np.ndarray, np.ndarray]:
    grid = paths.grid
    n_p, n_t = paths.n_paths, len(grid)
    T = deal.maturity
    n_live = int(np.searchsorted(grid, T + TIME_TOL))
    live = grid[:n_live]
    out = np.zeros((n_p, n_t))
    if deal.kind == "deterministic_exposure":
        out[:, :n_live] = deal.scale * _remark_profile(deal, grid, curve)[None, :]
    elif deal.kind == "interest_flow_strip":
        flows = deal.flow_times()
        amount = deal.scale * deal.strike / deal.frequency
        disc = np.exp(-(curve.integral(flows)[None, :] - curve.integral(live)[:, None]))
        pays = flows[None, :] >= live[:, None] - TIME_TOL
        out[:, :n_live] = amount * (disc * pays).sum(axis=1)[None, :]
    else:
        u = model.underlyings[model.index(deal.underlying)]
        spot = paths.spot(deal.underlying)[:, :n_live]
        carry = np.exp(u.drift.integral(T) - u.drift.integral(live))
        fwd = np.ascontiguousarray(spot * carry[None, :])
        p = np.exp(-(curve.integral(T) - curve.integral(live)))
        if deal.kind == "fx_forward":
            out[:, :n_live] = deal.scale * (fwd - deal.strike) * p[None, :]
        else:
            stdev = np.ascontiguousarray(u.volatility * np.sqrt(np.clip(T - live, 0.0, None)))
            price = backend.black_forward(fwd, float(deal.strike), stdev, deal.option_type == "call")
            out[:, :n_live] = deal.scale * price * p[None, :]
    # right limits: value after the flows paid at each jump node
    right = out[:, jumps].copy()
    jt = grid[jumps]
    if deal.kind == "interest_flow_strip":
        amount = deal.scale * deal.strike / deal.frequency
        paid = np.array([np.any(np.abs(deal.flow_times() - t) <= TIME_TOL) for t in jt])
        right -= amount * paid[None, :]
    at_mat = np.abs(jt - T) <= TIME_TOL
    right[:, at_mat] = 0.0
    return out, right


def mark_to_future(deals: Sequence[Deal], paths: PathSet, marking_curve: TermCurve,
                   model: RiskFactorModel | None = None, backend: str | None = None) -> ScenarioCube:
    """Value every deal at every path and node, discounting with ``marking_curve``."""
    grid = paths.grid
    horizon = max((d.maturity for d in deals), default=0.0)
    if marking_curve.horizon < horizon:
        raise CurveError(f"marking curve {marking_curve.id!r} does not cover maturity {horizon}")
    model = model or RiskFactorModel()
    k = kernels.get_backend(backend)
    flow_times = np.concatenate([d.flow_times() for d in deals]) if deals else np.array([])
    jumps = []
    for t in np.unique(flow_times):
        hit = np.flatnonzero(np.abs(grid - t) <= TIME_TOL)
        if not len(hit):
            raise ExposureError(f"grid does not contain flow time {t}")
        jumps.append(int(hit[0]))
    jumps = np.array(sorted(set(jumps)), dtype=np.intp)
    values = np.zeros((len(deals), paths.n_paths, len(grid)))
    right = np.zeros((len(deals), paths.n_paths, len(jumps)))
    for i, d in enumerate(deals):
        if d.underlying is not None and d.underlying not in paths.ids:
            raise ExposureError(f"deal {d.id!r}: underlying {d.underlying!r} not simulated")
        values[i], right[i] = _mark_deal(d, paths, marking_curve, model, jumps, k)
    return ScenarioCube(grid, tuple(d.id for d in deals), values, right, jumps, marking_curve.id, paths.path_start)


def price_at_zero(deal: Deal, curve: TermCurve, model: RiskFactorModel) -> float:
    """Single-scenario time-0 value, independent of any simulation."""
    grid = np.union1d([0.0], deal.flow_times())
    spots = np.array([np.full((1, len(grid)), u.spot) for u in model.underlyings]).reshape(-1, 1, len(grid))
    paths = PathSet(grid, tuple(u.id for u in model.underlyings), spots)
    return float(mark_to_future([deal], paths, curve, model).values[0, 0, 0])


# --- file format ----------------------------------------------------------------

def _curve_ref(doc: dict, key: str, curves: CurveSet | None, default: TermCurve | None) -> TermCurve | None:
    if key in doc:
        val = doc[key]
        if isinstance(val, (int, float)):
            return TermCurve.flat(float(val), id=f"{key}_flat")
        if isinstance(val, list):
            return TermCurve(val, id=key)
        if curves is None:
            raise ExposureError(f"curve reference {val!r} needs a curve set")
        return curves[val]
    return default


def portfolio_from_dict(doc: dict, curves: CurveSet | None = None) -> Portfolio:
    unds = []
    for u in doc.get("underlyings", []):
        drift = _curve_ref(u, "drift", curves, None) or _curve_ref(u, "drift_curve_id", curves, None) \
            or TermCurve.flat(0.0, id=f"{u['id']}_drift")
        unds.append(Underlying(str(u["id"]), float(u["spot"]), float(u.get("volatility", 0.0)), drift))
    corr = doc.get("correlation")
    model = RiskFactorModel(tuple(unds), None if corr is None else np.asarray(corr, dtype=float))
    default_profile_curve = None
    if curves is not None:
        try:
            default_profile_curve = curves.first_of_kind("discount")
        except CurveError:
            default_profile_curve = None
    deals = []
    for d in doc.get("deals", []):
        try:
            direction = d.get("direction", 1.0)
            if isinstance(direction, str):
                direction = {"long": 1.0, "short": -1.0}[direction]
            profile_curve = None
            if d["kind"] == "deterministic_exposure":
                profile_curve = _curve_ref(d, "profile_curve", curves, default_profile_curve)
            deals.append(Deal(
                id=str(d["id"]), kind=d["kind"], maturity=float(d["maturity"]),
                notional=float(d.get("notional", 1.0)), direction=float(direction),
                strike=None if d.get("strike") is None else float(d["strike"]),
                underlying=d.get("underlying"), option_type=d.get("option_type", "call"),
                frequency=int(d.get("frequency", 4)),
                profile=None if d.get("profile") is None else tuple(map(tuple, d["profile"])),
                profile_curve=profile_curve,
                netting_set_id=d.get("netting_set_id"), csa_id=d.get("csa_id"),
            ))
        except KeyError as exc:
            raise ExposureError(f"deal {d.get('id', '?')!r}: missing field {exc}") from None
    return Portfolio(model, tuple(deals))


def load_portfolio(path: str | Path, curves: CurveSet | None = None) -> Portfolio:
    return portfolio_from_dict(json.loads(Path(path).read_text()), curves)
