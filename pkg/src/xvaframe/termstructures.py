"""Deterministic term structures on piecewise-constant instantaneous rates.

Every curve is a step function ``r(u)`` defined by pillars
``(t_0 = 0, r_0), (t_1, r_1), ...``: the rate ``r_i`` applies on
``[t_i, t_{i+1})`` and the last rate extends to the curve horizon. Integrals
of step functions are exact sums, so discount factors and survival
probabilities carry no quadrature error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

CURVE_KINDS = ("discount", "hazard", "funding", "collateral", "liquidity")


class CurveError(ValueError):
    """Invalid curve definition or out-of-domain evaluation."""


class TermCurve:
    """Immutable piecewise-constant instantaneous rate curve.

    Args:
        pillars: ``(time, rate)`` pairs; times strictly increasing from 0.
        id: curve identifier.
        kind: one of ``CURVE_KINDS``. Hazard curves must be nonnegative.
        horizon: last time at which the curve is considered valid.
    """

    __slots__ = ("times", "rates", "id", "kind", "horizon", "_cum")

    def __init__(
        self,
        pillars: Iterable[Sequence[float]],
        id: str = "",
        kind: str = "discount",
        horizon: float = math.inf,
    ) -> None:
        pts = [(float(t), float(r)) for t, r in pillars]
        if not pts:
            raise CurveError(f"curve {id!r}: at least one pillar required")
        times = np.array([p[0] for p in pts])
        rates = np.array([p[1] for p in pts])
        if times[0] != 0.0:
            raise CurveError(f"curve {id!r}: first pillar must be at time 0, got {times[0]}")
        if np.any(np.diff(times) <= 0.0):
            raise CurveError(f"curve {id!r}: pillar times must be strictly increasing")
        if not np.all(np.isfinite(rates)):
            raise CurveError(f"curve {id!r}: rates must be finite")
        if kind not in CURVE_KINDS:
            raise CurveError(f"curve {id!r}: unknown kind {kind!r}")
        if kind == "hazard" and np.any(rates < 0.0):
            raise CurveError(f"curve {id!r}: hazard rates must be nonnegative")
        if not horizon > 0.0:
            raise CurveError(f"curve {id!r}: horizon must be positive")
        times.setflags(write=False)
        rates.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(rates[:-1] * np.diff(times))])
        cum.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "_cum", cum)

    def __setattr__(self, name, value):
        raise AttributeError("TermCurve is immutable")

    @classmethod
    def flat(cls, rate: float, id: str = "", kind: str = "discount", horizon: float = math.inf) -> "TermCurve":
        return cls([(0.0, rate)], id=id, kind=kind, horizon=horizon)

    @property
    def pillars(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.rates.tolist()))

    @property
    def is_flat(self) -> bool:
        return len(self.times) == 1 or bool(np.all(self.rates == self.rates[0]))

    def rate(self, t):
        """Instantaneous rate at ``t`` (right-continuous)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        out = self.rates[np.clip(idx, 0, None)]
        return out if out.ndim else float(out)

    def integral(self, t):
        """``int_0^t r(u) du`` for ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise CurveError(f"curve {self.id!r}: negative time")
        idx = np.searchsorted(self.times, t, side="right") - 1
        out = self._cum[idx] + self.rates[idx] * (t - self.times[idx])
        return out if out.ndim else float(out)

    def with_horizon(self, horizon: float) -> "TermCurve":
        return TermCurve(self.pillars, id=self.id, kind=self.kind, horizon=horizon)

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "pillars": [list(p) for p in self.pillars]}

    def __eq__(self, other) -> bool:
        if not isinstance(other, TermCurve):
            return NotImplemented
        return (
            self.id == other.id
            and self.kind == other.kind
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.rates, other.rates)
        )

    def __hash__(self) -> int:
        return hash((self.id, self.kind, self.times.tobytes(), self.rates.tobytes()))

    def __repr__(self) -> str:
        return f"TermCurve(id={self.id!r}, kind={self.kind!r}, pillars={self.pillars})"


@dataclass(frozen=True)
class RecoverySchedule:
    """Recovery fraction, constant or stepped in time (right-continuous)."""

    steps: tuple[tuple[float, float], ...] = ((0.0, 0.4),)

    def __post_init__(self):
        if not self.steps or self.steps[0][0] != 0.0:
            raise CurveError("recovery schedule must start at time 0")
        times = [s[0] for s in self.steps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise CurveError("recovery step times must be strictly increasing")
        for _, r in self.steps:
            if not 0.0 <= r <= 1.0:
                raise CurveError(f"recovery {r} outside [0, 1]")

    @classmethod
    def constant(cls, value: float) -> "RecoverySchedule":
        return cls(((0.0, float(value)),))

    def loss_curve(self, id: str = "lgd") -> TermCurve:
        """Loss-given-default ``1 - R`` as a step curve (shares step semantics)."""
        return TermCurve([(t, 1.0 - r) for t, r in self.steps], id=id, kind="liquidity")

    def value(self, t):
        return 1.0 - self.loss_curve().rate(t)


def discount_factor(curve: TermCurve, t: float, s) -> float | np.ndarray:
    """``exp(-int_t^s r(u) du)``."""
    s_arr = np.asarray(s, dtype=float)
    if t < 0.0 or np.any(s_arr < t):
        raise CurveError(f"discount_factor requires 0 <= t <= s, got t={t}, s={s}")
    out = np.exp(-(curve.integral(s_arr) - curve.integral(t)))
    return out if np.ndim(out) else float(out)


def survival_probability(hazard: TermCurve, t: float, s) -> float | np.ndarray:
    """``exp(-int_t^s lambda(u) du)`` for a nonnegative hazard curve."""
    if np.any(hazard.rates < 0.0):
        raise CurveError(f"curve {hazard.id!r}: hazard rates must be nonnegative")
    return discount_factor(hazard, t, s)


def curve_combine(a: TermCurve, b: TermCurve, op: Literal["add", "subtract"] = "add", id: str = "", kind: str | None = None) -> TermCurve:
    """Pointwise sum or difference of two curves on the union of their pillars."""
    if op not in ("add", "subtract"):
        raise CurveError(f"unknown curve operation {op!r}")
    times = np.union1d(a.times, b.times)
    sign = 1.0 if op == "add" else -1.0
    rates = a.rate(times) + sign * b.rate(times)
    if kind is None:
        kind = a.kind if a.kind == b.kind and a.kind != "hazard" else "discount"
        if a.kind == b.kind == "hazard" and op == "add":
            kind = "hazard"
    return TermCurve(zip(times, rates), id=id or f"{a.id}{'+' if op == 'add' else '-'}{b.id}", kind=kind,
                     horizon=min(a.horizon, b.horizon))


def curve_product(a: TermCurve, b: TermCurve, id: str = "", kind: str = "discount") -> TermCurve:
    """Pointwise product of two step curves on the union of their pillars."""
    times = np.union1d(a.times, b.times)
    return TermCurve(zip(times, a.rate(times) * b.rate(times)), id=id or f"{a.id}*{b.id}", kind=kind,
                     horizon=min(a.horizon, b.horizon))


def zero_curve(id: str = "zero", kind: str = "hazard") -> TermCurve:
    return TermCurve.flat(0.0, id=id, kind=kind)


# --- exact integrals of exponentially weighted step functions ---------------

def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - e^-x) / x, stable near 0."""
    small = np.abs(x) < 1e-2
    xs = np.where(small, 0.0, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = -np.expm1(-xs) / xs
    series = 1.0 - x / 2.0 + x**2 / 6.0 - x**3 / 24.0 + x**4 / 120.0 - x**5 / 720.0
    return np.where(small, series, direct)


def _phi2(x: np.ndarray) -> np.ndarray:
    """(1 - e^-x (1 + x)) / x^2, stable near 0."""
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    direct = (-np.expm1(-xs) - xs * np.exp(-xs)) / xs**2
    series = (0.5 - x / 3.0 + x**2 / 8.0 - x**3 / 30.0 + x**4 / 144.0
              - x**5 / 840.0 + x**6 / 5760.0)
    return np.where(small, series, direct)


def exp_moments(k, d):
    """``(int_0^d e^{-k u} du, int_0^d e^{-k u} u du)`` elementwise."""
    k = np.asarray(k, dtype=float)
    d = np.asarray(d, dtype=float)
    x = k * d
    return d * _phi1(x), d * d * _phi2(x)


def merged_knots(grid: np.ndarray, curves: Iterable[TermCurve]) -> np.ndarray:
    """Grid points plus every curve pillar falling inside the grid span."""
    grid = np.asarray(grid, dtype=float)
    pts = [grid]
    for c in curves:
        pts.append(c.times[(c.times > grid[0]) & (c.times < grid[-1])])
    return np.unique(np.concatenate(pts))


def interval_weights(grid, kappa: TermCurve, coeff: TermCurve) -> tuple[np.ndarray, np.ndarray]:
    """Start and end weights for ``int x(s) c(s) exp(-int_0^s k) ds``.

    On interval ``j`` the integrand is taken linear between ``a_j`` (its value
    at the interval start) and ``b_{j+1}`` (at the interval end), so the
    integral equals ``sum_j wl[j] a_j + wr[j+1] b_{j+1}`` exactly. Keeping the
    two ends apart lets callers carry jumps at grid points. ``kappa`` and
    ``coeff`` are step curves integrated in closed form between merged knots.
    """
    grid = np.asarray(grid, dtype=float)
    n = len(grid)
    if n < 2:
        return np.zeros(n), np.zeros(n)
    knots = merged_knots(grid, (kappa, coeff))
    a, b = knots[:-1], knots[1:]
    j = np.clip(np.searchsorted(grid, a, side="right") - 1, 0, n - 2)
    h = grid[j + 1] - grid[j]
    base = coeff.rate(a) * np.exp(-kappa.integral(a))
    m0, m1 = exp_moments(kappa.rate(a), b - a)
    # x(s) = x_j (1 - y) + x_{j+1} y with y = (s - grid_j) / h
    right = base * ((a - grid[j]) * m0 + m1) / h
    left = base * m0 - right
    return np.bincount(j, weights=left, minlength=n), np.bincount(j + 1, weights=right, minlength=n)


def node_weights(grid, kappa: TermCurve, coeff: TermCurve) -> np.ndarray:
    """Weights ``w`` with ``sum_i x_i w_i = int x(s) c(s) exp(-int_0^s k) ds``
    exactly when ``x`` is continuous and linear between grid points."""
    wl, wr = interval_weights(grid, kappa, coeff)
    return wl + wr


def interval_integrals(grid, kappa: TermCurve, coeff: TermCurve) -> np.ndarray:
    """``int_{g_j}^{g_{j+1}} c(s) exp(-int_0^s k) ds`` for every grid interval."""
    grid = np.asarray(grid, dtype=float)
    knots = merged_knots(grid, (kappa, coeff))
    a, b = knots[:-1], knots[1:]
    j = np.clip(np.searchsorted(grid, a, side="right") - 1, 0, len(grid) - 2)
    m0, _ = exp_moments(kappa.rate(a), b - a)
    vals = coeff.rate(a) * np.exp(-kappa.integral(a)) * m0
    return np.bincount(j, weights=vals, minlength=len(grid) - 1)


# --- file format -------------------------------------------------------------

def curve_from_dict(doc: dict) -> TermCurve:
    try:
        return TermCurve(doc["pillars"], id=str(doc["id"]), kind=doc.get("kind", "discount"))
    except KeyError as exc:
        raise CurveError(f"curve document missing field {exc}") from None


@dataclass
class CurveSet:
    """Named curves plus optional recoveries attached to curve documents."""

    curves: dict[str, TermCurve] = field(default_factory=dict)
    recoveries: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, key: str) -> TermCurve:
        try:
            return self.curves[key]
        except KeyError:
            raise CurveError(f"unknown curve id {key!r}") from None

    def __contains__(self, key: str) -> bool:
        return key in self.curves

    def add(self, curve: TermCurve, recovery: float | None = None) -> None:
        self.curves[curve.id] = curve
        if recovery is not None:
            self.recoveries[curve.id] = float(recovery)

    def first_of_kind(self, kind: str) -> TermCurve:
        for c in self.curves.values():
            if c.kind == kind:
                return c
        raise CurveError(f"no curve of kind {kind!r}")

    def to_list(self) -> list[dict]:
        out = []
        for cid, c in self.curves.items():
            d = c.to_dict()
            if cid in self.recoveries:
                d["recovery"] = self.recoveries[cid]
            out.append(d)
        return out


def load_curves(path: str | Path) -> CurveSet:
    """Load curves from a JSON file (one document or a list) or a directory of them."""
    path = Path(path)
    docs: list[dict] = []
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    for f in files:
        payload = json.loads(f.read_text())
        docs.extend(payload if isinstance(payload, list) else [payload])
    cs = CurveSet()
    for doc in docs:
        cs.add(curve_from_dict(doc), doc.get("recovery"))
    return cs


def dump_curve(curve: TermCurve, path: str | Path) -> None:
    Path(path).write_text(json.dumps(curve.to_dict(), indent=2) + "\n")
