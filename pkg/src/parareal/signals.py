"""Excitation waveforms with exactly known switching structure.

Every signal is defined on one period ``[0, T]`` and knows where it is
discontinuous.  Integrators and the exact linear solver rely on
``switching_times`` to segment the time axis and on ``Side`` hints to take
one-sided values at segment boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * math.pi

# phase offsets of the three-phase sources, index 1..3
PHASE_SHIFTS = {1: 0.0, 2: -2.0 * math.pi / 3.0, 3: -4.0 * math.pi / 3.0}

# absolute tolerance (relative to the period) for locating switching instants
SWITCH_TOL = 1e-15
# two times closer than this (relative to the period) count as the same switch
MERGE_TOL = 1e-13


class Side(Enum):
    """Which value to take when evaluating at a discontinuity."""

    LEFT_LIMIT = "left"
    RIGHT_LIMIT = "right"
    POINTWISE = "point"


@dataclass(frozen=True)
class SegmentForm:
    """Value on a continuity segment: ``const + amp * sin(omega * t + phase)``."""

    const: float
    amp: float = 0.0
    omega: float = 0.0
    phase: float = 0.0


class Signal:
    """Base class; concrete signals are small frozen dataclasses."""

    period: float

    # -- pointwise formula -------------------------------------------------

    def _formula(self, t: float) -> float:
        raise NotImplementedError

    def values(self, ts: np.ndarray) -> np.ndarray:
        """Pointwise values on an array of times (no side resolution)."""
        return np.array([self._formula(float(t)) for t in np.asarray(ts).ravel()])

    # -- switching structure ------------------------------------------------

    def _switch_table(self) -> np.ndarray:
        """All discontinuities in the open interval (0, period)."""
        return np.empty(0)

    def switching_times(self, t0: float, t1: float) -> np.ndarray:
        """Discontinuity instants in the open interval ``(t0, t1)``."""
        self._check_domain(t0)
        self._check_domain(t1)
        if not t0 < t1:
            raise ValueError(f"need t0 < t1, got ({t0}, {t1})")
        table = self._switch_table()
        i0 = np.searchsorted(table, t0, side="right")
        i1 = np.searchsorted(table, t1, side="left")
        out = table[i0:i1]
        # guard the open-interval contract against tolerance-level hits
        tol = MERGE_TOL * self._tol_scale()
        return out[(out > t0 + tol) & (out < t1 - tol)]

    # -- evaluation ----------------------------------------------------------

    def value(self, t: float, side: Side = Side.POINTWISE) -> float:
        """Signal value at ``t``; ``side`` resolves jumps one-sidedly."""
        self._check_domain(t)
        if side is Side.POINTWISE or self._is_smooth():
            return self._formula(t)
        near = self._nearest_switch(t)
        if near is None:
            return self._formula(t)
        lo, sw, hi = near
        if side is Side.LEFT_LIMIT:
            return self._formula(0.5 * (lo + sw))
        return self._formula(0.5 * (sw + hi))

    def bound(self) -> float:
        """An upper bound for ``|value|`` on the whole period."""
        raise NotImplementedError

    def segment_form(self, tl: float, tr: float) -> SegmentForm | None:
        """Closed form on a switch-free interval, or None if unsupported."""
        raise NotImplementedError

    # -- helpers -------------------------------------------------------------

    def _is_smooth(self) -> bool:
        return self._switch_table().size == 0

    def _tol_scale(self) -> float:
        return self.period if math.isfinite(self.period) else 1.0

    def _check_domain(self, t: float) -> None:
        if t < 0.0 or t > self.period:
            raise ValueError(f"t={t} outside signal domain [0, {self.period}]")

    def _nearest_switch(self, t: float) -> tuple[float, float, float] | None:
        """(previous switch or 0, the switch at t, next switch or T), or None."""
        table = self._switch_table()
        if table.size == 0:
            return None
        tol = 1e-9 * self._tol_scale()
        i = np.searchsorted(table, t)
        cand = []
        if i < table.size:
            cand.append(table[i])
        if i > 0:
            cand.append(table[i - 1])
        hits = [s for s in cand if abs(s - t) <= tol]
        if not hits:
            return None
        sw = hits[0]
        j = np.searchsorted(table, sw)
        lo = table[j - 1] if j > 0 else 0.0
        hi = table[j + 1] if j + 1 < table.size else self.period
        return float(lo), float(sw), float(hi)


# ---------------------------------------------------------------------------
# root bracketing for comparator-style signals


def _bisect(g, lo: float, hi: float, tol: float) -> float:
    glo = g(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm > 0.0) == (glo > 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_roots(g, lo: float, hi: float, tol: float, samples: int = 33) -> list[float]:
    ts = np.linspace(lo, hi, samples)
    gs = np.array([g(t) for t in ts])
    sgn = np.sign(gs)
    roots = []
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append(_bisect(g, ts[i], ts[i + 1], tol))
    return roots


def _quarter_points(period: float, lo: float, hi: float) -> list[float]:
    """Multiples of T/4 strictly inside (lo, hi); |sin| kinks and extrema."""
    qp = period / 4.0
    out = []
    k = int(math.ceil(lo / qp))
    while k * qp < hi:
        if lo < k * qp:
            out.append(k * qp)
        k += 1
    return out


def _filter_jumps(sig: Signal, candidates: list[float]) -> np.ndarray:
    """Keep candidates where the pointwise value actually changes."""
    if not candidates:
        return np.empty(0)
    cand = sorted(candidates)
    merged = [cand[0]]
    tol = MERGE_TOL * sig._tol_scale()
    for c in cand[1:]:
        if c - merged[-1] > tol:
            merged.append(c)
    fences = [0.0] + merged + [sig.period]
    kept = []
    for i, c in enumerate(merged):
        left_mid = 0.5 * (fences[i] + c)
        right_mid = 0.5 * (c + fences[i + 2])
        if abs(sig._formula(left_mid) - sig._formula(right_mid)) > 1e-9:
            kept.append(c)
    return np.array(kept)


@lru_cache(maxsize=64)
def _cached_table(sig: Signal) -> np.ndarray:
    return sig._build_table()  # type: ignore[attr-defined]


# ---------------------------------------------------------------------------
# concrete signals


@dataclass(frozen=True)
class SineWave(Signal):
    """``sin(2*pi*t/T)``."""

    period: float

    def _formula(self, t: float) -> float:
        return math.sin(TWO_PI * t / self.period)

    def values(self, ts):
        return np.sin(TWO_PI * np.asarray(ts) / self.period)

    def bound(self) -> float:
        return 1.0

    def segment_form(self, tl, tr):
        return SegmentForm(0.0, 1.0, TWO_PI / self.period, 0.0)


@dataclass(frozen=True)
class ThreePhaseSine(Signal):
    """One phase of the three-phase unit sine, phase index 1..3."""

    period: float
    phase_index: int = 1

    def __post_init__(self):
        if self.phase_index not in PHASE_SHIFTS:
            raise ValueError(f"phase_index must be 1..3, got {self.phase_index}")

    def _formula(self, t: float) -> float:
        return math.sin(TWO_PI * t / self.period + PHASE_SHIFTS[self.phase_index])

    def values(self, ts):
        return np.sin(TWO_PI * np.asarray(ts) / self.period + PHASE_SHIFTS[self.phase_index])

    def bound(self) -> float:
        return 1.0

    def segment_form(self, tl, tr):
        return SegmentForm(0.0, 1.0, TWO_PI / self.period, PHASE_SHIFTS[self.phase_index])


@dataclass(frozen=True)
class StepWave(Signal):
    """+1 on [0, T/2), -1 on [T/2, T]."""

    period: float

    def _formula(self, t: float) -> float:
        return 1.0 if t < 0.5 * self.period else -1.0

    def values(self, ts):
        return np.where(np.asarray(ts) < 0.5 * self.period, 1.0, -1.0)

    def _switch_table(self):
        return np.array([0.5 * self.period])

    def bound(self) -> float:
        return 1.0

    def segment_form(self, tl, tr):
        return SegmentForm(self._formula(0.5 * (tl + tr)))


@dataclass(frozen=True)
class Constant(Signal):
    """Constant value; unbounded domain by default."""

    value_: float
    period: float = math.inf

    def _formula(self, t: float) -> float:
        return self.value_

    def values(self, ts):
        return np.full(np.asarray(ts).shape, self.value_)

    def bound(self) -> float:
        return abs(self.value_)

    def segment_form(self, tl, tr):
        return SegmentForm(self.value_)


@dataclass(frozen=True)
class Zero(Signal):
    """Identically zero."""

    period: float = math.inf

    def _formula(self, t: float) -> float:
        return 0.0

    def values(self, ts):
        return np.zeros(np.asarray(ts).shape)

    def bound(self) -> float:
        return 0.0

    def segment_form(self, tl, tr):
        return SegmentForm(0.0)


@dataclass(frozen=True)
class PwmSingle(Signal):
    """Natural-sampled single-phase PWM with m pulses per period.

    Value is ``sign(sin(2*pi*t/T))`` while the sawtooth ``s_m(t)`` lies below
    ``|sin(2*pi*t/T)|`` and 0 otherwise, so the signal takes values in
    {-1, 0, +1}.  The comparator tie resolves to the 0 branch.
    """

    m: int
    period: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"pulse count m must be >= 1, got {self.m}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    # comparator ties resolve to the zero branch; a sine value at roundoff
    # scale is the tie "sin = 0" evaluated in floating point
    _SIN_TIE = 3e-15

    def _sawtooth(self, t: float) -> float:
        x = (self.m / self.period) * t
        return x - math.floor(x)

    def _formula(self, t: float) -> float:
        sv = math.sin(TWO_PI * t / self.period)
        if abs(sv) < self._SIN_TIE:
            sv = 0.0
        if self._sawtooth(t) - abs(sv) < 0.0:
            return math.copysign(1.0, sv) if sv != 0.0 else 0.0
        return 0.0

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        x = (self.m / self.period) * ts
        saw = x - np.floor(x)
        sv = np.sin(TWO_PI * ts / self.period)
        sv = np.where(np.abs(sv) < self._SIN_TIE, 0.0, sv)
        return np.where(saw - np.abs(sv) < 0.0, np.sign(sv), 0.0)

    def _switch_table(self):
        return _cached_table(self)

    def _build_table(self) -> np.ndarray:
        h = self.period / self.m
        tol = SWITCH_TOL * self.period
        cands: list[float] = [j * h for j in range(1, self.m)]
        for j in range(self.m):
            ta, tb = j * h, (j + 1) * h

            def g(t, ta=ta):
                return (t - ta) / h - abs(math.sin(TWO_PI * t / self.period))

            pts = [ta] + _quarter_points(self.period, ta, tb) + [tb]
            for lo, hi in zip(pts, pts[1:]):
                cands.extend(_scan_roots(g, lo, hi, tol))
        return _filter_jumps(self, cands)

    def bound(self) -> float:
        return 1.0

    def segment_form(self, tl, tr):
        return SegmentForm(self._formula(0.5 * (tl + tr)))


@dataclass(frozen=True)
class ThreePhasePwm(Signal):
    """Bipolar trailing-edge PWM against a sawtooth carrier, values {-1, +1}.

    Comparator is ``sin(2*pi*t/T + phi_s) - b_m(t)`` with carrier
    ``b_m(t) = 2*s_m(t) - 1``; the sign-zero tie resolves to +1.
    """

    m: int
    period: float
    phase_index: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"pulse count m must be >= 1, got {self.m}")
        if self.phase_index not in PHASE_SHIFTS:
            raise ValueError(f"phase_index must be 1..3, got {self.phase_index}")

    def _comparator(self, t: float) -> float:
        x = (self.m / self.period) * t
        carrier = 2.0 * (x - math.floor(x)) - 1.0
        return math.sin(TWO_PI * t / self.period + PHASE_SHIFTS[self.phase_index]) - carrier

    def _formula(self, t: float) -> float:
        return 1.0 if self._comparator(t) >= 0.0 else -1.0

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        x = (self.m / self.period) * ts
        carrier = 2.0 * (x - np.floor(x)) - 1.0
        arg = np.sin(TWO_PI * ts / self.period + PHASE_SHIFTS[self.phase_index]) - carrier
        return np.where(arg >= 0.0, 1.0, -1.0)

    def _switch_table(self):
        return _cached_table(self)

    def _build_table(self) -> np.ndarray:
        h = self.period / self.m
        tol = SWITCH_TOL * self.period
        shift = PHASE_SHIFTS[self.phase_index]
        cands: list[float] = [j * h for j in range(1, self.m)]
        for j in range(self.m):
            ta, tb = j * h, (j + 1) * h

            # carrier parameterized within the tooth so it does not wrap at tb
            def g(t, ta=ta):
                return math.sin(TWO_PI * t / self.period + shift) - (2.0 * (t - ta) / h - 1.0)

            pts = [ta] + _quarter_points(self.period, ta, tb) + [tb]
            for lo, hi in zip(pts, pts[1:]):
                cands.extend(_scan_roots(g, lo, hi, tol))
        return _filter_jumps(self, cands)

    def bound(self) -> float:
        return 1.0

    def segment_form(self, tl, tr):
        return SegmentForm(self._formula(0.5 * (tl + tr)))


@dataclass(frozen=True)
class Difference(Signal):
    """Pointwise difference ``a(t) - b(t)``."""

    a: Signal
    b: Signal

    @property
    def period(self) -> float:  # type: ignore[override]
        return min(self.a.period, self.b.period)

    def _formula(self, t: float) -> float:
        return self.a._formula(t) - self.b._formula(t)

    def values(self, ts):
        return self.a.values(ts) - self.b.values(ts)

    def value(self, t, side=Side.POINTWISE):
        self._check_domain(t)
        return self.a.value(t, side) - self.b.value(t, side)

    def _switch_table(self):
        return _cached_table(self)

    def _build_table(self) -> np.ndarray:
        cands = list(self.a._switch_table()) + list(self.b._switch_table())
        return _filter_jumps(self, cands)

    def bound(self) -> float:
        return self.a.bound() + self.b.bound()

    def segment_form(self, tl, tr):
        fa = self.a.segment_form(tl, tr)
        fb = self.b.segment_form(tl, tr)
        if fa is None or fb is None:
            return None
        if fa.amp == 0.0 and fb.amp == 0.0:
            return SegmentForm(fa.const - fb.const)
        if fb.amp == 0.0:
            return SegmentForm(fa.const - fb.const, fa.amp, fa.omega, fa.phase)
        if fa.amp == 0.0:
            return SegmentForm(fa.const - fb.const, -fb.amp, fb.omega, fb.phase)
        if fa.omega == fb.omega and fa.phase == fb.phase:
            return SegmentForm(fa.const - fb.const, fa.amp - fb.amp, fa.omega, fa.phase)
        return None


# ---------------------------------------------------------------------------
# CLI-facing textual signal specs, e.g. "pwm:m=400", "diff:pwm:m=400-sine"


def _parse_kv(body: str) -> dict[str, str]:
    out = {}
    for tok in body.split(","):
        if not tok:
            continue
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_signal(spec: str, period: float = 0.02) -> Signal:
    """Build a signal from its CLI name.

    Supported: ``pwm:m=400``, ``step``, ``sine``, ``pwm3:m=400,phase=1``,
    ``sine3:phase=1``, ``const:v=1``, ``zero`` and ``diff:<a>-<b>``.
    """
    spec = spec.strip()
    head, _, body = spec.partition(":")
    if head == "diff":
        # try every split of the payload into two parseable sub-specs
        for i in range(1, len(body)):
            if body[i] != "-":
                continue
            try:
                return Difference(parse_signal(body[:i], period), parse_signal(body[i + 1 :], period))
            except ValueError:
                continue
        raise ValueError(f"cannot parse difference signal {spec!r}")
    kv = _parse_kv(body)
    if head == "pwm":
        return PwmSingle(m=int(kv["m"]), period=period)
    if head == "step":
        return StepWave(period=period)
    if head == "sine":
        return SineWave(period=period)
    if head == "pwm3":
        return ThreePhasePwm(m=int(kv["m"]), period=period, phase_index=int(kv.get("phase", 1)))
    if head == "sine3":
        return ThreePhaseSine(period=period, phase_index=int(kv.get("phase", 1)))
    if head == "const":
        return Constant(value_=float(kv.get("v", 1.0)), period=period)
    if head == "zero":
        return Zero(period=period)
    raise ValueError(f"unknown signal kind {head!r} in {spec!r}")
