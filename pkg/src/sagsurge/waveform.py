"""Synthetic residential-voltage waveforms with sag, surge and FIDVR events.

A :class:`Scenario` describes a mains signal declaratively.  The signal is a
sine whose RMS envelope is modulated by disturbance events, plus optional
harmonics (scaled with the envelope) and seeded Gaussian noise.

Noise is counter based: the noise value at time ``t`` is a pure function of
``(seed, t)``, so any subset of samples can be evaluated in any order and
still agree bit for bit with a full synthesis.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_FIDVR_SAG_FRACTION = 0.3


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario descriptions."""

    def __init__(self, message: str, line: Optional[int] = None,
                 field: Optional[str] = None, event: Optional["Disturbance"] = None):
        self.line = line
        self.field = field
        self.event = event
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class DisturbanceKind(enum.Enum):
    SAG = "sag"
    SURGE = "surge"
    FIDVR = "fidvr"


@dataclass(frozen=True)
class Disturbance:
    """One magnitude event on the RMS envelope, active on ``[start, start + span)``.

    Sag and surge events hold ``target_rms``.  A FIDVR event is a sag
    followed by an overshoot: ``fidvr_sag_rms`` for the first
    ``fidvr_sag_span`` seconds, then ``fidvr_surge_rms`` until the end.
    """

    kind: DisturbanceKind
    start: float
    span: float
    target_rms: Optional[float] = None
    fidvr_sag_rms: Optional[float] = None
    fidvr_surge_rms: Optional[float] = None
    fidvr_sag_span: Optional[float] = None
    ramp: float = 0.0

    @property
    def end(self) -> float:
        return self.start + self.span

    @property
    def sag_span(self) -> float:
        if self.fidvr_sag_span is not None:
            return self.fidvr_sag_span
        return DEFAULT_FIDVR_SAG_FRACTION * self.span

    def levels(self) -> tuple[float, ...]:
        if self.kind is DisturbanceKind.FIDVR:
            return (self.fidvr_sag_rms, self.fidvr_surge_rms)
        return (self.target_rms,)


@dataclass(frozen=True)
class Harmonic:
    order: int
    amplitude_fraction: float


@dataclass(frozen=True)
class Scenario:
    duration: float
    nominal_rms: float = 120.0
    frequency: float = 60.0
    initial_phase: float = 0.0
    events: tuple[Disturbance, ...] = ()
    harmonics: tuple[Harmonic, ...] = ()
    noise_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        validate(self)

    def envelope_extrema(self) -> tuple[float, float]:
        levels = [self.nominal_rms]
        for ev in self.events:
            levels.extend(ev.levels())
        return min(levels), max(levels)

    def peak_bound(self) -> float:
        """Largest instantaneous magnitude the deterministic part can reach."""
        gain = 1.0 + sum(h.amplitude_fraction for h in self.harmonics)
        return math.sqrt(2.0) * self.envelope_extrema()[1] * gain


def validate(s: Scenario) -> None:
    if not s.nominal_rms > 0:
        raise ScenarioError("nominal_rms must be > 0", field="nominal_rms")
    if not s.frequency > 0:
        raise ScenarioError("frequency must be > 0", field="frequency")
    if not s.duration > 0:
        raise ScenarioError("duration must be > 0", field="duration")
    if s.noise_rms < 0:
        raise ScenarioError("noise_rms must be >= 0", field="noise_rms")
    orders = [h.order for h in s.harmonics]
    if len(set(orders)) != len(orders):
        raise ScenarioError("harmonic orders must be unique", field="harmonic.order")
    for h in s.harmonics:
        if h.order < 2:
            raise ScenarioError(f"harmonic order {h.order} < 2", field="harmonic.order")
        if h.amplitude_fraction < 0:
            raise ScenarioError("harmonic amp must be >= 0", field="harmonic.amp")
    for ev in s.events:
        try:
            _validate_event(ev, s)
        except ScenarioError as exc:
            raise ScenarioError(str(exc), field=exc.field, event=ev) from None
    ordered = sorted(s.events, key=lambda e: e.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ScenarioError(
                f"{b.kind.value} at {b.start:g} s overlaps {a.kind.value} "
                f"[{a.start:g}, {a.end:g})",
                field="start", event=b,
            )


def _validate_event(ev: Disturbance, s: Scenario) -> None:
    name = ev.kind.value
    if not ev.span > 0:
        raise ScenarioError(f"{name}: span must be > 0", field="span")
    if ev.start < 0 or ev.end > s.duration + 1e-12:
        raise ScenarioError(f"{name}: event must lie within [0, duration]", field="start")
    if not 0 <= ev.ramp <= ev.span / 2:
        raise ScenarioError(f"{name}: ramp must be in [0, span/2]", field="ramp")
    if ev.kind is DisturbanceKind.SAG:
        if ev.target_rms is None or not 0 <= ev.target_rms < s.nominal_rms:
            raise ScenarioError("sag: target must be in [0, nominal_rms)", field="target")
    elif ev.kind is DisturbanceKind.SURGE:
        if ev.target_rms is None or not ev.target_rms > s.nominal_rms:
            raise ScenarioError("surge: target must exceed nominal_rms", field="target")
    else:
        if ev.fidvr_sag_rms is None or not 0 <= ev.fidvr_sag_rms < s.nominal_rms:
            raise ScenarioError("fidvr: sag must be in [0, nominal_rms)", field="sag")
        if ev.fidvr_surge_rms is None or not ev.fidvr_surge_rms > s.nominal_rms:
            raise ScenarioError("fidvr: surge must exceed nominal_rms", field="surge")
        if not 0 < ev.sag_span < ev.span:
            raise ScenarioError("fidvr: sag_span must be in (0, span)", field="sag_span")
        if ev.ramp > min(ev.sag_span, ev.span - ev.sag_span):
            raise ScenarioError("fidvr: ramp longer than a phase", field="ramp")


# --------------------------------------------------------------------------
# Scenario file format
# --------------------------------------------------------------------------

_SCALARS = {
    "nominal_rms": ("nominal_rms", float),
    "frequency": ("frequency", float),
    "phase": ("initial_phase", float),
    "duration": ("duration", float),
    "noise_rms": ("noise_rms", float),
    "seed": ("seed", int),
}

_EVENT_KEYS = {
    "sag": ({"start", "span", "target"}, {"ramp"}),
    "surge": ({"start", "span", "target"}, {"ramp"}),
    "fidvr": ({"start", "span", "sag", "surge"}, {"sag_span"}),
}

_PAIR = re.compile(r"^([A-Za-z_]+)=(\S+)$")


def _number(text: str, kind, lineno: int, key: str):
    try:
        return kind(text)
    except ValueError:
        raise ScenarioError(f"bad value {text!r} for {key}", line=lineno, field=key) from None


def _pairs(tokens: Sequence[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        m = _PAIR.match(tok)
        if not m:
            raise ScenarioError(f"expected key=value, got {tok!r}", line=lineno)
        if m.group(1) in out:
            raise ScenarioError(f"duplicate key {m.group(1)!r}", line=lineno, field=m.group(1))
        out[m.group(1)] = m.group(2)
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse the line-oriented scenario format into a validated :class:`Scenario`."""
    values: dict = {}
    events: list[Disturbance] = []
    harmonics: list[Harmonic] = []
    event_lines: list[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head in _EVENT_KEYS or head == "harmonic":
            kv = _pairs(tokens[1:], lineno)
            if head == "harmonic":
                required, optional = {"order", "amp"}, set()
            else:
                required, optional = _EVENT_KEYS[head]
            unknown = set(kv) - required - optional
            if unknown:
                key = sorted(unknown)[0]
                raise ScenarioError(f"unknown key {key!r} for {head}", line=lineno, field=key)
            missing = required - set(kv)
            if missing:
                key = sorted(missing)[0]
                raise ScenarioError(f"{head} missing {key!r}", line=lineno, field=key)
            num = {k: _number(v, int if k == "order" else float, lineno, k) for k, v in kv.items()}
            if head == "harmonic":
                harmonics.append(Harmonic(num["order"], num["amp"]))
            elif head == "fidvr":
                events.append(Disturbance(
                    DisturbanceKind.FIDVR, num["start"], num["span"],
                    fidvr_sag_rms=num["sag"], fidvr_surge_rms=num["surge"],
                    fidvr_sag_span=num.get("sag_span"),
                ))
                event_lines.append(lineno)
            else:
                events.append(Disturbance(
                    DisturbanceKind(head), num["start"], num["span"],
                    target_rms=num["target"], ramp=num.get("ramp", 0.0),
                ))
                event_lines.append(lineno)
            continue

        kv = _pairs(tokens, lineno)
        for key, text_value in kv.items():
            if key not in _SCALARS:
                raise ScenarioError(f"unknown key {key!r}", line=lineno, field=key)
            attr, kind = _SCALARS[key]
            if attr in values:
                raise ScenarioError(f"{key} given twice", line=lineno, field=key)
            values[attr] = _number(text_value, kind, lineno, key)

    if "duration" not in values:
        raise ScenarioError("missing required key 'duration'", field="duration")
    try:
        return Scenario(events=tuple(events), harmonics=tuple(harmonics), **values)
    except ScenarioError as exc:
        if exc.line is None and exc.event is not None:
            lineno = event_lines[events.index(exc.event)]
            raise ScenarioError(str(exc), line=lineno, field=exc.field) from None
        raise


# --------------------------------------------------------------------------
# Signal evaluation
# --------------------------------------------------------------------------

def _check_times(s: Scenario, t: np.ndarray) -> None:
    if t.size and (t.min() < 0 or t.max() > s.duration):
        raise ValueError(f"t outside [0, {s.duration}]")


def _envelope(s: Scenario, t: np.ndarray) -> np.ndarray:
    env = np.full(t.shape, s.nominal_rms, dtype=np.float64)
    for ev in s.events:
        inside = (t >= ev.start) & (t < ev.end)
        if not inside.any():
            continue
        if ev.kind is DisturbanceKind.FIDVR:
            level = np.where(t < ev.start + ev.sag_span, ev.fidvr_sag_rms, ev.fidvr_surge_rms)
            first, last = ev.fidvr_sag_rms, ev.fidvr_surge_rms
        else:
            level = np.full(t.shape, ev.target_rms)
            first = last = ev.target_rms
        if ev.ramp > 0:
            rise = (t - ev.start) / ev.ramp
            level = np.where(rise < 1, s.nominal_rms + (first - s.nominal_rms) * rise, level)
            fall = (ev.end - t) / ev.ramp
            level = np.where(fall < 1, s.nominal_rms + (last - s.nominal_rms) * fall, level)
        env = np.where(inside, level, env)
    return env


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def _noise(s: Scenario, t: np.ndarray) -> np.ndarray:
    """Standard normal draws keyed on (seed, bit pattern of t), scaled to noise_rms."""
    if s.noise_rms == 0:
        return np.zeros(t.shape)
    key = np.uint64(s.seed & 0xFFFFFFFFFFFFFFFF)
    bits = np.ascontiguousarray(t, dtype=np.float64).view(np.uint64)
    h1 = _splitmix(bits ^ _splitmix(np.full(t.shape, key)))
    h2 = _splitmix(h1)
    # 53-bit uniforms; u1 in (0, 1] keeps the log finite
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return s.noise_rms * z


def _signal(s: Scenario, t: np.ndarray) -> np.ndarray:
    env = _envelope(s, t)
    theta = 2.0 * np.pi * s.frequency * t + s.initial_phase
    amp = math.sqrt(2.0) * env
    v = amp * np.sin(theta)
    for h in s.harmonics:
        v = v + amp * h.amplitude_fraction * np.sin(h.order * theta)
    return v + _noise(s, t)


def envelope_rms(s: Scenario, t: float) -> float:
    """Ideal RMS level the detector should perceive at time ``t``."""
    arr = np.array([t], dtype=np.float64)
    _check_times(s, arr)
    return float(_envelope(s, arr)[0])


def sample_at(s: Scenario, t: float) -> float:
    arr = np.array([t], dtype=np.float64)
    _check_times(s, arr)
    return float(_signal(s, arr)[0])


def sample_count(duration: float, rate: float) -> int:
    # guard against products like 0.7 * 3600 = 2519.9999999999995
    return int(math.floor(duration * rate + 1e-9))


def sample_times(s: Scenario, rate: float) -> np.ndarray:
    if not rate > 0:
        raise ValueError("rate must be > 0")
    return np.arange(sample_count(s.duration, rate), dtype=np.float64) / rate


def synthesize(s: Scenario, rate: float) -> np.ndarray:
    """Instantaneous mains voltage at ``t = n / rate`` for ``n = 0 .. floor(duration*rate) - 1``.

    The sample index is the array position.
    """
    return _signal(s, sample_times(s, rate))
