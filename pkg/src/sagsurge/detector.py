"""Trip/reconnect state machine driving the load relay and indicator LEDs.

Each RMS½ measurement is classified against the allowed band.  Three
consecutive out-of-band measurements open the (normally open) relay; the load
is reconnected only after 360 consecutive in-band measurements.  Any
violation while tripped restarts the reconnect count from zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .rms import HalfCycleRms


class Classification(enum.Enum):
    IN_BOUNDS = "in_bounds"
    SAG = "sag"
    SURGE = "surge"

    @property
    def violation(self) -> bool:
        return self is not Classification.IN_BOUNDS


class Mode(enum.Enum):
    MONITORING = "monitoring"
    TRIPPED = "tripped"


class Relay(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


class Led(enum.Enum):
    GREEN = "green"
    RED = "red"


class Action(enum.Enum):
    OPEN_RELAY = "open_relay"
    CLOSE_RELAY = "close_relay"
    LED_RED = "led_red"
    LED_GREEN = "led_green"


@dataclass(frozen=True)
class DetectorConfig:
    lower_bound: float = 99.0    # 0.9 x 110 V
    upper_bound: float = 132.0   # 1.1 x 120 V
    trip_count: int = 3
    reconnect_count: int = 360

    def __post_init__(self):
        if not 0 < self.lower_bound < self.upper_bound:
            raise ValueError("need 0 < lower_bound < upper_bound")
        if self.trip_count < 1 or self.reconnect_count < 1:
            raise ValueError("trip_count and reconnect_count must be >= 1")


class DetectorState(NamedTuple):
    mode: Mode = Mode.MONITORING
    # consecutive violations while monitoring, consecutive compliant while tripped
    counter: int = 0
    relay: Relay = Relay.CLOSED
    led: Led = Led.GREEN
    pending_class: Optional[Classification] = None
    last_index: Optional[int] = None


@dataclass
class DisturbanceEvent:
    cls: Classification
    onset_half_cycle: int
    trip_half_cycle: int
    end_half_cycle: int
    extremal_rms: float
    reconnect_half_cycle: Optional[int] = None
    # measurement times in seconds, for reporting
    onset_time: float = 0.0
    trip_time: float = 0.0
    end_time: float = 0.0
    reconnect_time: Optional[float] = None


@dataclass
class RunResult:
    state: DetectorState
    events: list[DisturbanceEvent] = field(default_factory=list)
    actions: list[tuple[int, Action]] = field(default_factory=list)

    @property
    def trips(self) -> int:
        return sum(1 for _, a in self.actions if a is Action.OPEN_RELAY)


def classify(r: float, cfg: DetectorConfig = DetectorConfig()) -> Classification:
    if r < cfg.lower_bound:
        return Classification.SAG
    if r > cfg.upper_bound:
        return Classification.SURGE
    return Classification.IN_BOUNDS


def step(state: DetectorState, m: HalfCycleRms,
         cfg: DetectorConfig = DetectorConfig()) -> tuple[DetectorState, list[Action]]:
    """Pure transition function; :class:`Detector` wraps it with event bookkeeping."""
    return _transition(state, m.half_cycle_index, classify(m.value, cfg), cfg)


def _transition(state: DetectorState, idx: int, c: Classification,
                cfg: DetectorConfig) -> tuple[DetectorState, list[Action]]:
    mode, counter, relay, led_before, pending, last = state
    if last is not None and idx <= last:
        raise ValueError(f"measurement {idx} out of order (last {last})")
    violation = c is not _IN_BOUNDS
    actions: list[Action] = []
    led = _RED if violation else _GREEN
    if led is not led_before:
        actions.append(_LED_RED if violation else _LED_GREEN)

    if mode is _MONITORING:
        if violation:
            counter += 1
            pending = c
            if counter >= cfg.trip_count:
                actions.append(_OPEN)
                mode, counter, relay = _TRIPPED, 0, Relay.OPEN
        else:
            counter, pending = 0, None
    elif violation:
        counter = 0
    else:
        counter += 1
        if counter >= cfg.reconnect_count:
            actions.append(_CLOSE)
            mode, counter, relay, pending = _MONITORING, 0, Relay.CLOSED, None

    return DetectorState(mode, counter, relay, led, pending, idx), actions


# hot-path aliases
_IN_BOUNDS, _SAG, _SURGE = Classification.IN_BOUNDS, Classification.SAG, Classification.SURGE
_MONITORING, _TRIPPED = Mode.MONITORING, Mode.TRIPPED
_RED, _GREEN = Led.RED, Led.GREEN
_LED_RED, _LED_GREEN = Action.LED_RED, Action.LED_GREEN
_OPEN, _CLOSE = Action.OPEN_RELAY, Action.CLOSE_RELAY


class Detector:
    """Stateful detector that also records :class:`DisturbanceEvent` entries."""

    def __init__(self, cfg: DetectorConfig = DetectorConfig()):
        self.cfg = cfg
        self.state = DetectorState()
        self.events: list[DisturbanceEvent] = []
        self.actions: list[tuple[int, Action]] = []
        self._run: list[HalfCycleRms] = []   # current violating run while monitoring

    @property
    def open_event(self) -> Optional[DisturbanceEvent]:
        if self.events and self.events[-1].reconnect_half_cycle is None:
            return self.events[-1]
        return None

    def step(self, m: HalfCycleRms) -> list[Action]:
        before = self.state
        idx, t, r = m[0], m[1], m[2]
        cfg = self.cfg
        if r < cfg.lower_bound:
            c = _SAG
        elif r > cfg.upper_bound:
            c = _SURGE
        else:
            c = _IN_BOUNDS
        after, actions = _transition(before, idx, c, cfg)
        self.state = after
        violation = c is not _IN_BOUNDS

        if before.mode is _MONITORING:
            if violation:
                self._run.append(m)
            elif self._run:
                self._run.clear()
            if after.mode is _TRIPPED:
                self._open_event(m, c)
        else:
            ev = self.events[-1]
            if violation:
                ev.end_half_cycle, ev.end_time = idx, t
                if ev.cls is _SAG:
                    ev.extremal_rms = min(ev.extremal_rms, r)
                else:
                    ev.extremal_rms = max(ev.extremal_rms, r)
            elif after.mode is _MONITORING:
                ev.reconnect_half_cycle, ev.reconnect_time = idx, t

        if actions:
            self.actions.extend((idx, a) for a in actions)
        return actions

    def _open_event(self, m: HalfCycleRms, c: Classification) -> None:
        values = [x.value for x in self._run]
        first = self._run[0]
        self.events.append(DisturbanceEvent(
            cls=c,
            onset_half_cycle=first.half_cycle_index,
            trip_half_cycle=m.half_cycle_index,
            end_half_cycle=m.half_cycle_index,
            extremal_rms=min(values) if c is Classification.SAG else max(values),
            onset_time=first.time, trip_time=m.time, end_time=m.time,
        ))
        self._run = []

    def result(self) -> RunResult:
        return RunResult(self.state, list(self.events), list(self.actions))


def run(stream: Iterable[HalfCycleRms], cfg: DetectorConfig = DetectorConfig()) -> RunResult:
    det = Detector(cfg)
    for m in stream:
        det.step(m)
    return det.result()
