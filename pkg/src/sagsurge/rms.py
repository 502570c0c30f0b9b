"""Half-cycle RMS (RMS½) measurement over a streaming sample buffer.

A one-cycle window (60 samples at 3600 Hz / 60 Hz) is evaluated every half
cycle (stride 30).  In zero-crossing mode the engine first waits for a rising
zero crossing of the mains-scale signal and fixes the window cadence to it.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np


class SyncMode(enum.Enum):
    ZERO_CROSSING = "zero-crossing"
    FIXED_STRIDE = "fixed"


class Formula(enum.Enum):
    CORRECTED = "corrected"
    # sqrt(sum v^2) / N; reads sqrt(N) times low
    PAPER_LITERAL = "paper"


class AlignState(enum.Enum):
    SEARCHING = "searching"
    ANCHORED = "anchored"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class RmsConfig:
    window_samples: int = 60
    stride_samples: int = 30
    sync_mode: SyncMode = SyncMode.ZERO_CROSSING
    formula: Formula = Formula.CORRECTED
    # zero-crossing search gives up after this many samples (2 nominal cycles)
    fallback_samples: int = 120
    # crossings are ignored until the signal has reached this peak (volts)
    min_peak: float = 10.0
    # |v| below this counts as zero; about one LSB at mains scale
    zero_deadband: float = 0.5

    def __post_init__(self):
        if self.window_samples < 2:
            raise ValueError("window_samples must be >= 2")
        if not 1 <= self.stride_samples <= self.window_samples:
            raise ValueError("stride_samples must be in [1, window_samples]")
        if self.fallback_samples < 1:
            raise ValueError("fallback_samples must be >= 1")


@dataclass(frozen=True)
class HalfCycleWindow:
    samples: tuple[float, ...]
    start_index: int

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(v) for v in self.samples))

    def __len__(self) -> int:
        return len(self.samples)


class HalfCycleRms(NamedTuple):
    half_cycle_index: int
    time: float
    value: float
    window_start: int = 0


def compute_rms(window, formula: Formula = Formula.CORRECTED) -> float:
    samples = window.samples if isinstance(window, HalfCycleWindow) else window
    n = len(samples)
    if n == 0:
        raise ValueError("empty window")
    total = math.fsum(float(v) * float(v) for v in samples)
    if formula is Formula.PAPER_LITERAL:
        return math.sqrt(total) / n
    return math.sqrt(total / n)


def _sign(v: float, deadband: float) -> int:
    if abs(v) < deadband:
        return 0
    return 1 if v > 0 else -1


class RmsEngine:
    """Streaming RMS½ calculator.

    Feed mains-scale voltages in index order with :meth:`push_sample`; a
    :class:`HalfCycleRms` comes back whenever a window boundary completes.
    """

    def __init__(self, cfg: RmsConfig = RmsConfig(), sample_rate: float = 3600.0):
        self.cfg = cfg
        self.sample_rate = sample_rate
        self._buf: deque[float] = deque(maxlen=cfg.window_samples)
        self._last_index: Optional[int] = None
        self._anchor: Optional[int] = None
        self._state = AlignState.SEARCHING
        self._search: list[tuple[int, float]] = []
        self._search_peak = 0.0
        self._emitted = 0

    @property
    def anchor(self) -> Optional[int]:
        return self._anchor

    @property
    def state(self) -> AlignState:
        return self._state

    def window(self) -> Optional[HalfCycleWindow]:
        if len(self._buf) < self.cfg.window_samples:
            return None
        return HalfCycleWindow(tuple(self._buf), self._last_index - self.cfg.window_samples + 1)

    def align(self, v: float, index: int) -> AlignState:
        """Advance the zero-crossing search by one sample.

        A rising crossing at ``i`` needs ``v[i-1] < 0 <= v[i]`` and
        ``v[i+1] > 0`` (signs taken through the dead band), so detection lags
        one sample.  The very first sample counts as a crossing when it sits
        at zero and the next one is positive.
        """
        cfg = self.cfg
        self._search.append((index, v))
        self._search_peak = max(self._search_peak, abs(v))
        if len(self._search) >= 2 and self._search_peak >= cfg.min_peak:
            i, vi = self._search[-2]
            si = _sign(vi, cfg.zero_deadband)
            nxt = _sign(v, cfg.zero_deadband)
            if len(self._search) == 2:
                rising = si == 0 and nxt > 0
            else:
                prev = _sign(self._search[-3][1], cfg.zero_deadband)
                rising = prev < 0 <= si and nxt > 0
            if rising:
                self._anchor = i
                self._buf.extend(x for _, x in self._search[-2:])
                self._state = AlignState.ANCHORED
                self._search = []
                return self._state
        if index - self._search[0][0] >= cfg.fallback_samples:
            self._anchor = index
            self._buf.append(v)
            self._state = AlignState.FALLBACK
            self._search = []
        return self._state

    def _watch_for_crossing(self, index: int) -> None:
        # after a fallback, re-anchor on the first genuine rising crossing
        cfg = self.cfg
        if len(self._buf) < 3 or max(map(abs, self._buf)) < cfg.min_peak:
            return
        prev, cur, nxt = (_sign(self._buf[k], cfg.zero_deadband) for k in (-3, -2, -1))
        if prev < 0 <= cur and nxt > 0:
            self._anchor = index - 1
            self._state = AlignState.ANCHORED

    def push_sample(self, v: float, index: int) -> Optional[HalfCycleRms]:
        if self._last_index is not None and index <= self._last_index:
            raise ValueError(f"sample index {index} not after {self._last_index}")
        self._last_index = index
        cfg = self.cfg

        if self._anchor is None:
            if cfg.sync_mode is SyncMode.FIXED_STRIDE:
                self._anchor = index
                self._state = AlignState.ANCHORED
                self._buf.append(v)
            elif self.align(v, index) is AlignState.SEARCHING:
                return None
        else:
            self._buf.append(v)
            if self._state is AlignState.FALLBACK:
                self._watch_for_crossing(index)

        if len(self._buf) < cfg.window_samples:
            return None
        if (index + 1 - self._anchor - cfg.window_samples) % cfg.stride_samples:
            return None
        m = HalfCycleRms(
            half_cycle_index=self._emitted,
            time=(index + 1) / self.sample_rate,
            value=compute_rms(self._buf, cfg.formula),
            window_start=index + 1 - cfg.window_samples,
        )
        self._emitted += 1
        return m

    def feed(self, voltages: Iterable[float], start_index: int = 0) -> Iterator[HalfCycleRms]:
        for n, v in enumerate(voltages):
            m = self.push_sample(v, start_index + n)
            if m is not None:
                yield m


def measure(voltages: Sequence[float], cfg: RmsConfig = RmsConfig(),
            sample_rate: float = 3600.0, start_index: int = 0) -> list[HalfCycleRms]:
    """Run a fresh engine over a whole voltage record."""
    if isinstance(voltages, np.ndarray):
        voltages = voltages.tolist()
    return list(RmsEngine(cfg, sample_rate).feed(voltages, start_index))


def emission_count(n_samples: int, cfg: RmsConfig = RmsConfig(), anchor: int = 0) -> int:
    """Number of windows emitted for ``n_samples`` samples anchored at ``anchor``."""
    usable = n_samples - anchor - cfg.window_samples
    return 0 if usable < 0 else usable // cfg.stride_samples + 1
