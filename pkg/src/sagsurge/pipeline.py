"""End-to-end device simulation: waveform -> frontend -> RMS½ -> detector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detector import (Action, Classification, Detector, DetectorConfig, RunResult,
                       classify)
from .frontend import Acquisition, FrontendConfig, acquire, reconstruct
from .rms import HalfCycleRms, RmsConfig, RmsEngine
from .telemetry import EventClass, EventKind, FrameEncoder
from .waveform import Scenario


@dataclass
class Simulation:
    scenario: Scenario
    frontend: FrontendConfig
    rms_cfg: RmsConfig
    detector_cfg: DetectorConfig
    acquisition: Acquisition
    voltages: np.ndarray
    measurements: list[HalfCycleRms]
    classes: list[Classification]
    result: RunResult
    anchor: int = 0
    relay_trace: list = field(default_factory=list)

    @property
    def events(self):
        return self.result.events

    def action_indices(self, action: Action) -> list[int]:
        return [i for i, a in self.result.actions if a is action]

    def measurement(self, half_cycle_index: int) -> HalfCycleRms:
        return self.measurements[half_cycle_index]


def rms_config_for(frontend: FrontendConfig, frequency: float, **overrides) -> RmsConfig:
    """One-cycle window refreshed every half cycle at the frontend's sample rate."""
    per_cycle = frontend.sample_rate / frequency
    window = round(per_cycle)
    if abs(per_cycle - window) > 1e-9 or window % 2:
        raise ValueError(f"sample rate {frontend.sample_rate:g} Hz does not give an even "
                         f"whole number of samples per {frequency:g} Hz cycle")
    return RmsConfig(window_samples=window, stride_samples=window // 2,
                     fallback_samples=2 * window, **overrides)


def simulate(scenario: Scenario, frontend: FrontendConfig = FrontendConfig(),
             rms_cfg: RmsConfig = None, detector_cfg: DetectorConfig = DetectorConfig()) -> Simulation:
    if rms_cfg is None:
        rms_cfg = rms_config_for(frontend, scenario.frequency)
    acq = acquire(scenario, frontend)
    volts = reconstruct(acq.codes, frontend)
    engine = RmsEngine(rms_cfg, frontend.sample_rate)
    det = Detector(detector_cfg)
    measurements, classes, relay = [], [], []
    for n, v in enumerate(volts.tolist()):
        m = engine.push_sample(v, n)
        if m is None:
            continue
        measurements.append(m)
        classes.append(classify(m.value, detector_cfg))
        det.step(m)
        relay.append(det.state.relay)
    return Simulation(scenario, frontend, rms_cfg, detector_cfg, acq, volts,
                      measurements, classes, det.result(),
                      anchor=engine.anchor if engine.anchor is not None else 0,
                      relay_trace=relay)


def telemetry_bytes(sim: Simulation) -> bytes:
    """Sample frames for the whole acquisition with trip/reconnect frames interleaved.

    An event frame follows the sample frame holding the last sample of the
    measurement window that caused it.
    """
    enc = FrameEncoder()
    pending = []
    by_index = {m.half_cycle_index: m for m in sim.measurements}
    open_cls = {}
    for ev in sim.events:
        open_cls[ev.trip_half_cycle] = ev.cls
    for idx, action in sim.result.actions:
        if action not in (Action.OPEN_RELAY, Action.CLOSE_RELAY):
            continue
        m = by_index[idx]
        end_sample = m.window_start + sim.rms_cfg.window_samples
        if action is Action.OPEN_RELAY:
            cls = EventClass.SAG if open_cls[idx] is Classification.SAG else EventClass.SURGE
            pending.append((end_sample, EventKind.TRIP, cls, m))
        else:
            pending.append((end_sample, EventKind.RECONNECT, EventClass.NOT_APPLICABLE, m))

    codes = sim.acquisition.codes.tolist()
    out = bytearray()
    k = 0
    chunk = 240
    for start in range(0, len(codes), chunk):
        out += enc.samples(codes[start:start + chunk], start)
        stop = min(start + chunk, len(codes))
        while k < len(pending) and pending[k][0] <= stop:
            end_sample, kind, cls, m = pending[k]
            out += enc.event(kind, cls, m.half_cycle_index, m.value, end_sample)
            k += 1
    for end_sample, kind, cls, m in pending[k:]:
        out += enc.event(kind, cls, m.half_cycle_index, m.value, end_sample)
    return bytes(out)
