"""Command-line harness.

    sagsurge simulate --scenario FILE --out DIR [options]
    sagsurge decode FILE
    sagsurge describe FILE

Exit codes: 0 clean, 1 data-quality problem, 2 input error, 3 output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .detector import DetectorConfig
from .frontend import FrontendConfig
from .pipeline import rms_config_for, simulate, telemetry_bytes
from .rms import Formula, SyncMode
from .telemetry import SampleFrame, decode_stream
from .waveform import DisturbanceKind, Scenario, ScenarioError, parse_scenario

EXIT_OK = 0
EXIT_DATA = 1
EXIT_INPUT = 2
EXIT_OUTPUT = 3


def _v(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6f}"


def _load(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_scenario(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_outputs(sim) -> dict[str, str]:
    trace = _csv(
        ((m.half_cycle_index, f"{m.time:.6f}", _v(m.value), c.value)
         for m, c in zip(sim.measurements, sim.classes)),
        ("half_cycle_index", "time_s", "rms_v", "classification"),
    )
    events = _csv(
        ((e.cls.value, e.onset_half_cycle, e.trip_half_cycle, e.end_half_cycle,
          _v(e.extremal_rms), "" if e.reconnect_half_cycle is None else e.reconnect_half_cycle,
          _v(e.onset_time), _v(e.trip_time), _v(e.reconnect_time))
         for e in sim.events),
        ("class", "onset_half_cycle", "trip_half_cycle", "end_half_cycle", "extremal_rms_v",
         "reconnect_half_cycle", "onset_time_s", "trip_time_s", "reconnect_time_s"),
    )
    actions = _csv(((i, a.value) for i, a in sim.result.actions), ("half_cycle_index", "action"))
    return {"rms_trace.csv": trace, "events.csv": events, "actions.csv": actions}


def cmd_simulate(args) -> int:
    try:
        scenario = _load(args.scenario)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        fe_kw = {k: v for k, v in (("sample_rate", args.rate), ("adc_bits", args.bits),
                                   ("adc_reference", args.vref)) if v is not None}
        frontend = FrontendConfig(**fe_kw)
        det_kw = {k: v for k, v in (("lower_bound", args.lower), ("upper_bound", args.upper),
                                    ("trip_count", args.trip_count),
                                    ("reconnect_count", args.reconnect_count)) if v is not None}
        detector_cfg = DetectorConfig(**det_kw)
        rms_cfg = rms_config_for(frontend, scenario.frequency,
                                 sync_mode=SyncMode(args.sync), formula=Formula(args.formula))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sim = simulate(scenario, frontend, rms_cfg, detector_cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    files = render_outputs(sim)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
        if args.telemetry:
            (out / "telemetry.bin").write_bytes(telemetry_bytes(sim))
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_OUTPUT

    trips = sim.result.trips
    print(f"{len(sim.events)} events, {trips} trip{'s' if trips != 1 else ''}, "
          f"relay {sim.result.state.relay.value}, "
          f"{len(sim.measurements)} half-cycles, "
          f"{int(sim.acquisition.saturated.sum())} saturated samples")
    return EXIT_OK


def cmd_decode(args) -> int:
    try:
        data = Path(args.path).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {args.path}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    frames, diags = decode_stream(data)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("type", "sequence", "start_index", "count", "codes",
                "kind", "class", "half_cycle_index", "rms_mv"))
    for f in frames:
        if isinstance(f, SampleFrame):
            w.writerow(("sample", f.sequence, f.start_index, len(f.codes),
                        " ".join(map(str, f.codes)), "", "", "", ""))
        else:
            w.writerow(("event", f.sequence, f.start_index, "", "",
                        f.kind.name.lower(), f.cls.name.lower(), f.half_cycle_index, f.rms_millivolts))
    for d in diags:
        print(f"offset {d.offset}: {d.kind.value}: {d.reason}", file=sys.stderr)
    print(f"{len(frames)} frames, {len(diags)} diagnostics", file=sys.stderr)
    return EXIT_DATA if diags else EXIT_OK


def cmd_describe(args) -> int:
    try:
        s = _load(args.path)
    except ScenarioError as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"nominal_rms  {s.nominal_rms:g} V")
    print(f"frequency    {s.frequency:g} Hz")
    print(f"phase        {s.initial_phase:g} rad")
    print(f"duration     {s.duration:g} s")
    print(f"noise_rms    {s.noise_rms:g} V (seed {s.seed})")
    for h in s.harmonics:
        print(f"harmonic     order {h.order} amp {h.amplitude_fraction:g}")
    if not s.events:
        print("no events")
    else:
        print("timeline:")
        print("  kind   start_s   span_s    level_v")
        for ev in sorted(s.events, key=lambda e: e.start):
            if ev.kind is DisturbanceKind.FIDVR:
                level = (f"{ev.fidvr_sag_rms:g} for {ev.sag_span:g} s, "
                         f"then {ev.fidvr_surge_rms:g}")
            else:
                level = f"{ev.target_rms:g}"
                if ev.ramp:
                    level += f" (ramp {ev.ramp:g} s)"
            print(f"  {ev.kind.value:<6} {ev.start:<9g} {ev.span:<9g} {level}")
    lo, hi = s.envelope_extrema()
    print(f"envelope     min {lo:g} V, max {hi:g} V")
    fe = FrontendConfig()
    print(f"peak         {s.peak_bound():.3f} V (unsaturated up to {fe.max_unsaturated_rms:.1f} VRMS)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sagsurge", description="Voltage sag/surge detector simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario through the full device model")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--rate", type=float, help="sample rate in Hz (default 3600)")
    sim.add_argument("--bits", type=int, help="ADC resolution (default 10)")
    sim.add_argument("--vref", type=float, help="ADC reference in volts (default 5.0)")
    sim.add_argument("--lower", type=float, help="lower RMS bound (default 99)")
    sim.add_argument("--upper", type=float, help="upper RMS bound (default 132)")
    sim.add_argument("--trip-count", type=int)
    sim.add_argument("--reconnect-count", type=int)
    sim.add_argument("--formula", choices=[f.value for f in Formula], default=Formula.CORRECTED.value)
    sim.add_argument("--sync", choices=[m.value for m in SyncMode], default=SyncMode.ZERO_CROSSING.value)
    sim.add_argument("--telemetry", action="store_true", help="also write telemetry.bin")
    sim.set_defaults(func=cmd_simulate)

    dec = sub.add_parser("decode", help="decode a telemetry file to CSV")
    dec.add_argument("path")
    dec.set_defaults(func=cmd_decode)

    desc = sub.add_parser("describe", help="show a parsed scenario without simulating")
    desc.add_argument("path")
    desc.set_defaults(func=cmd_describe)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
