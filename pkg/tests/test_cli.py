import csv
import os
from pathlib import Path

import pytest

from sagsurge.cli import main
from sagsurge.rms import RmsConfig, emission_count
from sagsurge.telemetry import decode_stream

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_steady(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(out)]) == 0
    assert "0 trips" in capsys.readouterr().out
    assert rows(out / "events.csv") == []
    trace = rows(out / "rms_trace.csv")
    assert len(trace) == emission_count(7200)
    assert list(trace[0]) == ["half_cycle_index", "time_s", "rms_v", "classification"]
    assert trace[0]["rms_v"].count(".") == 1 and len(trace[0]["rms_v"].split(".")[1]) == 6
    assert not (out / "telemetry.bin").exists()


def test_simulate_sag(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(SCENARIOS / "sag70.txt"), "--out", str(out)]) == 0
    events = rows(out / "events.csv")
    assert len(events) == 1 and events[0]["class"] == "sag"
    actions = [r["action"] for r in rows(out / "actions.csv")]
    assert actions == ["led_red", "open_relay", "led_green", "close_relay"]
    assert "1 trip," in capsys.readouterr().out


def test_missing_scenario(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_bad_override(tmp_path):
    code = main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(tmp_path),
                 "--lower", "140"])
    assert code == 2


def test_rate_must_divide_cycle(tmp_path):
    code = main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(tmp_path),
                 "--rate", "1000"])
    assert code == 2


def test_overrides_apply(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(out),
                 "--rate", "7200", "--bits", "12", "--sync", "fixed"]) == 0
    assert len(rows(out / "rms_trace.csv")) == emission_count(14400, RmsConfig(120, 60)) == 239
    out2 = tmp_path / "p"
    assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(out2),
                 "--formula", "paper"]) == 0
    # the literal formula reads ~15.5 V on 120 V mains, so everything is a sag
    assert rows(out2 / "events.csv")[0]["class"] == "sag"


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"),
                     "--out", str(locked / "sub")]) == 3
    finally:
        locked.chmod(0o700)


def test_output_path_is_a_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(blocker)]) == 3


def test_telemetry_invariance_and_decode(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    scen = str(SCENARIOS / "sag70.txt")
    assert main(["simulate", "--scenario", scen, "--out", str(a), "--telemetry"]) == 0
    assert main(["simulate", "--scenario", scen, "--out", str(b)]) == 0
    assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()

    frames, diags = decode_stream((a / "telemetry.bin").read_bytes())
    capsys.readouterr()
    assert main(["decode", str(a / "telemetry.bin")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) - 1 == len(frames)
    assert sum(1 for line in out if line.startswith("event,")) == 2
    # 5 s at 3600 Hz is 75 sample frames, plus trip and reconnect
    assert len(frames) == 77 and diags == []


def test_decode_corrupted(tmp_path, capsys):
    out = tmp_path / "o"
    main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"), "--out", str(out), "--telemetry"])
    raw = bytearray((out / "telemetry.bin").read_bytes())
    raw[100] ^= 0xFF
    bad = tmp_path / "bad.bin"
    bad.write_bytes(bytes(raw))
    capsys.readouterr()
    assert main(["decode", str(bad)]) == 1
    assert "crc" in capsys.readouterr().err


def test_decode_empty_and_missing(tmp_path, capsys):
    empty = tmp_path / "e.bin"
    empty.write_bytes(b"")
    assert main(["decode", str(empty)]) == 0
    assert main(["decode", str(tmp_path / "missing.bin")]) == 2


def test_describe(tmp_path, capsys):
    assert main(["describe", str(SCENARIOS / "steady.txt")]) == 0
    assert "no events" in capsys.readouterr().out
    p = write(tmp_path, "s.txt", "duration=1\nsag start=0.5 span=0.1 target=70\n")
    assert main(["describe", p]) == 0
    out = capsys.readouterr().out
    timeline = [line for line in out.splitlines() if line.strip().startswith("sag")]
    assert len(timeline) == 1 and "0.5" in timeline[0] and "0.1" in timeline[0] and "70" in timeline[0]
    assert "min 70 V" in out


def test_describe_malformed(tmp_path, capsys):
    p = write(tmp_path, "bad.txt", "duration=1\nsag start=0.5 span=oops target=70\n")
    assert main(["describe", p]) == 2
    assert "line 2" in capsys.readouterr().err


def test_usage_error():
    assert main(["simulate"]) == 2


def test_saturation_warning(tmp_path, capsys):
    p = write(tmp_path, "hot.txt", "duration=0.5\nsurge start=0.1 span=0.2 target=260\n")
    assert main(["simulate", "--scenario", p, "--out", str(tmp_path / "o")]) == 0
    assert "headroom" in capsys.readouterr().err


def test_write_permission_error(tmp_path, monkeypatch):
    def deny(self, *a, **k):
        raise PermissionError(13, "Permission denied")
    monkeypatch.setattr(Path, "write_text", deny)
    assert main(["simulate", "--scenario", str(SCENARIOS / "steady.txt"),
                 "--out", str(tmp_path / "o")]) == 3
