"""Smoke test for the knxlab Python extension.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/knxlab-*.whl
then run
    python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import knxlab


def check_codec():
    t = knxlab.Telegram.temperature_write("1.1.10", "1/1/1", 21.5)
    raw = t.encode()
    assert knxlab.Telegram.decode(raw) == t
    assert knxlab.Telegram.from_hex(t.hex()) == t
    assert t.temperature == 21.5 and t.hop_count == 6 and t.service == "group_write"
    assert raw[-1] == knxlab.checksum(raw[:-1]) == t.checksum()

    bad = bytearray(raw)
    bad[2] ^= 0x04
    try:
        knxlab.Telegram.decode(bytes(bad))
    except ValueError as e:
        assert "checksum" in str(e)
    else:
        raise AssertionError("corrupted frame accepted")

    assert t.coupler_forward().hop_count == 5
    assert knxlab.decode_dpt9(knxlab.encode_dpt9(22.5)) == 22.5


def check_divergences():
    assert knxlab.jsd([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert knxlab.jsd([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert abs(knxlab.jsd([1.0, 0.0], [0.5, 0.5]) - 0.311278124459) < 1e-9
    assert abs(knxlab.kl_divergence([0.5, 0.5], [0.25, 0.75]) - (0.5 + 0.5 * math.log2(2 / 3))) < 1e-12


def check_hvac():
    i = knxlab.hvac_attack_impact("bias", 1.0)
    ii = knxlab.hvac_attack_impact("override", 22.005)
    for r in (i, ii):
        assert all(v > 0 for v in r["additional_kwh"].values()), r
    assert knxlab.hvac_attack_impact("passthrough")["additional_kwh"]["total"] == 0.0


def check_bus():
    stealth = knxlab.simulate_counts("stealth", duration_s=1800.0)
    assert stealth["sensor_temperature"] == stealth["controller_temperature"] > 0
    single = knxlab.simulate_counts("single", duration_s=1800.0)
    assert single["controller_temperature"] == 2 * single["injected"]
    assert knxlab.simulate_counts("baseline", duration_s=1800.0) == knxlab.simulate_counts("baseline", duration_s=1800.0)


def check_suite():
    config = '{"bus": {"duration_s": 14400}, "detector": {"windows_min": [10, 30]}}'
    with tempfile.TemporaryDirectory() as out:
        text = knxlab.run_suite(out, seed=2, config_json=config)
        assert "detection rate (default)" in text
        assert (Path(out) / "results" / "detection_rates.csv").is_file()
    try:
        knxlab.run_suite("unused", config_json='{"attack": {"falsifier": {"kind": "scramble"}}}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")


if __name__ == "__main__":
    for check in (check_codec, check_divergences, check_hvac, check_bus, check_suite):
        check()
        print(f"ok {check.__name__}")
