import json
import math

import pytest
from numpy.testing import assert_allclose

from harmzero.calibration import (
    CALIBRATION_VERSION,
    Calibration,
    CalibrationError,
    build_thresholds,
    calibration_options,
    load_calibration,
    save_calibration,
    uncalibrated,
)


def test_packaged_calibration_loads():
    cal = load_calibration()
    assert cal.version == CALIBRATION_VERSION
    for key, v in cal.deltas.items():
        assert 0 < v < 0.5, key
    # two perpendicular lines are sin(45 deg) from the nearest line; the
    # threshold is half of that
    assert_allclose(cal.deltas[(2, 2, 1)], 1 / (2 * math.sqrt(2)), atol=0.01)


def test_missing_malformed_and_mismatched(tmp_path):
    with pytest.raises(CalibrationError, match="harmzero calibrate"):
        load_calibration(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": "1",\n "deltas": [}')
    with pytest.raises(CalibrationError, match="line 2"):
        load_calibration(bad)
    old = tmp_path / "old.json"
    old.write_text(json.dumps({"version": "0", "deltas": [{"n": 2, "d": 2, "k": 1, "value": 0.3}]}))
    with pytest.raises(CalibrationError, match="version"):
        load_calibration(old)
    assert load_calibration(old, required_version=None).version == "0"


def test_roundtrip_and_fallback(tmp_path):
    cal = Calibration(CALIBRATION_VERSION, {(2, 2, 1): 0.35, (2, 4, 1): 0.30, (3, 3, 2): 0.25},
                      {"c": 1.0}, {"g0": 1.0, "f0": 0.5}, {})
    path = tmp_path / "cal.json"
    save_calibration(cal, path)
    back = load_calibration(path)
    assert back.deltas == cal.deltas and back.constants == cal.constants
    assert back.delta(2, 2, 1) == (0.35, False)
    # unknown degree: smallest stored value with the same n and k
    assert back.delta(2, 7, 1) == (0.30, True)
    # unknown dimension: smallest value for that k anywhere
    assert back.delta(5, 3, 2) == (0.25, True)
    assert uncalibrated().delta(2, 2, 1)[1]


def test_tiny_threshold_build():
    deltas, detail = build_thresholds([(2, 2, 1)], calibration_options(fast=True))
    assert_allclose(deltas[(2, 2, 1)], 1 / (2 * math.sqrt(2)), atol=0.02)
    assert detail[0]["cone"] == "re_z2"
