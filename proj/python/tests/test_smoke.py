# SPDX-License-Identifier: Apache-2.0
import csv
import math

import numpy as np
import pytest

import sargcp


def test_geodesy_round_trip():
    lat, lon, h = math.radians(52.5), math.radians(13.4), 41.9
    p = sargcp.geodetic_to_ecef(lat, lon, h)
    assert p.shape == (3,)
    back = sargcp.ecef_to_geodetic(p)
    assert back == pytest.approx((lat, lon, h), abs=1e-9)
    zone = sargcp.utm_zone_for(lon)
    assert zone == 33
    e, n = sargcp.geodetic_to_map(lat, lon, h, zone)
    assert sargcp.map_to_geodetic(e, n, zone, True, h)[:2] == pytest.approx((lat, lon), abs=1e-9)


def test_medcouple_and_fences():
    assert sargcp.medcouple([1, 2, 3, 5, 100]) == pytest.approx(1 / 3)
    b = sargcp.adjusted_boxplot_bounds([1, 2, 3, 4, 5, 6, 7, 8, 9])
    assert b.medcouple == 0.0
    assert (b.lower, b.upper) == pytest.approx((b.q1 - 1.5 * (b.q3 - b.q1), b.q3 + 1.5 * (b.q3 - b.q1)))
    with pytest.raises(sargcp.DomainError):
        sargcp.medcouple([1.0, 2.0])


def test_screen_flags_gross_value():
    flags = sargcp.screen_series([0.10, 0.11, 0.09, 0.12, 0.10, 0.11, 0.45, 0.10])
    assert flags[6] == "boxplot_outlier"
    assert flags.count("kept") == 7


def test_pta_locates_sinc_target():
    n = 32
    r = np.arange(n)[:, None] - 15.3
    c = np.arange(n)[None, :] - 16.6
    chip = (np.sinc(r) * np.sinc(c)).astype(complex)
    res = sargcp.analyze_chip(chip, origin_line=100.0, origin_sample=200.0)
    assert res.status == "ok"
    # The truncated sinc is not periodic, so spectral padding leaks a little.
    assert res.line == pytest.approx(115.3, abs=0.02)
    assert res.sample == pytest.approx(216.6, abs=0.02)


def test_pipeline_on_minimal_scene(tmp_path):
    manifest = sargcp.simulate("minimal", 3, str(tmp_path / "scene"))
    out = tmp_path / "out"
    logs = sargcp.run_all(manifest, str(out))
    assert [log["stage"] for log in logs] == list(sargcp.STAGES)
    with open(out / "solutions.csv", newline="") as f:
        rows = [r for r in csv.DictReader(line for line in f if not line.startswith("#"))]
    accepted = [r for r in rows if r["outcome"] == "accepted"]
    assert accepted
    assert all(float(r["s_h"]) > 0 for r in accepted)
    again = sargcp.run_stage("solve", manifest, str(out))
    assert again["stage"] == "solve"
    with pytest.raises(sargcp.DomainError):
        sargcp.run_stage("nonsense", manifest, str(out))


def test_malformed_manifest_is_parse_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"method": ')
    with pytest.raises(sargcp.ParseError):
        sargcp.run_all(str(bad), str(tmp_path / "out"))
