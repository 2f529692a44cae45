import csv
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from faultzone.casegen import (IMPEDANCE_ROWS, augment_ids, base_training_ids, decode, encode,
                               full_matrix, matrix_size, read_ids, split_ids, subsample,
                               write_ids, write_manifest, zone_label)
from faultzone.errors import ConfigError


def test_matrix_sizes():
    assert matrix_size(1) == 28800
    assert matrix_size(2) == 21600
    assert len(full_matrix(1)) == 28800


def test_rows_are_equal_blocks():
    for scenario, per_row in ((1, 5760), (2, 4320)):
        counts = Counter((c.zg1_pct, c.zg2_pct) for c in full_matrix(scenario))
        assert set(counts) == set(IMPEDANCE_ROWS)
        assert set(counts.values()) == {per_row}


def test_split_sizes():
    for scenario, base, aug, base_row, aug_row in ((1, 3600, 800, 720, 160), (2, 2700, 600, 540, 120)):
        b = base_training_ids(scenario)
        a = augment_ids(scenario)
        assert len(b) == base and len(a) == aug
        assert not b & a
        assert len(split_ids(scenario, "augmented")) == base + aug
        for ids, per_row in ((b, base_row), (a, aug_row)):
            counts = Counter((decode(scenario, i).zg1_pct, decode(scenario, i).zg2_pct) for i in ids)
            assert set(counts.values()) == {per_row}


def test_split_contents():
    for cid in base_training_ids(1):
        c = decode(1, cid)
        assert c.xc_pct == 50 and c.rf in (0, 5, 50) and c.fia in (0, 45, 117) and c.delta in (10, 30)
    for cid in augment_ids(2):
        c = decode(2, cid)
        assert c.xc_pct in (25, 50) and c.rf in (0, 50) and c.fia == 81 and c.delta == 20
    with pytest.raises(ConfigError):
        split_ids(1, "modified")


@given(st.sampled_from([1, 2]), st.integers(0, 21599))
def test_encode_decode_round_trip(scenario, cid):
    assert encode(decode(scenario, cid)) == cid


def test_decode_bounds():
    with pytest.raises(ConfigError):
        decode(1, 28800)
    with pytest.raises(ConfigError):
        decode(3, 0)


def test_zone_labels():
    assert [zone_label(km) for km in (50, 100, 150, 200, 250, 300, 325, 362.5)] == [1, 1, 1, 1, 2, 2, 3, 3]
    with pytest.raises(ConfigError):
        zone_label(363)
    with pytest.raises(ConfigError):
        zone_label(0)


def test_zone_shares():
    assert Counter(c.zone for c in full_matrix(1)) == {1: 14400, 2: 7200, 3: 7200}
    assert Counter(c.zone for c in full_matrix(2)) == {1: 7200, 2: 7200, 3: 7200}


def test_subsample_stratified_and_seeded():
    ids = range(matrix_size(1))
    a = subsample(ids, 0.1, 1, 1)
    assert a == subsample(ids, 0.1, 1, 1)
    assert a != subsample(ids, 0.1, 2, 1)
    assert len(a) == 2880
    assert Counter(decode(1, i).zone for i in a) == {1: 1440, 2: 720, 3: 720}
    assert subsample(ids, 1.0, 5, 1) == set(ids)
    with pytest.raises(ConfigError):
        subsample(ids, 0.0, 1, 1)


def test_manifest_and_id_files(tmp_path):
    cases = [decode(2, i) for i in (17, 3, 900)]
    path = tmp_path / "cases.csv"
    write_manifest(cases, path)
    rows = list(csv.DictReader(path.open()))
    assert [int(r["case_id"]) for r in rows] == [3, 17, 900]
    assert rows[0]["zone"] == str(decode(2, 3).zone)
    assert set(rows[0]) >= {"xc_pct", "rf", "fia", "delta", "fault_type", "location_km"}
    ids_path = tmp_path / "ids.txt"
    write_ids({5, 1, 3}, ids_path)
    assert ids_path.read_text() == "1\n3\n5\n"
    assert read_ids(ids_path) == {1, 3, 5}
