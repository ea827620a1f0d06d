from __future__ import annotations

import json
from dataclasses import replace

import pandas as pd
import pytest

from cheeger_lab.errors import DataIntegrityError, InvalidParametersError
from cheeger_lab.research.config import (
    CONFIG_DIR,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    default_degrees,
    load_config,
    resolve_output_root,
)
from cheeger_lab.research.dataset import (
    GraphRecord,
    build_dataset,
    check_record,
    dataset_path,
    export_csv,
    load_records,
    make_record,
    planned_keys,
)

from conftest import SMALL_CONFIG


def test_default_degrees_respect_parity():
    assert default_degrees(12) == [3, 4, 5, 6, 7, 8]
    assert default_degrees(13) == [4, 6, 8]
    assert default_degrees(6) == [3, 4]


def test_config_rejects_odd_pair():
    cfg = config_from_dict({"sizes": [13], "degrees": {"13": [3]}})
    with pytest.raises(InvalidParametersError):
        cfg.validate()


def test_config_rejects_zero_count():
    with pytest.raises(InvalidParametersError):
        config_from_dict({"sizes": [10], "counts": {"10": 0}}).validate()


def test_config_dict_round_trip_ignores_unknown_keys():
    cfg = config_from_dict({**SMALL_CONFIG, "not_a_field": 1})
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg
    assert cfg.count_for(8) == 60
    assert cfg.count_for(14) == 2000


def test_presets_load_and_validate():
    for name in ("desk_scale.json", "smoke.json"):
        load_config(CONFIG_DIR / name).validate()


def test_output_root_priority(monkeypatch, tmp_path):
    monkeypatch.setenv("CHEEGER_LAB_DIR", str(tmp_path / "env"))
    assert str(resolve_output_root("cli")) == "cli"
    assert resolve_output_root(None, ExperimentConfig(output_dir="cfg")).name == "cfg"
    assert resolve_output_root(None) == tmp_path / "env"
    monkeypatch.delenv("CHEEGER_LAB_DIR")
    assert resolve_output_root(None).name == "cheeger_lab_runs"


def test_planned_keys_split_counts():
    cfg = config_from_dict({"sizes": [12], "counts": {"12": 600}})
    keys = planned_keys(cfg, 12)
    assert len(keys) == 600
    per_degree = pd.Series([k for _, k, _ in keys]).value_counts().sort_index()
    assert per_degree.to_dict() == {k: 100 for k in range(3, 9)}
    uneven = planned_keys(config_from_dict({"sizes": [12], "counts": {"12": 8}}), 12)
    assert [k for _, k, _ in uneven] == [3, 3, 4, 4, 5, 6, 7, 8]


def test_make_record_passes_checks():
    record = make_record(12, 3, 0, 7)
    assert check_record(record) == []
    assert record.h == record.h_num / record.h_den
    assert len(record.spectrum) == 12
    assert make_record(12, 3, 0, 7) == record


def test_check_record_flags_broken_sandwich():
    record = make_record(10, 4, 1, 7)
    broken = replace(record, h_num=record.h_num * 20, h=record.h_num * 20 / record.h_den)
    assert any(p.startswith("sandwich:") for p in check_record(broken))


def test_small_dataset_records_are_sound(small_dataset_dir):
    records = load_records([small_dataset_dir], check=True)
    assert len(records) == 120
    assert [r.key for r in records] == sorted(r.key for r in records)
    assert {r.n for r in records} == {8, 10}


def test_rebuild_is_byte_identical(small_dataset_dir, tmp_path):
    before = dataset_path(small_dataset_dir, 8).read_bytes()
    build_dataset(config_from_dict(SMALL_CONFIG), small_dataset_dir)
    assert dataset_path(small_dataset_dir, 8).read_bytes() == before


def test_threaded_build_matches_serial(small_dataset_dir, tmp_path):
    cfg = config_from_dict({**SMALL_CONFIG, "threads": 2})
    build_dataset(cfg, tmp_path)
    for n in (8, 10):
        assert dataset_path(tmp_path, n).read_bytes() == dataset_path(small_dataset_dir, n).read_bytes()


def test_build_tops_up_without_regenerating(tmp_path):
    small = config_from_dict({"sizes": [10], "counts": {"10": 12}})
    build_dataset(small, tmp_path)
    first = load_records([tmp_path])
    build_dataset(config_from_dict({"counts": {"10": 24}}, base_cfg=small), tmp_path)
    grown = {r.key: r for r in load_records([tmp_path])}
    assert len(grown) == 24
    assert all(grown[r.key] == r for r in first)


def test_build_with_new_seed_replaces_records(tmp_path):
    base = {"sizes": [8], "counts": {"8": 8}}
    build_dataset(config_from_dict({**base, "master_seed": 7}), tmp_path)
    build_dataset(config_from_dict({**base, "master_seed": 8}), tmp_path)
    records = load_records([tmp_path], check=True)
    assert len(records) == 8
    assert {r.seed_master for r in records} == {8}
    fresh = tmp_path / "fresh"
    build_dataset(config_from_dict({**base, "master_seed": 8}), fresh)
    assert dataset_path(tmp_path, 8).read_bytes() == dataset_path(fresh, 8).read_bytes()


def test_load_records_rejects_unparseable_file(tmp_path):
    path = tmp_path / "records_n8.jsonl"
    path.write_text("{not json\n", encoding="utf-8")
    with pytest.raises(InvalidParametersError, match="invalid JSON"):
        load_records([path])


def test_load_config_rejects_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"sizes": [12,', encoding="utf-8")
    with pytest.raises(InvalidParametersError):
        load_config(path)
    path.write_text('{"sizes": 12}', encoding="utf-8")
    with pytest.raises(InvalidParametersError):
        load_config(path)


def test_load_records_rejects_corrupt_record(tmp_path):
    record = make_record(8, 3, 0, 7)
    bad = {**record.to_dict(), "h": record.h + 1.0}
    path = tmp_path / "records_n8.jsonl"
    path.write_text(json.dumps(bad) + "\n", encoding="utf-8")
    with pytest.raises(DataIntegrityError) as info:
        load_records([path], check=True)
    assert info.value.key == (8, 3, 0)


def test_inputs_selection():
    record = make_record(8, 3, 2, 7)
    assert record.inputs(2) == record.spectrum[:2]
    assert record.inputs(0) == record.spectrum
    with pytest.raises(InvalidParametersError):
        record.inputs(9)


def test_export_csv(small_dataset_dir, tmp_path):
    records = load_records([small_dataset_dir])
    path = export_csv(records, tmp_path / "records.csv")
    df = pd.read_csv(path, float_precision="round_trip")
    assert list(df.columns) == ["n", "k", "index", "lambda0", "lambda1", "lambda2", "lambda3", "h", "h_num", "h_den"]
    assert len(df) == len(records)
    assert df["h"].tolist() == [r.h for r in records]
    assert df["lambda1"].tolist() == [r.spectrum[1] for r in records]


def test_record_dict_keeps_key_order():
    record = make_record(8, 4, 0, 7)
    assert list(record.to_dict()) == [
        "n", "k", "index", "seed_master", "seed_stream", "spectrum", "h_num", "h_den", "h",
    ]
    assert GraphRecord.from_dict(record.to_dict()) == record
