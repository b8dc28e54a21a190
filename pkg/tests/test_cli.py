import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from rleach.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    ROUND_HEADER,
    SWEEP_HEADER,
    RunManifest,
    cmd_compare,
    cmd_run,
    cmd_sweep,
    config_from_dict,
    config_to_dict,
    load_config,
    main,
    parse_seeds,
)
from rleach.model import ConfigError, KoptMode, Position, ScenarioConfig, validate_config

SMALL = {"n_nodes": 20, "e0_j": 0.02}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _rows(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- config


def test_empty_config_is_table1(tmp_path):
    cfg = load_config(_write(tmp_path, {}))
    assert cfg == validate_config(ScenarioConfig())
    assert cfg.radio.e_mp == pytest.approx(1.3e-15) and cfg.radio.e_elec == pytest.approx(50e-9)


def test_empty_file_is_table1(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert load_config(path) == validate_config(ScenarioConfig())


def test_packet_bits_override(tmp_path):
    assert load_config(_write(tmp_path, {"packet_bits": 2000})).packet_bits == 2000


def test_invalid_p_ch_names_key(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, {"p_ch": 1.5}))
    assert [e[0] for e in info.value.errors] == ["p_ch"]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"p_ch": 0.1, "nodes": 100})
    assert info.value.errors[0][0] == "nodes"


def test_all_errors_reported():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"n_nodes": 0, "packet_bits": 0, "protocol": "heed", "e_fs_pj_per_bit_m2": "x"})
    assert {e[0] for e in info.value.errors} == {"n_nodes", "packet_bits", "protocol", "e_fs_pj_per_bit_m2"}


def test_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="parse"):
        load_config(path)


def test_full_document_units():
    cfg = config_from_dict({
        "e_elec_nj_per_bit": 50, "e_fs_pj_per_bit_m2": 10, "e_mp_pj_per_bit_m4": 0.0013,
        "e_da_nj_per_bit": 5, "e0_j": 0.5, "packet_bits": 4000, "n_nodes": 100, "field_m": 100,
        "p_ch": 0.05, "protocol": "rleach", "kopt_mode": "normalized", "no_ch_fallback": "direct_to_bs",
        "max_rounds": 20000, "seed": 1, "bs_position": [50, 120], "kopt_override": 4.0,
    })
    assert cfg.proto.kopt_mode is KoptMode.NORMALIZED and cfg.proto.kopt_override == 4.0
    assert cfg.bs == Position(50, 120)
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_parse_seeds():
    assert parse_seeds("3", 10) == (10, 11, 12)
    assert parse_seeds("5,1,9", 10) == (5, 1, 9)
    with pytest.raises(ConfigError):
        parse_seeds("zero", 1)


def test_manifest_seed_invariants(tmp_path):
    with pytest.raises(ConfigError):
        RunManifest(ScenarioConfig(), (), tmp_path)
    with pytest.raises(ConfigError):
        RunManifest(ScenarioConfig(), (1, 1), tmp_path)


# ---------------------------------------------------------------- run


def test_run_files(tmp_path):
    cfg = config_from_dict({**SMALL, "protocol": "leach"})
    written = cmd_run(RunManifest(cfg, (1, 2), tmp_path))
    assert sorted(p.name for p in written) == ["run_1.csv", "run_1.json", "run_2.csv", "run_2.json"]
    text = (tmp_path / "run_1.csv").read_text()
    assert text.startswith("# rleach ")
    assert "\r" not in text
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header == ",".join(ROUND_HEADER)
    rows = _rows(tmp_path / "run_1.csv")
    alive = [int(r["alive"]) for r in rows]
    assert alive == sorted(alive, reverse=True) and alive[-1] == 0
    assert float(rows[0]["avg_residual_j"]) == pytest.approx(0.02)
    assert all("e" not in r["total_residual_j"].lower() for r in rows)
    doc = json.loads((tmp_path / "run_1.json").read_text())
    assert doc["seed"] == 1 and doc["config"]["protocol"] == "leach"
    assert doc["total_packets_bs"] == int(rows[-1]["packets_to_bs_cum"])
    assert doc["markers"]["lnd"] == len(rows) - 1
    assert doc["resolved"]["k_opt"] is None


def test_run_table1_avg_residual_starts_at_half(tmp_path):
    cmd_run(RunManifest(validate_config(ScenarioConfig(max_rounds=3)), (1,), tmp_path))
    rows = _rows(tmp_path / "run_1.csv")
    assert rows[0]["avg_residual_j"] == "0.5"
    doc = json.loads((tmp_path / "run_1.json").read_text())
    assert doc["resolved"]["kopt_mode"] == "literal_clamp"
    assert doc["resolved"]["k_opt"] == pytest.approx(24, abs=2)


def test_joule_precision(tmp_path):
    cmd_run(RunManifest(config_from_dict(SMALL), (3,), tmp_path))
    doc = json.loads((tmp_path / "run_3.json").read_text())
    rows = _rows(tmp_path / "run_3.csv")
    for rep, row in zip(doc["rounds"], rows[1:]):
        assert float(row["dissipated_j"]) == rep["dissipated_j"]


def test_run_byte_identical(tmp_path):
    cfg = config_from_dict(SMALL)
    cmd_run(RunManifest(cfg, (4, 5), tmp_path / "a"))
    cmd_run(RunManifest(cfg, (4, 5), tmp_path / "b", jobs=2))
    for name in ("run_4.csv", "run_4.json", "run_5.csv", "run_5.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# ---------------------------------------------------------------- compare


def test_compare_files(tmp_path):
    cfg = config_from_dict(SMALL)
    written = cmd_compare(RunManifest(cfg, (1, 2, 3), tmp_path))
    assert {p.name for p in written} == {"compare.json", "compare.csv", "lifetime.dat", "packets.dat", "energy.dat"}
    doc = json.loads((tmp_path / "compare.json").read_text())
    assert doc["kopt_mode"] == "literal_clamp" and doc["seeds"] == [1, 2, 3]
    assert set(doc["ratios"]["mean"]) == {"fnd", "hnd", "lnd", "packets_bs", "energy_auc"}
    assert [r["seed"] for r in doc["ratios"]["per_seed"]] == [1, 2, 3]
    dat = (tmp_path / "lifetime.dat").read_text()
    blocks = dat.split("\n\n\n")
    assert len(blocks) == 2 and "# protocol: leach" in blocks[0] and "# protocol: rleach" in blocks[1]
    first = [l for l in blocks[0].splitlines() if not l.startswith("#")][0]
    assert first == "0 20"


def test_compare_off_mode_single_round_all_ones(tmp_path):
    # every node dies in round 0 under both protocols
    cfg = config_from_dict({**SMALL, "e0_j": 1e-9, "kopt_mode": "off"})
    cmd_compare(RunManifest(cfg, (1,), tmp_path))
    doc = json.loads((tmp_path / "compare.json").read_text())
    assert all(v == 1.0 for v in doc["ratios"]["mean"].values())


# ---------------------------------------------------------------- sweep


def test_sweep_rows(tmp_path):
    cfg = config_from_dict({**SMALL, "packet_bits": 2000})
    cmd_sweep(RunManifest(cfg, (1, 2), tmp_path), "e0", [0.02, 0.01, 0.04])
    rows = _rows(tmp_path / "sweep.csv")
    assert list(rows[0]) == list(SWEEP_HEADER)
    assert [(r["axis_value"], r["protocol"]) for r in rows] == [
        (v, p) for v in ("0.01", "0.02", "0.04") for p in ("leach", "rleach")
    ]


def test_single_point_sweep_matches_compare(tmp_path):
    cfg = config_from_dict(SMALL)
    cmd_sweep(RunManifest(cfg, (1, 2), tmp_path), "e0", [0.02])
    cmd_compare(RunManifest(cfg, (1, 2), tmp_path))
    rows = _rows(tmp_path / "sweep.csv")
    doc = json.loads((tmp_path / "compare.json").read_text())
    for row in rows:
        agg = doc["protocols"][row["protocol"]]
        for key in SWEEP_HEADER[2:]:
            assert float(row[key]) == agg[key]


def test_sweep_packet_bits_axis(tmp_path):
    cmd_sweep(RunManifest(config_from_dict(SMALL), (1,), tmp_path), "packet_bits", [2000, 4000])
    assert [r["axis_value"] for r in _rows(tmp_path / "sweep.csv")] == ["2000", "2000", "4000", "4000"]


def test_sweep_needs_values(tmp_path):
    with pytest.raises(ConfigError):
        cmd_sweep(RunManifest(config_from_dict(SMALL), (1,), tmp_path), "e0", [])


# ---------------------------------------------------------------- main / exit codes


def test_main_run(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    code = main(["run", "--config", str(cfg), "--seeds", "2", "--out", str(tmp_path / "o"), "--protocol", "leach"])
    assert code == 0
    assert (tmp_path / "o" / "run_1.csv").exists() and (tmp_path / "o" / "run_2.json").exists()
    doc = json.loads((tmp_path / "o" / "run_2.json").read_text())
    assert doc["config"]["protocol"] == "leach"


def test_main_overrides(tmp_path):
    cfg = _write(tmp_path, SMALL)
    code = main(["run", "--config", str(cfg), "--seeds", "7,", "--out", str(tmp_path),
                 "--kopt-mode", "normalized", "--fallback", "idle"])
    assert code == 0
    doc = json.loads((tmp_path / "run_7.json").read_text())
    assert doc["resolved"]["kopt_mode"] == "normalized" and doc["resolved"]["no_ch_fallback"] == "idle"


def test_main_sweep(tmp_path):
    cfg = _write(tmp_path, SMALL)
    code = main(["sweep", "--config", str(cfg), "--seeds", "1", "--out", str(tmp_path), "--e0", "0.01,0.02"])
    assert code == 0 and len(_rows(tmp_path / "sweep.csv")) == 4


def test_main_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"p_ch": 1.5})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "p_ch" in capsys.readouterr().err


def test_main_missing_config_is_io_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_IO


def test_main_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(blocker / "sub")]) == EXIT_IO


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, SMALL)
    proc = subprocess.run(
        [sys.executable, "-m", "rleach.cli", "compare", "--config", str(cfg), "--seeds", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "compare.json").exists()
