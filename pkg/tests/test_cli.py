import json

import pytest

from modx.cli import run
from modx.graph import load_partition, load_program_graph


@pytest.fixture()
def fixture_graph(tmp_path, capsys):
    path = tmp_path / "fixture.json"
    code = run(["gen-fixture", "planted", "--blocks", "4", "--block-size", "6",
                "--seed", "7", "-o", str(path)])
    capsys.readouterr()
    assert code == 0
    return path


def test_modularize_emits_partition_document(fixture_graph, capsys):
    code = run(["modularize", str(fixture_graph), "--ds-divisor", "1"])
    out = capsys.readouterr().out
    assert code == 0
    doc = json.loads(out)
    assert doc["version"] == "mpt-1"
    _, part = load_partition(out)
    graph = load_program_graph(fixture_graph.read_text())
    assert set(part.assignment) == set(graph.function_ids())


def test_modularize_seed_report_embeds_quality(fixture_graph, capsys):
    code = run(["modularize", str(fixture_graph), "--no-biases", "--seed-report"])
    out = capsys.readouterr().out
    assert code == 0
    doc = json.loads(out)
    assert "quality_report" in doc
    assert "origin_mq" in doc["quality_report"]


def test_unknown_flag_exits_2(fixture_graph, capsys):
    assert run(["modularize", str(fixture_graph), "--frobnicate"]) == 2


def test_unknown_subcommand_exits_2(capsys):
    assert run(["explode"]) == 2


def test_detect_requires_db(fixture_graph, capsys):
    assert run(["detect", str(fixture_graph)]) == 2


def test_missing_file_exits_1(capsys):
    assert run(["modularize", "/nonexistent/graph.json"]) == 1


def test_malformed_document_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["modularize", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    assert "modularize" in capsys.readouterr().out


def test_gen_fixture_deterministic_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["gen-fixture", "planted", "--seed", "5", "-o", str(a)])
    run(["gen-fixture", "planted", "--seed", "5", "-o", str(b)])
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_gen_fixture_library_with_noise_works_out_of_the_box(tmp_path, capsys):
    out = tmp_path / "target.json"
    code = run(["gen-fixture", "library-with-noise", "--lib-seed", "102",
                "--take", "3", "--noise", "50", "--seed", "4", "-o", str(out)])
    err = capsys.readouterr().err
    assert code == 0
    manifest = json.loads(err.strip().splitlines()[-1])
    assert len(manifest["taken_modules"]) == 3
    graph = load_program_graph(out.read_text())
    assert graph.n_functions == 3 * 20 + 50


def test_metrics_text_and_json(fixture_graph, tmp_path, capsys):
    part_path = tmp_path / "part.json"
    run(["modularize", str(fixture_graph), "--ds-divisor", "1", "-o", str(part_path)])
    capsys.readouterr()

    code = run(["metrics", str(fixture_graph), str(part_path)])
    text = capsys.readouterr().out
    assert code == 0
    assert "origin_mq" in text and "turbo_mq" in text

    code = run(["metrics", str(fixture_graph), str(part_path), "--format", "json"])
    out = capsys.readouterr().out
    assert code == 0
    doc = json.loads(out)
    assert set(doc) >= {"origin_mq", "bunch_mq", "avg_entries"}


def test_metrics_rejects_partial_partition(fixture_graph, tmp_path, capsys):
    part_path = tmp_path / "part.json"
    part_path.write_text(json.dumps({
        "version": "mpt-1",
        "program_name": "planted-7",
        "modules": [{"id": 0, "members": ["f00000"]}],
    }))
    assert run(["metrics", str(fixture_graph), str(part_path)]) == 1


def test_build_db_and_detect_round_trip(tmp_path, capsys):
    lib_path = tmp_path / "lib.json"
    run(["gen-fixture", "planted", "--blocks", "6", "--block-size", "10",
         "--seed", "21", "-o", str(lib_path)])
    db_dir = tmp_path / "db"
    code = run(["build-db", str(lib_path), "--lib-name", "demo",
                "--ref-frequency", "9", "--ds-divisor", "1",
                "--out", str(db_dir)])
    assert code == 0
    capsys.readouterr()

    code = run(["detect", str(lib_path), "--db", str(db_dir), "--report", "machine"])
    out = capsys.readouterr().out
    assert code == 0
    doc = json.loads(out)
    assert doc["version"] == "mrep-1"
    assert any(v["detected"] for v in doc["verdicts"])

    # detection is exit 0 also when nothing is found
    other = tmp_path / "other.json"
    run(["gen-fixture", "planted", "--blocks", "3", "--block-size", "8",
         "--seed", "77", "-o", str(other)])
    capsys.readouterr()
    assert run(["detect", str(other), "--db", str(db_dir)]) == 0


def test_compare_modules(tmp_path, capsys):
    lib_path = tmp_path / "lib.json"
    run(["gen-fixture", "planted", "--blocks", "4", "--block-size", "8",
         "--seed", "31", "-o", str(lib_path)])
    db_dir = tmp_path / "db"
    run(["build-db", str(lib_path), "--lib-name", "demo", "--ds-divisor", "1",
         "--out", str(db_dir)])
    capsys.readouterr()
    sig = db_dir / "demo" / "signature.json"
    code = run(["compare-modules", str(sig), str(sig),
                "--module-a", "0", "--module-b", "0", "--db", str(db_dir)])
    out = capsys.readouterr().out
    assert code == 0
    doc = json.loads(out)
    assert doc["aggregate"] == 1.0


def test_config_file_and_flag_precedence(tmp_path, capsys, monkeypatch):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"modularizer": {"use_biases": False}}))
    lib_path = tmp_path / "lib.json"
    run(["gen-fixture", "planted", "--blocks", "3", "--block-size", "6",
         "--seed", "41", "-o", str(lib_path)])
    capsys.readouterr()

    # config file disables biases: clusters form despite tiny graph
    run(["modularize", str(lib_path), "--config", str(cfg_path)])
    with_file = json.loads(capsys.readouterr().out)
    assert len(with_file["modules"]) < 18

    # MODX_CONFIG is honored when no flag is given
    monkeypatch.setenv("MODX_CONFIG", str(cfg_path))
    run(["modularize", str(lib_path)])
    with_env = json.loads(capsys.readouterr().out)
    assert with_env["modules"] == with_file["modules"]
    monkeypatch.delenv("MODX_CONFIG")

    # defaults keep biases on: the 18-node graph stays near-singleton
    run(["modularize", str(lib_path)])
    with_defaults = json.loads(capsys.readouterr().out)
    assert len(with_defaults["modules"]) == 18

    # an explicit flag beats the config file: re-enabling nothing here, but a
    # divisor flag alongside the file proves the merge order
    cfg_path.write_text(json.dumps({"modularizer": {"ds_limit_divisor": 100}}))
    run(["modularize", str(lib_path), "--config", str(cfg_path),
         "--ds-divisor", "1"])
    flag_wins = json.loads(capsys.readouterr().out)
    assert len(flag_wins["modules"]) < 18
