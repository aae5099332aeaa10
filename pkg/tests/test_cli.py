import json

import pytest

from roadtune.cli import main
from roadtune.dataset import load_dataset
from roadtune.harness import load_eval_items, render_report, report_from_dict, run_eval
from roadtune.providers import HashEmbeddingProvider

GUIDEBOOK = """\
TERM: Van
KIND: Definition
SOURCE: MMUCC
A van is a motor vehicle used to carry people or cargo.

TERM: Bus
KIND: Examples
SOURCE: MMUCC
School bus, transit bus, intercity coach.

TERM: Hit and Run
KIND: Guidance
SOURCE: HSM
Document the scene, then file the report.
"""

MANIFEST = """\
embed.tokens embedding 1000 aa
blocks.0 block 500 aa
blocks.1 block 501 aa
blocks.2 block 502 aa
blocks.3 block 503 aa
final_norm norm 10 aa
lm_head head 900 aa
"""


@pytest.fixture
def dataset_path(tmp_path):
    guidebook = tmp_path / "guidebook.txt"
    guidebook.write_text(GUIDEBOOK, encoding="utf-8")
    out = tmp_path / "seeds.jsonl"
    assert main(["ingest", "--guidebook", str(guidebook), "--out", str(out)]) == 0
    return out


# --- ingest -------------------------------------------------------------


def test_ingest_writes_valid_dataset(tmp_path, capsys):
    guidebook = tmp_path / "guidebook.txt"
    guidebook.write_text(GUIDEBOOK, encoding="utf-8")
    out = tmp_path / "seeds.jsonl"
    assert main(["ingest", "--guidebook", str(guidebook), "--out", str(out)]) == 0
    assert "wrote 3 record(s)" in capsys.readouterr().out
    records = load_dataset(out)
    assert len(records) == 3
    assert {r.task_type.value for r in records} == {"Definition", "Examples", "Guidance"}


def test_ingest_multiple_guidebooks(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("TERM: Van\nKIND: Definition\nSOURCE: MMUCC\nBody a.\n", encoding="utf-8")
    b.write_text("TERM: Bus\nKIND: Examples\nSOURCE: MMUCC\nBody b.\n", encoding="utf-8")
    out = tmp_path / "data.jsonl"
    code = main([
        "ingest", "--guidebook", str(a), "--guidebook", str(b), "--out", str(out)
    ])
    assert code == 0
    assert len(load_dataset(out)) == 2


def test_ingest_bad_guidebook_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("TERM: Van\nSOURCE: MMUCC\nBody.\n", encoding="utf-8")
    code = main(["ingest", "--guidebook", str(bad), "--out", str(tmp_path / "o.jsonl")])
    assert code == 1
    assert "missing KIND header" in capsys.readouterr().err


# --- stats and split ----------------------------------------------------


def test_stats_json(dataset_path, capsys):
    assert main(["stats", "--data", str(dataset_path), "--format", "json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["total"] == 3
    assert stats["by_source"]["MMUCC"] == 2
    assert stats["by_task_type"]["Guidance"] == 1
    assert stats["by_provenance"] == {"HUMAN": 3, "MODEL_GENERATED": 0}


def test_stats_text(dataset_path, capsys):
    assert main(["stats", "--data", str(dataset_path)]) == 0
    out = capsys.readouterr().out
    assert "total records: 3" in out
    assert "MMUCC: 2" in out


def test_stats_instruction_array(tmp_path, capsys):
    path = tmp_path / "plain.json"
    path.write_text(
        json.dumps([{"instruction": "a", "input": "b", "output": "c"}]),
        encoding="utf-8",
    )
    code = main([
        "stats", "--data", str(path), "--input-format", "instruction-array",
        "--format", "json",
    ])
    assert code == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["by_task_type"]["Guidance"] == 1
    assert stats["by_source"]["HSM"] == 1


def test_split_writes_both_halves(tmp_path, capsys):
    rows = []
    for i in range(10):
        rows.append(json.dumps({
            "id": f"r{i}", "instruction": "inst", "input": f"question {i}",
            "output": f"answer {i}", "task_type": "Definition",
            "source": "MMUCC", "provenance": "HUMAN",
        }))
    data = tmp_path / "data.jsonl"
    data.write_text("\n".join(rows) + "\n", encoding="utf-8")
    train = tmp_path / "train.jsonl"
    test = tmp_path / "test.jsonl"
    code = main([
        "--seed", "3", "split", "--data", str(data),
        "--train-out", str(train), "--test-out", str(test), "--fraction", "0.8",
    ])
    assert code == 0
    assert len(load_dataset(train)) == 8
    assert len(load_dataset(test)) == 2
    assert "8 train / 2 test" in capsys.readouterr().out


def test_split_bad_fraction_exits_1(dataset_path, tmp_path):
    code = main([
        "split", "--data", str(dataset_path),
        "--train-out", str(tmp_path / "a"), "--test-out", str(tmp_path / "b"),
        "--fraction", "1.5",
    ])
    assert code == 1


# --- generate -----------------------------------------------------------


def replay_file(tmp_path, texts):
    path = tmp_path / "replay.jsonl"
    path.write_text("\n".join(json.dumps(t) for t in texts) + "\n", encoding="utf-8")
    return path


def test_generate_from_replay(dataset_path, tmp_path, capsys):
    response = (
        "Instruction: describe the hazard\n"
        "Input: Explain hydroplaning risk on worn tires.\n"
        "Output: Tread depth controls water evacuation.\n"
        "\n"
        "Instruction: describe the hazard\n"
        "Input: Name common work zone devices.\n"
        "Output: Cones, barrels, and barriers.\n"
    )
    replay = replay_file(tmp_path, [response])
    out = tmp_path / "generated.jsonl"
    code = main([
        "generate", "--seeds", str(dataset_path), "--out", str(out),
        "--target", "2", "--replay", str(replay), "--max-in-flight", "1",
    ])
    assert code == 0
    records = load_dataset(out)
    assert len(records) == 2
    assert all(r.source.value == "GENERATED" for r in records)
    assert "accepted 2 record(s)" in capsys.readouterr().out


def test_generate_shortfall_exits_1_and_saves_partial(dataset_path, tmp_path, capsys):
    response = (
        "Instruction: describe the hazard\n"
        "Input: Explain hydroplaning risk on worn tires.\n"
        "Output: Tread depth controls water evacuation.\n"
    )
    replay = replay_file(tmp_path, [response] * 3)
    out = tmp_path / "generated.jsonl"
    code = main([
        "generate", "--seeds", str(dataset_path), "--out", str(out),
        "--target", "5", "--replay", str(replay), "--max-in-flight", "1",
        "--budget", "3",
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "1 of 5" in err
    assert len(load_dataset(out)) == 1


def test_generate_replay_exhaustion_exits_2(dataset_path, tmp_path):
    replay = replay_file(tmp_path, [])
    out = tmp_path / "generated.jsonl"
    code = main([
        "generate", "--seeds", str(dataset_path), "--out", str(out),
        "--target", "2", "--replay", str(replay), "--max-in-flight", "1",
    ])
    assert code == 2


# --- score --------------------------------------------------------------


def test_score_json(capsys):
    code = main([
        "score", "--candidate", "the car stopped", "--reference", "the car stopped",
        "--format", "json",
    ])
    assert code == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["bleu"] == pytest.approx(100.0)
    assert scores["rouge_l"]["f1"] == pytest.approx(100.0)
    assert scores["bleurt"] is None
    assert scores["word_count"] == 3


def test_score_text(capsys):
    code = main(["score", "--candidate", "a b", "--reference", "a b"])
    assert code == 0
    out = capsys.readouterr().out
    assert "BLEU        100.00" in out
    assert "BLEURT      n/a" in out
    assert "Word Count  2" in out


def test_score_from_files(tmp_path, capsys):
    cand = tmp_path / "cand.txt"
    ref = tmp_path / "ref.txt"
    cand.write_text("the police stopped the car", encoding="utf-8")
    ref.write_text("the police stopped the car", encoding="utf-8")
    code = main([
        "score", "--candidate-file", str(cand), "--reference-file", str(ref),
        "--format", "json",
    ])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["bleu"] == pytest.approx(100.0)


def test_score_requires_exactly_one_candidate_source(capsys):
    assert main(["score", "--reference", "r"]) == 3
    assert main([
        "score", "--candidate", "a", "--candidate-file", "f", "--reference", "r"
    ]) == 3


def test_score_empty_reference_exits_1():
    assert main(["score", "--candidate", "a", "--reference", "  "]) == 1


# --- eval and report ----------------------------------------------------


def eval_fixture(tmp_path):
    items_rows = [
        {"id": "q1", "task_type": "Definition", "instruction": "answer",
         "input": "what is a van", "reference": "a van carries people or cargo"},
        {"id": "q2", "task_type": "Guidance", "instruction": "answer",
         "input": "hit and run steps", "reference": "document the scene then file a report"},
    ]
    items = tmp_path / "items.jsonl"
    items.write_text(
        "\n".join(json.dumps(r) for r in items_rows) + "\n", encoding="utf-8"
    )
    outputs_rows = [
        {"item_id": "q1", "system": "echo", "text": "a van carries people or cargo"},
        {"item_id": "q2", "system": "echo", "text": "document the scene then file a report"},
        {"item_id": "q1", "system": "short", "text": "a van"},
        {"item_id": "q2", "system": "short", "text": "file a report"},
    ]
    outputs = tmp_path / "outputs.jsonl"
    outputs.write_text(
        "\n".join(json.dumps(r) for r in outputs_rows) + "\n", encoding="utf-8"
    )
    return items, outputs


def test_eval_table_to_stdout(tmp_path, capsys):
    items, outputs = eval_fixture(tmp_path)
    code = main(["eval", "--items", str(items), "--outputs", str(outputs)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("Type of task")
    assert "Definitions" in out
    assert "echo" in out and "short" in out


def test_eval_structured_matches_library(tmp_path):
    items_path, outputs_path = eval_fixture(tmp_path)
    report_path = tmp_path / "report.json"
    code = main([
        "eval", "--items", str(items_path), "--outputs", str(outputs_path),
        "--format", "structured", "--out", str(report_path),
    ])
    assert code == 0
    items = load_eval_items(items_path)
    from roadtune.harness import load_system_outputs
    outputs = load_system_outputs(outputs_path)
    by_system = {}
    for output in outputs:
        by_system.setdefault(output.system, []).append(output)
    expected = run_eval(items, by_system, embeddings=HashEmbeddingProvider())
    assert report_path.read_text(encoding="utf-8") == render_report(expected, "structured")


def test_eval_rerun_is_byte_identical(tmp_path):
    items, outputs = eval_fixture(tmp_path)
    first = tmp_path / "r1.txt"
    second = tmp_path / "r2.txt"
    for out in (first, second):
        code = main([
            "eval", "--items", str(items), "--outputs", str(outputs),
            "--out", str(out),
        ])
        assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_eval_collect_from_replay(tmp_path, capsys):
    items, _ = eval_fixture(tmp_path)
    replay = replay_file(tmp_path, ["a van carries people or cargo", "stay calm"])
    collected = tmp_path / "collected.jsonl"
    code = main([
        "eval", "--items", str(items), "--collect", "probe",
        "--replay", str(replay), "--collect-out", str(collected),
    ])
    assert code == 0
    saved = collected.read_text(encoding="utf-8").strip().split("\n")
    assert len(saved) == 2
    assert json.loads(saved[0])["system"] == "probe"
    assert "probe" in capsys.readouterr().out


def test_eval_without_outputs_is_usage_error(tmp_path):
    items, _ = eval_fixture(tmp_path)
    assert main(["eval", "--items", str(items)]) == 3


def test_eval_unknown_item_exits_1(tmp_path, capsys):
    items, _ = eval_fixture(tmp_path)
    bad = tmp_path / "bad_outputs.jsonl"
    bad.write_text(
        json.dumps({"item_id": "missing", "system": "sys", "text": "x"}) + "\n",
        encoding="utf-8",
    )
    assert main(["eval", "--items", str(items), "--outputs", str(bad)]) == 1
    assert "unknown item id" in capsys.readouterr().err


def test_report_rerenders_structured(tmp_path, capsys):
    items, outputs = eval_fixture(tmp_path)
    report_path = tmp_path / "report.json"
    main([
        "eval", "--items", str(items), "--outputs", str(outputs),
        "--format", "structured", "--out", str(report_path),
    ])
    code = main(["report", "--report", str(report_path)])
    assert code == 0
    table = capsys.readouterr().out
    assert table.startswith("Type of task")
    document = json.loads(report_path.read_text(encoding="utf-8"))
    assert table == render_report(report_from_dict(document), "table-text")


def test_report_bad_json_exits_1(tmp_path):
    path = tmp_path / "report.json"
    path.write_text("{broken", encoding="utf-8")
    assert main(["report", "--report", str(path)]) == 1


# --- trainplan ----------------------------------------------------------


def manifest_file(tmp_path, text=MANIFEST, name="layers.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_trainplan_emits_defaults(tmp_path, capsys):
    manifest = manifest_file(tmp_path)
    out = tmp_path / "train_config.json"
    code = main(["trainplan", "--manifest", str(manifest), "--out", str(out)])
    assert code == 0
    config = json.loads(out.read_text(encoding="utf-8"))
    assert config["batch_size"] == 16
    assert config["learning_rate"] == 2e-5
    assert config["epochs"] == 3
    assert config["max_sequence_length"] == 152
    assert config["warmup_ratio"] == 0.03
    assert config["weight_decay"] == 0.0
    assert config["trainable_layers"] == ["blocks.2", "blocks.3"]
    assert "2 trainable / 5 frozen" in capsys.readouterr().out


def test_trainplan_overrides(tmp_path, capsys):
    manifest = manifest_file(tmp_path)
    code = main([
        "trainplan", "--manifest", str(manifest),
        "--set", "epochs=1", "--set", "learning_rate=0.0001",
    ])
    assert code == 0
    config = json.loads(capsys.readouterr().out)
    assert config["epochs"] == 1
    assert config["learning_rate"] == 0.0001


def test_trainplan_unknown_override_exits_1(tmp_path):
    manifest = manifest_file(tmp_path)
    assert main(["trainplan", "--manifest", str(manifest), "--set", "lr=1"]) == 1


def test_trainplan_verify_pass(tmp_path, capsys):
    manifest = manifest_file(tmp_path)
    after = manifest_file(
        tmp_path,
        MANIFEST.replace("blocks.2 block 502 aa", "blocks.2 block 502 bb")
        .replace("blocks.3 block 503 aa", "blocks.3 block 503 bb"),
        name="after.txt",
    )
    code = main([
        "trainplan", "--manifest", str(manifest), "--verify-after", str(after)
    ])
    assert code == 0
    assert capsys.readouterr().out.startswith("PASS:")


def test_trainplan_verify_fail_exits_1(tmp_path, capsys):
    manifest = manifest_file(tmp_path)
    after = manifest_file(
        tmp_path,
        MANIFEST.replace("embed.tokens embedding 1000 aa", "embed.tokens embedding 1000 bb"),
        name="after.txt",
    )
    code = main([
        "trainplan", "--manifest", str(manifest), "--verify-after", str(after)
    ])
    assert code == 1
    out = capsys.readouterr().out
    assert out.startswith("FAIL:")
    assert "embed.tokens" in out


def test_trainplan_verify_warn_exit_0(tmp_path, capsys):
    manifest = manifest_file(tmp_path)
    code = main([
        "trainplan", "--manifest", str(manifest), "--verify-after", str(manifest)
    ])
    assert code == 0
    assert capsys.readouterr().out.startswith("WARN:")


# --- exit codes and global flags ---------------------------------------


def test_usage_errors_exit_3(capsys):
    assert main([]) == 3
    assert main(["not-a-command"]) == 3
    assert main(["ingest"]) == 3
    capsys.readouterr()


def test_missing_file_exits_1(tmp_path):
    assert main(["stats", "--data", str(tmp_path / "missing.jsonl")]) == 1


def test_config_flag_flows_into_commands(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"bleurt": {"kind": "constant", "value": 0.9}}))
    code = main([
        "--config", str(config),
        "score", "--candidate", "a b", "--reference", "a b", "--format", "json",
    ])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["bleurt"] == 0.9


def test_bad_config_exits_1(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text("{broken", encoding="utf-8")
    assert main(["--config", str(config), "score", "--candidate", "a",
                 "--reference", "b"]) == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "roadtune" in capsys.readouterr().out
