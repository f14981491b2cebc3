import json
from pathlib import Path

import pytest

from acadsearch.cli import main
from acadsearch.errors import (ConfigError, MissingArtifactError,
                               StaleArtifactError)
from acadsearch.pipeline import (DEFAULT_CONFIG, Pipeline, load_config,
                                 merge_config, stage_config_hash)

TINY = {
    "synth": {"n_docs": 600, "n_authors": 120, "n_venues": 8,
              "n_affiliations": 20, "n_topics": 4, "n_subtopics": 4,
              "vocab_size": 600, "year_min": 2005, "year_max": 2019},
    "split": {"max_train_queries": 150, "max_val_queries": 60,
              "max_test_queries": 60},
    "encoder": {"dim": 16, "buckets": 2048, "epochs": 2},
    "kg_train": {"epochs": 3, "batch_size": 512},
    "fusion": {"grid_step": 0.25, "include_transe": False},
    "eval": {"permutations": 500},
}


def tiny_cfg(workdir, **extra):
    overrides = json.loads(json.dumps(TINY))
    overrides.setdefault("paths", {})["workdir"] = str(workdir)
    for key, value in extra.items():
        overrides.setdefault(key, {}).update(value)
    return merge_config(overrides)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    workdir = tmp_path_factory.mktemp("tiny")
    cfg = tiny_cfg(workdir)
    pipeline = Pipeline(cfg, threads=1)
    pipeline.end_to_end()
    return cfg, workdir


def test_config_merge_and_overrides(tmp_path):
    cfg = load_config(None, ["kg_train.model=transe", "seed=11"])
    assert cfg["kg_train"]["model"] == "transe"
    assert cfg["seed"] == 11
    with pytest.raises(ConfigError):
        load_config(None, ["nonexistent.option=1"])
    with pytest.raises(ConfigError):
        merge_config({"bogus_section": {}})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"bm25": {"k1": 1.2}}))
    assert load_config(path)["bm25"]["k1"] == 1.2


def test_stage_config_hash_stability():
    cfg = merge_config(None)
    h1 = stage_config_hash(cfg, "synth")
    assert h1 == stage_config_hash(merge_config(None), "synth")
    cfg2 = merge_config({"synth": {"n_docs": 5}})
    assert stage_config_hash(cfg2, "synth") != h1


def test_end_to_end_artifacts_exist(tiny_run):
    _, workdir = tiny_run
    for rel in ("corpus/corpus.jsonl", "index/index.bin", "splits/split.json",
                "dense/encoder.bin", "embed/doc_embeddings.bin",
                "kg/triples.tsv", "kg_embed/transh/entities.bin",
                "score/test_candidates.jsonl", "tune/lambdas.json",
                "eval/metrics.json", "eval/run_bm25.txt", "ablate/ablation.txt"):
        assert (workdir / rel).exists(), rel


def test_manifests_record_config_hash(tiny_run):
    cfg, workdir = tiny_run
    manifest = json.loads((workdir / "index" / "manifest.json").read_text())
    assert manifest["stage"] == "index"
    assert manifest["config_hash"] == stage_config_hash(cfg, "index")
    assert "corpus/corpus.jsonl" in manifest["inputs"]


def test_eval_without_score_errors(tmp_path):
    cfg = tiny_cfg(tmp_path / "w")
    pipeline = Pipeline(cfg)
    with pytest.raises(MissingArtifactError, match="synth"):
        pipeline.stage_index()
    with pytest.raises(MissingArtifactError, match="run `score` first"):
        pipeline.stage_eval()


def test_stale_artifact_detection(tiny_run, tmp_path):
    cfg, workdir = tiny_run
    changed = json.loads(json.dumps(cfg))
    changed["synth"]["n_docs"] = 601
    pipeline = Pipeline(changed)
    with pytest.raises(StaleArtifactError, match="--force"):
        pipeline.stage_index()
    forced = Pipeline(changed, force=True)
    forced.stage_index()  # --force runs anyway
    # restore the original index for the remaining tests
    Pipeline(cfg).stage_index()


def test_stage_isolation_downstream_delete(tiny_run):
    cfg, workdir = tiny_run
    metrics_before = (workdir / "eval" / "metrics.json").read_bytes()
    for p in (workdir / "eval").iterdir():
        p.unlink()
    pipeline = Pipeline(cfg)
    pipeline.stage_eval()
    assert (workdir / "eval" / "metrics.json").read_bytes() == metrics_before


def test_end_to_end_deterministic(tmp_path_factory):
    runs = []
    for i in range(2):
        workdir = tmp_path_factory.mktemp(f"det{i}")
        cfg = tiny_cfg(workdir)
        Pipeline(cfg, threads=1).end_to_end()
        runs.append(workdir)
    a, b = runs
    for rel in ("eval/run_bm25.txt", "eval/run_two_stage.txt",
                "eval/run_fused_transh.txt", "eval/metrics.json",
                "eval/report.txt", "ablate/ablation.txt", "tune/lambdas.json"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_ingest_path(tmp_path, tiny_run):
    _, src_workdir = tiny_run
    workdir = tmp_path / "ing"
    cfg = tiny_cfg(workdir, paths={
        "corpus": str(src_workdir / "corpus" / "corpus.jsonl"),
        "authors": str(src_workdir / "corpus" / "authors.jsonl"),
    })
    pipeline = Pipeline(cfg)
    pipeline.stage_ingest()
    assert (workdir / "corpus" / "corpus.jsonl").exists()
    manifest = json.loads((workdir / "corpus" / "manifest.json").read_text())
    assert manifest["stage"] == "ingest"


def test_ingest_requires_corpus_path(tmp_path):
    cfg = tiny_cfg(tmp_path / "w")
    with pytest.raises(ConfigError):
        Pipeline(cfg).stage_ingest()


def test_cli_exit_codes(tmp_path):
    workdir = tmp_path / "w"
    cfg_path = tmp_path / "cfg.json"
    overrides = json.loads(json.dumps(TINY))
    overrides["paths"] = {"workdir": str(workdir)}
    cfg_path.write_text(json.dumps(overrides))
    # usage error -> 1
    assert main(["--bogus-flag"]) == 1
    assert main([]) == 1
    # missing artifact -> 2
    assert main(["--config", str(cfg_path), "--quiet", "eval"]) == 2
    # config error -> 1
    assert main(["--config", str(tmp_path / "missing.json"), "--quiet",
                 "synth"]) == 1
    # success -> 0
    assert main(["--config", str(cfg_path), "--quiet", "synth"]) == 0
    assert main(["--config", str(cfg_path), "--quiet", "index"]) == 0


def test_cli_data_error_exit_3(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        {"paths": {"workdir": str(tmp_path / "w"), "corpus": str(bad)}}))
    assert main(["--config", str(cfg_path), "--quiet", "ingest"]) == 3


@pytest.mark.parametrize("channel", ["mean", "attention", "selfcite",
                                     "pagerank", "pop"])
def test_baseline_user_channels_through_pipeline(tiny_run, tmp_path, channel):
    """Every baseline can serve as the fused third channel end to end."""
    import shutil
    cfg, src_workdir = tiny_run
    workdir = tmp_path / channel
    shutil.copytree(src_workdir, workdir)
    changed = json.loads(json.dumps(cfg))
    changed["paths"]["workdir"] = str(workdir)
    changed["fusion"]["user_channel"] = channel
    pipeline = Pipeline(changed)
    pipeline.stage_tune()
    pipeline.stage_eval()
    metrics = json.loads((workdir / "eval" / "metrics.json").read_text())
    assert f"fused_{channel}" in metrics["systems"]
    assert (workdir / "eval" / f"run_fused_{channel}.txt").exists()
    for value in metrics["systems"][f"fused_{channel}"].values():
        assert 0.0 <= value <= 1.0


def test_cli_train_kg_model_flag(tiny_run):
    cfg, workdir = tiny_run
    cfg_path = workdir / "tiny_config.json"
    overrides = json.loads(json.dumps(TINY))
    overrides["paths"] = {"workdir": str(workdir)}
    cfg_path.write_text(json.dumps(overrides))
    assert main(["--config", str(cfg_path), "--quiet", "train-kg",
                 "--model", "transe"]) == 0
    assert (workdir / "kg_embed" / "transe" / "entities.bin").exists()


def test_cli_set_override(tmp_path):
    workdir = tmp_path / "w"
    assert main(["--workdir", str(workdir), "--quiet",
                 "--set", "synth.n_docs=300", "--set", "synth.n_authors=60",
                 "--set", "synth.n_topics=3", "--set", "synth.n_subtopics=3",
                 "--set", "synth.vocab_size=400", "synth"]) == 0
    n_lines = sum(1 for _ in open(workdir / "corpus" / "corpus.jsonl"))
    assert n_lines == 300
