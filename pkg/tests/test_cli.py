"""End-to-end exercises of the command-line interface.

Every test drives ``main(argv)`` directly so exit codes, stdout, stderr and
the files left on disk are all observable without spawning a subprocess.
"""
import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from xrayscreen import __version__
from xrayscreen.cli import main
from xrayscreen.dataset import (MANIFEST_HEADER, Manifest, ingest_image,
                                save_manifest)
from xrayscreen.descriptor import extract_features, HogConfig, load_feature_matrix
from xrayscreen.reduce import LabeledMatrix, fit_pca, save_model
from xrayscreen.synthetic import make_grating_corpus


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(root)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def manifest_line(sample_id, class_label, image_path):
    row = {name: "" for name in MANIFEST_HEADER}
    row.update(sample_id=sample_id, class_label=class_label,
               image_path=image_path)
    return ",".join(row[name] for name in MANIFEST_HEADER)


# ---------------------------------------------------------------------------
# top level


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_command_is_required():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# ingest


def test_ingest_builds_store_and_logs(tiny_manifest_path, tmp_path, capsys):
    out = tmp_path / "store"
    rc = main(["ingest", "--manifest", str(tiny_manifest_path),
               "--out", str(out), "--size", "32"])
    assert rc == 0
    assert f"ingested 24/24 images into {out}" in capsys.readouterr().out

    assert (out / "manifest.csv").is_file()
    assert len(list((out / "images").glob("*.png"))) == 24
    log = json.loads((out / "ingest_log.json").read_text())
    assert log == {"n_requested": 24, "n_ingested": 24, "failures": []}
    spec = json.loads((out / "spec.json").read_text())
    assert spec["command"] == "ingest"
    assert spec["size"] == 32
    assert spec["jobs"] == 1
    assert spec["seed"] is None
    # the recorded size is the size actually written
    any_png = next((out / "images").glob("*.png"))
    assert ingest_image(any_png, (32, 32)).shape == (32, 32)


def test_ingest_rerun_is_byte_identical(tiny_manifest_path, tmp_path):
    out = tmp_path / "store"
    argv = ["ingest", "--manifest", str(tiny_manifest_path),
            "--out", str(out), "--size", "32"]
    assert main(argv) == 0
    first = tree_digest(out)
    assert main(argv) == 0
    assert tree_digest(out) == first


def test_ingest_partial_failure_warns_and_continues(tiny_corpus, tmp_path,
                                                    capsys):
    manifest = tmp_path / "with_ghost.csv"
    entries = [replace(e, image_path=str(tiny_corpus.root / e.image_path))
               for e in tiny_corpus.entries]
    ghost = replace(entries[0], sample_id="ghost",
                    image_path=str(tmp_path / "nowhere.png"))
    save_manifest(Manifest(entries + [ghost]), manifest)

    out = tmp_path / "store"
    rc = main(["ingest", "--manifest", str(manifest), "--out", str(out),
               "--size", "32"])
    captured = capsys.readouterr()
    assert rc == 0
    assert "ingested 24/25" in captured.out
    assert "warning: skipped ghost:" in captured.err
    log = json.loads((out / "ingest_log.json").read_text())
    assert log["n_ingested"] == 24
    assert [f["sample_id"] for f in log["failures"]] == ["ghost"]


def test_ingest_all_failures_exit_1(tmp_path, capsys):
    manifest = tmp_path / "ghosts.csv"
    manifest.write_text(",".join(MANIFEST_HEADER) + "\n"
                        + manifest_line("g1", "covid", "missing1.png") + "\n"
                        + manifest_line("g2", "normal", "missing2.png") + "\n")
    rc = main(["ingest", "--manifest", str(manifest),
               "--out", str(tmp_path / "store")])
    assert rc == 1
    assert "error: all manifest entries failed to ingest" in capsys.readouterr().err


def test_ingest_unreadable_manifest_exits_2(tmp_path, capsys):
    rc = main(["ingest", "--manifest", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path / "store")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_ingest_malformed_manifest_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("just,one,line,of,garbage\n")
    rc = main(["ingest", "--manifest", str(bad),
               "--out", str(tmp_path / "store")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_ingest_flag_beats_config_beats_default(tiny_manifest_path, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"size": 16}))

    out_a = tmp_path / "a"
    assert main(["ingest", "--manifest", str(tiny_manifest_path),
                 "--out", str(out_a), "--config", str(config)]) == 0
    assert json.loads((out_a / "spec.json").read_text())["size"] == 16

    out_b = tmp_path / "b"
    assert main(["ingest", "--manifest", str(tiny_manifest_path),
                 "--out", str(out_b), "--config", str(config),
                 "--size", "8"]) == 0
    assert json.loads((out_b / "spec.json").read_text())["size"] == 8


# ---------------------------------------------------------------------------
# extract


@pytest.fixture(scope="module")
def cli_store(tiny_manifest_path, tmp_path_factory):
    """64x64 store built through the CLI itself."""
    out = tmp_path_factory.mktemp("cli_store")
    assert main(["ingest", "--manifest", str(tiny_manifest_path),
                 "--out", str(out), "--size", "64"]) == 0
    return out


@pytest.fixture(scope="module")
def full_size_store(tmp_path_factory):
    """Four 400x400 images, one per class, at the default working size."""
    root = tmp_path_factory.mktemp("full_corpus")
    make_grating_corpus(root, per_class=1, image_size=400, seed=3)
    out = tmp_path_factory.mktemp("full_store")
    assert main(["ingest", "--manifest", str(root / "manifest.csv"),
                 "--out", str(out)]) == 0
    return out


def test_extract_feature_width(cli_store, tmp_path, capsys):
    out = tmp_path / "features.csv"
    rc = main(["extract", "--store", str(cli_store), "--out", str(out),
               "--cell", "8", "--size", "64"])
    assert rc == 0
    assert "extracted 24 descriptors (576 dims)" in capsys.readouterr().out
    header = out.read_text().splitlines()[0].split(",")
    assert len(header) == (64 // 8) ** 2 * 9 + 3
    fm = load_feature_matrix(out)
    assert fm.values.shape == (24, 576)


def test_extract_defaults_on_full_size_store(full_size_store, tmp_path):
    out = tmp_path / "features.csv"
    assert main(["extract", "--store", str(full_size_store),
                 "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert len(header) == (400 // 16) ** 2 * 9 + 3 == 5628
    spec = json.loads(out.with_name("features.spec.json").read_text())
    assert (spec["cell"], spec["bins"], spec["size"]) == (16, 9, 400)


def test_extract_empty_store_warns(tmp_path, capsys):
    store = tmp_path / "empty_store"
    store.mkdir()
    (store / "manifest.csv").write_text(",".join(MANIFEST_HEADER) + "\n")
    out = tmp_path / "features.csv"
    rc = main(["extract", "--store", str(store), "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 0
    assert "header-only" in captured.err
    assert len(out.read_text().splitlines()) == 1


def test_extract_rerun_is_byte_identical(cli_store, tmp_path):
    out = tmp_path / "features.csv"
    argv = ["extract", "--store", str(cli_store), "--out", str(out),
            "--cell", "16", "--size", "64"]
    assert main(argv) == 0
    first = out.read_bytes()
    sidecar = out.with_name("features.spec.json").read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first
    assert out.with_name("features.spec.json").read_bytes() == sidecar


def test_extract_flag_beats_config(cli_store, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"cell": 8, "size": 64}))

    from_config = tmp_path / "a.csv"
    assert main(["extract", "--store", str(cli_store),
                 "--out", str(from_config), "--config", str(config)]) == 0
    assert len(from_config.read_text().splitlines()[0].split(",")) == 579

    from_flag = tmp_path / "b.csv"
    assert main(["extract", "--store", str(cli_store),
                 "--out", str(from_flag), "--config", str(config),
                 "--cell", "16"]) == 0
    assert len(from_flag.read_text().splitlines()[0].split(",")) == 147


def test_extract_missing_store_exits_2(tmp_path, capsys):
    rc = main(["extract", "--store", str(tmp_path / "absent"),
               "--out", str(tmp_path / "f.csv")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_extract_invalid_cell_exits_2(cli_store, tmp_path, capsys):
    rc = main(["extract", "--store", str(cli_store),
               "--out", str(tmp_path / "f.csv"), "--cell", "0"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# experiment


def test_experiment_unknown_name_is_rejected(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["experiment", "mystery", "--out", str(tmp_path)])
    assert excinfo.value.code == 2


def test_experiment_reports_every_spec_issue(tmp_path, capsys):
    rc = main(["experiment", "early",
               "--manifest", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path / "run"),
               "--seed", "-1", "--k", "1"])
    captured = capsys.readouterr()
    assert rc == 2
    issues = [l for l in captured.err.splitlines() if l.startswith("spec error:")]
    assert len(issues) >= 3
    joined = "\n".join(issues)
    assert "manifest" in joined and "seed" in joined and "k" in joined


def test_experiment_missing_required_field_exits_2(tmp_path, capsys):
    rc = main(["experiment", "early", "--out", str(tmp_path / "run"),
               "--seed", "0"])
    assert rc == 2
    assert "spec error:" in capsys.readouterr().err


def test_experiment_unparseable_spec_file_exits_2(tmp_path, capsys):
    spec = tmp_path / "broken.json"
    spec.write_text("{not json")
    rc = main(["experiment", "early", "--spec", str(spec),
               "--out", str(tmp_path / "run")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_experiment_flag_beats_spec_file_beats_default(tiny_manifest_path,
                                                       tmp_path, capsys):
    spec_file = tmp_path / "run.json"
    spec_file.write_text(json.dumps({
        "manifest": str(tiny_manifest_path),
        "seed": 3,
        "k": 4,
        "image_size": 64,
        "cell_size": 8,
    }))
    out = tmp_path / "run"
    rc = main(["experiment", "early", "--spec", str(spec_file),
               "--out", str(out), "--seed", "9"])
    captured = capsys.readouterr()
    assert rc == 0
    recorded = json.loads((out / "spec.json").read_text())
    assert recorded["seed"] == 9            # flag wins over the file
    assert recorded["k"] == 4               # file wins over the default (10)
    assert recorded["cell_size"] == 8
    assert f"experiment early complete, outputs in {out}" in captured.out
    # the one-screen summary table precedes the completion line
    assert len(captured.out.rstrip().splitlines()) > 1


def test_experiment_replays_from_recorded_spec(tiny_manifest_path, tmp_path,
                                               capsys):
    spec_file = tmp_path / "run.json"
    spec_file.write_text(json.dumps({
        "manifest": str(tiny_manifest_path),
        "seed": 5,
        "k": 3,
        "image_size": 64,
        "cell_sizes": [8, 16],
    }))
    first = tmp_path / "first"
    assert main(["experiment", "cellsize", "--spec", str(spec_file),
                 "--out", str(first)]) == 0
    replay = tmp_path / "replay"
    assert main(["experiment", "cellsize", "--spec", str(first / "spec.json"),
                 "--out", str(replay)]) == 0
    capsys.readouterr()

    assert ((replay / "report.json").read_bytes()
            == (first / "report.json").read_bytes())
    assert ((replay / "report.txt").read_bytes()
            == (first / "report.txt").read_bytes())


# ---------------------------------------------------------------------------
# export-components


@pytest.fixture(scope="module")
def trained_artifacts(cli_store, tmp_path_factory):
    """Feature CSV plus a fitted projection model saved to disk."""
    root = tmp_path_factory.mktemp("artifacts")
    features = root / "features.csv"
    assert main(["extract", "--store", str(cli_store), "--out", str(features),
                 "--cell", "8", "--size", "64"]) == 0
    fm = load_feature_matrix(features)
    model = fit_pca(LabeledMatrix(rows=fm.values, labels=list(fm.labels),
                                  sample_ids=list(fm.sample_ids)),
                    variance_kept=0.95)
    model_path = root / "pca.json"
    save_model(model, model_path)
    return features, model_path, model.output_dim


def test_export_components_writes_cloud(trained_artifacts, tmp_path, capsys):
    features, model_path, _ = trained_artifacts
    out = tmp_path / "cloud.csv"
    rc = main(["export-components", "--model", str(model_path),
               "--train", str(features), "--test", str(features),
               "--out", str(out), "--n", "2"])
    assert rc == 0
    assert "point-cloud rows (2 components)" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == "sample_id,label,split,c1,c2"
    assert len(lines) == 1 + 2 * 24
    spec = json.loads(out.with_name("cloud.spec.json").read_text())
    assert spec["command"] == "export-components"
    assert spec["n"] == 2


def test_export_components_truncation_warns(trained_artifacts, tmp_path,
                                            capsys):
    features, model_path, output_dim = trained_artifacts
    out = tmp_path / "cloud.csv"
    with pytest.warns(UserWarning, match="9999"):
        rc = main(["export-components", "--model", str(model_path),
                   "--train", str(features), "--out", str(out),
                   "--n", "9999"])
    captured = capsys.readouterr()
    assert rc == 0
    assert "warning:" in captured.err
    header = out.read_text().splitlines()[0].split(",")
    assert len(header) == 3 + output_dim


def test_export_components_missing_model_exits_2(trained_artifacts, tmp_path,
                                                 capsys):
    features, _, _ = trained_artifacts
    rc = main(["export-components", "--model", str(tmp_path / "absent.json"),
               "--train", str(features), "--out", str(tmp_path / "c.csv")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")
