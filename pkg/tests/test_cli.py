import json

import numpy as np
import pytest

from catalogs import table1_catalogs
from unpaired_vsn.cli import RunConfig, main, parse_seeds
from unpaired_vsn.core import read_annotation, read_features, write_manifest
from unpaired_vsn.network import init_params, load_networks

SMALL_NET = ["--network.encoder_channels=4,4", "--network.encoder_depth=2"]


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("UVSN_OUTPUT_ROOT", str(tmp_path / "runs"))
    return tmp_path / "runs"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    synth = root / "synth"
    args = ["gen-synth", "--out", str(synth), "--n-videos", "12", "--seed", "3",
            "--synth.T_range=40,60", "--synth.n_segments_range=4,6", "--synth.D=6"]
    assert main(args) == 0
    splits = root / "splits"
    assert main(["make-splits", "--dataset", f"s={synth / 'catalog.tsv'}", "--target", "s",
                 "--seed", "0", "--out", str(splits)]) == 0
    return {"root": root, "synth": synth, "train": splits / "train.tsv", "test": splits / "test.tsv"}


@pytest.fixture(scope="module")
def trained(corpus):
    out = corpus["root"] / "train"
    code = main(["train", "--train-manifest", str(corpus["train"]), "--epochs", "1", "--seeds", "1..2",
                 "--out", str(out), *SMALL_NET])
    assert code == 0
    return out


def test_parse_seeds():
    assert parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert parse_seeds("3,7") == [3, 7]
    with pytest.raises(ValueError):
        parse_seeds("5..1")


def test_make_splits_table1(tmp_path, capsys):
    cats = table1_catalogs(tmp_path / "data")
    dataset_args = []
    for name, m in cats.items():
        write_manifest(tmp_path / f"{name}.tsv", m.records)
        dataset_args += ["--dataset", f"{name}={tmp_path / name}.tsv"]
    assert main(["make-splits", *dataset_args, "--target", "summe", "--mode", "standard", "--seed", "1",
                 "--out", str(tmp_path / "a")]) == 0
    assert capsys.readouterr().out.strip() == "raw=80 summary=79 test=5"
    assert main(["make-splits", *dataset_args, "--target", "summe", "--mode", "transfer",
                 "--out", str(tmp_path / "b")]) == 0
    assert "test=25" in capsys.readouterr().out
    report = json.loads((tmp_path / "b" / "split.json").read_text())
    assert report["config"]["split"]["mode"] == "transfer" and len(report["test_ids"]) == 25
    assert main(["make-splits", *dataset_args, "--target", "summe", "--psup-fraction", "0.1",
                 "--out", str(tmp_path / "c")]) == 0
    assert "paired=8" in capsys.readouterr().out


def test_make_splits_usage_errors(tmp_path, corpus):
    cat = f"s={corpus['synth'] / 'catalog.tsv'}"
    assert main(["make-splits", "--dataset", cat, "--out", str(tmp_path)]) == 2
    assert main(["make-splits", "--dataset", cat, "--target", "s", "--mode", "sideways"]) == 2
    assert main(["make-splits", "--dataset", "nofile", "--target", "s"]) == 2
    assert main(["make-splits", "--dataset", f"s={tmp_path / 'missing.tsv'}", "--target", "s"]) == 1


def test_unknown_setting_and_config_file(tmp_path, corpus):
    assert main(["segment", "--manifest", str(corpus["test"]), "--eval.nope=1"]) == 2
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\neval.budget_ratio = 0.2\n")
    assert main(["segment", "--config", str(cfg), "--manifest", str(corpus["test"]), "--out", str(tmp_path / "s.json")]) == 0
    cfg.write_text("eval.bogus = 3\n")
    assert main(["segment", "--config", str(cfg), "--manifest", str(corpus["test"])]) == 2
    assert main(["no-such-command"]) == 2


def test_config_layering():
    cfg = RunConfig()
    cfg.set("train.beta", "0.5")
    assert cfg.train(0).weights.beta == 0.5
    cfg.set("train.beta", "auto")
    cfg.set("split.target", "tvsum")
    assert cfg.train(0).weights.beta == 0.001


def test_train_multi_seed(trained):
    report = json.loads((trained / "train_report.json").read_text())
    assert [r["seed"] for r in report["runs"]] == [1, 2]
    assert report["config"]["train"]["selector_lr"] == 1e-5 and report["config"]["train"]["gamma"] == 0.001
    for s in (1, 2):
        assert (trained / f"seed_{s}" / "final.uvsc").exists()
        lines = (trained / f"seed_{s}" / "metrics.jsonl").read_text().splitlines()
        assert lines and all("d_real_score" in json.loads(l) for l in lines)


def test_train_sumfcn_has_no_discriminator_fields(tmp_path, corpus):
    out = tmp_path / "t"
    assert main(["train", "--train-manifest", str(corpus["train"]), "--preset", "sumfcn_unsup",
                 "--epochs", "1", "--out", str(out), *SMALL_NET]) == 0
    for line in (out / "seed_0" / "metrics.jsonl").read_text().splitlines():
        rec = json.loads(line)
        assert "d_real_score" not in rec and "d_fake_score" not in rec


def test_train_zero_epochs_is_init(tmp_path, corpus):
    out = tmp_path / "t"
    assert main(["train", "--train-manifest", str(corpus["train"]), "--epochs", "0", "--seeds", "4",
                 "--out", str(out), *SMALL_NET]) == 0
    sel, disc, _ = load_networks(out / "seed_4" / "final.uvsc")
    ref_sel, ref_disc = init_params(sel.config, 4)
    for a, b in ((sel, ref_sel), (disc, ref_disc)):
        sa, sb = a.state_dict(), b.state_dict()
        assert sa.keys() == sb.keys() and all(np.array_equal(sa[k], sb[k]) for k in sa)


def test_train_bad_preset(tmp_path, corpus):
    assert main(["train", "--train-manifest", str(corpus["train"]), "--preset", "magic", "--out", str(tmp_path)]) == 2


def test_train_numeric_abort(tmp_path, corpus):
    code = main(["train", "--train-manifest", str(corpus["train"]), "--epochs", "1", "--out", str(tmp_path),
                 "--train.selector_lr=1e30", "--train.discriminator_lr=1e30", "--train.clip_norm=none", *SMALL_NET])
    assert code == 1


def test_evaluate_rows_and_mean(tmp_path, corpus, trained, capsys):
    ckpts = [str(trained / f"seed_{s}" / "final.uvsc") for s in (1, 2)]
    report_path = tmp_path / "r.json"
    assert main(["evaluate", "--checkpoint", *ckpts, "--test-manifest", str(corpus["test"]),
                 "--report", str(report_path), "--baseline-seeds", "1..2"]) == 0
    out = capsys.readouterr().out
    assert "seed=1" in out and "seed=2" in out and "mean" in out
    rep = json.loads(report_path.read_text())
    assert len(rep["runs"]) == 2
    assert rep["mean"]["F"] == pytest.approx(np.mean([r["F"] for r in rep["runs"]]), abs=1e-4)
    assert rep["config"]["eval"]["budget_ratio"] == 0.15
    assert len(rep["random_baseline"]["runs"]) == 2

    assert main(["evaluate", "--checkpoint", ckpts[0], "--test-manifest", str(corpus["test"]),
                 "--report", str(report_path)]) == 0
    rep = json.loads(report_path.read_text())
    assert {k: rep["mean"][k] for k in "PRF"} == {k: rep["runs"][0][k] for k in "PRF"}


def test_evaluate_default_report_location(corpus, trained, output_root):
    assert main(["evaluate", "--checkpoint", str(trained / "seed_1" / "final.uvsc"),
                 "--test-manifest", str(corpus["test"])]) == 0
    assert (output_root / "evaluate" / "report.json").exists()


def test_evaluate_tampered_checkpoint(tmp_path, corpus, trained):
    bad = tmp_path / "bad.uvsc"
    data = bytearray((trained / "seed_1" / "final.uvsc").read_bytes())
    data[:4] = b"XXXX"
    bad.write_bytes(bytes(data))
    assert main(["evaluate", "--checkpoint", str(bad), "--test-manifest", str(corpus["test"])]) == 1
    assert main(["evaluate", "--checkpoint", str(tmp_path / "none.uvsc"), "--test-manifest", str(corpus["test"])]) == 1


def test_summarize_budget_and_determinism(tmp_path, corpus, trained):
    ckpt = str(trained / "seed_1" / "final.uvsc")
    outs = []
    for name in ("a", "b"):
        assert main(["summarize", "--checkpoint", ckpt, "--manifest", str(corpus["test"]), "--out", str(tmp_path / name)]) == 0
        outs.append(tmp_path / name)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files and files == sorted(p.name for p in outs[1].iterdir())
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        if name.endswith(".uvsa"):
            mask = read_annotation(outs[0] / name)
            assert mask.shape[0] == 1
            assert mask.sum() <= int(np.floor(0.15 * mask.shape[1]))
    side = json.loads((outs[0] / files[0]).read_text()) if files[0].endswith(".json") else None
    assert side is None or {"keyframes", "boundaries", "config"} <= side.keys()


def test_summarize_zero_noise_boundaries(tmp_path, trained):
    synth = tmp_path / "clean"
    assert main(["gen-synth", "--out", str(synth), "--n-videos", "4", "--seed", "5", "--synth.noise_sigma=0",
                 "--synth.T_range=40,60", "--synth.n_segments_range=4,6", "--synth.D=6"]) == 0
    feats = sorted((synth / "features").glob("*.uvsn"))
    out = tmp_path / "sum"
    # at coefficient 1 a 3-frame planted segment can cost less to merge than to keep
    assert main(["summarize", "--checkpoint", str(trained / "seed_1" / "final.uvsc"), "--eval.kts_penalty_coeff=0.5",
                 "--features", *map(str, feats), "--out", str(out)]) == 0
    for f in feats:
        vid = read_features(f).video_id
        truth = json.loads((synth / "truth" / f"{vid}.truth.json").read_text())
        side = json.loads((out / f"{vid}.summary.json").read_text())
        assert side["boundaries"] == truth["boundaries"]


def test_summarize_dimension_mismatch(tmp_path, corpus, trained):
    synth = tmp_path / "wide"
    assert main(["gen-synth", "--out", str(synth), "--n-videos", "1", "--synth.T_range=40,40",
                 "--synth.n_segments_range=4,4", "--synth.D=9"]) == 0
    feat = next((synth / "features").glob("*.uvsn"))
    assert main(["summarize", "--checkpoint", str(trained / "seed_1" / "final.uvsc"), "--features", str(feat),
                 "--out", str(tmp_path / "o")]) == 1


def test_segment_json(tmp_path, corpus, capsys):
    assert main(["segment", "--manifest", str(corpus["test"])]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"]["kts"]["penalty_coeff"] == 1.0
    for v in rep["videos"]:
        assert v["boundaries"][0] == 0 and v["boundaries"][-1] == v["T"]
    assert main(["segment"]) == 2


def test_inspect(corpus, trained, capsys):
    feat = next((corpus["synth"] / "features").glob("*.uvsn"))
    assert main(["inspect", str(feat)]) == 0
    assert json.loads(capsys.readouterr().out)["D"] == 6
    assert main(["inspect", str(trained / "seed_1" / "final.uvsc")]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "checkpoint"
    assert main(["inspect", str(corpus["train"])]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "manifest"


def test_output_root_env(corpus, output_root):
    assert main(["train", "--train-manifest", str(corpus["train"]), "--epochs", "0", *SMALL_NET]) == 0
    assert (output_root / "train" / "seed_0" / "final.uvsc").exists()


def test_parallel_matches_sequential(tmp_path, corpus, trained):
    out = tmp_path / "par"
    assert main(["train", "--train-manifest", str(corpus["train"]), "--epochs", "1", "--seeds", "1..2",
                 "--parallel", "2", "--out", str(out), *SMALL_NET]) == 0
    for s in (1, 2):
        a = (out / f"seed_{s}" / "metrics.jsonl").read_bytes()
        assert a == (trained / f"seed_{s}" / "metrics.jsonl").read_bytes()
