import json
import math

import numpy as np
import pytest

from regprompt3d.data import SampleRecord
from regprompt3d.data.manifest import NS_TRAIN, derive_seed
from regprompt3d.harness import (
    MetricsReport,
    RunConfig,
    TrainData,
    accuracy,
    aggregate,
    compute_metrics,
    emit_report,
    harmonic_mean,
    load_config,
    load_report,
    render_table,
    train_prompts,
)
from regprompt3d.harness.cli import main
from regprompt3d.harness.config import parse_value, read_config_file, write_config_file
from regprompt3d.harness.features import TokenCache, labels_for
from regprompt3d.harness.report import curves_csv, validate_report
from regprompt3d.harness.training import NonFiniteLoss

CLASSES = ("cube", "torus")


@pytest.fixture(scope="module")
def micro(tiny_encoder):
    """Six clouds per class for the tiny encoder, plus a matching config."""
    recs = [SampleRecord(c, c, derive_seed(5, NS_TRAIN, ci, i), 128, "train")
            for ci, c in enumerate(CLASSES) for i in range(6)]
    cache = TokenCache(tiny_encoder)
    data = TrainData(cache.get(recs), labels_for(recs, list(CLASSES)), list(CLASSES))
    cfg = RunConfig(classes=CLASSES, epochs=3, depth=2, length=2, shots=None, batch_size=4,
                    n_t=3, seeds=(1,), train_per_class=6, test_per_class=1, n_points=128)
    return data, cfg


# ---------------------------------------------------------------- config


def test_config_defaults_resolve():
    cfg = RunConfig().resolved()
    assert (cfg.epochs, cfg.depth, cfg.length, cfg.mu, cfg.sigma) == (20, 9, 2, 15.0, 1.0)
    wide = RunConfig(kind="cross_domain").resolved()
    assert (wide.epochs, wide.depth, wide.length, wide.mu, wide.sigma) == (50, 12, 4, 37.5, 2.5)
    assert RunConfig(kind="few_shot", schedule="fixed").resolved().mu == 15.0


def test_config_collects_all_errors():
    with pytest.raises(ValueError) as err:
        RunConfig(depth=13, tau=0.0, seeds=(), alpha=-1, classes=("cube", "teapot"))
    msg = str(err.value)
    for part in ("depth", "tau", "seeds", "alpha", "teapot"):
        assert part in msg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        RunConfig.from_dict({"epochz": 3})


def test_config_file_round_trip(tmp_path):
    cfg = RunConfig(kind="few_shot", seeds=(4, 5), mac=False, classes=CLASSES, shots=None, mu=2.0)
    write_config_file(cfg, tmp_path / "run.ini")
    assert load_config(tmp_path / "run.ini") == cfg
    assert RunConfig.from_dict(json.loads(cfg.to_json())) == cfg


def test_config_file_wins_over_flags(tmp_path):
    (tmp_path / "run.ini").write_text("[run]\nepochs = 7\n")
    cfg = load_config(tmp_path / "run.ini", epochs=3, lr=0.01)
    assert cfg.epochs == 7 and cfg.lr == 0.01


def test_config_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_config_file(tmp_path / "missing.ini")
    (tmp_path / "bad.ini").write_text("[other]\nx = 1\n")
    with pytest.raises(ValueError, match=r"\[run\]"):
        read_config_file(tmp_path / "bad.ini")


def test_parse_value_types():
    assert parse_value("seeds", "1, 2,3") == (1, 2, 3)
    assert parse_value("epochs", "auto") is None
    assert parse_value("mac", "off") is False
    assert parse_value("alpha", "2.5") == 2.5
    with pytest.raises(ValueError):
        parse_value("mac", "maybe")
    with pytest.raises(ValueError):
        parse_value("nope", "1")


# ---------------------------------------------------------------- metrics


def test_accuracy_counting():
    assert accuracy([1, 0, 2, 2], [1, 0, 2, 0]) == 75.0
    with pytest.raises(ValueError):
        accuracy([], [])
    with pytest.raises(ValueError):
        accuracy([1, 2], [1])


def test_harmonic_mean_oracles():
    assert round(harmonic_mean(95.03, 55.27), 2) == 69.89
    assert round(harmonic_mean(91.77, 56.47), 2) == 69.92
    assert harmonic_mean(63.0, 63.0) == pytest.approx(63.0)
    assert harmonic_mean(1e-12, 80.0) < 1e-11 and harmonic_mean(0, 0) == 0.0


def test_seed_aggregate():
    agg = aggregate([70, 72, 74])
    assert agg["mean"] == 72.0 and agg["std"] == pytest.approx(math.sqrt(8 / 3))
    assert "std" not in aggregate([5.0])


def test_compute_metrics_groups():
    out = compute_metrics([0, 1, 2, 2], [0, 1, 2, 3], grouping={"base": [0, 1], "new": [2, 3]})
    assert (out["base"], out["new"], out["accuracy"]) == (100.0, 50.0, 75.0)
    assert out["hm"] == pytest.approx(200 / 3)
    with pytest.raises(ValueError, match="outside"):
        compute_metrics([0], [5], class_names=["a", "b"])


# ---------------------------------------------------------------- reports


def fake_report(protocol="base_to_new"):
    stat = {"mean": 80.0, "n": 2, "std": 1.0}
    rows = [{"seed": s, "curves": {"train": [{"epoch": 1, "loss": 1.5, "ce": 1.0, "lr": 0.0025}]}} for s in (1, 2)]
    agg = {name: {"base": stat, "new": stat, "hm": stat} for name in ("zero_shot", "tuned")}
    return MetricsReport(protocol, RunConfig().to_dict(), rows, agg, {"epochs": 20}, {"1": {"total_seconds": 3.0}})


def test_report_round_trip(tmp_path):
    rep = fake_report()
    paths = emit_report(rep, tmp_path / "out")
    back = load_report(tmp_path / "out")
    assert back.to_dict() == rep.to_dict()
    assert json.loads(paths["timing"].read_text()) == rep.wall_clock
    assert "total_seconds" not in paths["json"].read_text()


def test_report_schema_errors():
    d = fake_report().to_dict()
    for broken in ({k: v for k, v in d.items() if k != "aggregate"}, {**d, "extra": 1},
                   {**d, "protocol": "magic"}, {**d, "per_seed": [{"no_seed": 1}]}):
        with pytest.raises(ValueError):
            validate_report(broken)


def test_report_rejects_nan():
    rep = fake_report()
    rep.aggregate["tuned"]["hm"] = {"mean": float("nan"), "n": 1}
    with pytest.raises(ValueError):
        rep.to_json()


def test_curves_csv_rows():
    lines = curves_csv(fake_report()).splitlines()
    assert lines[0].startswith("run,seed,epoch,loss") and len(lines) == 3


def test_ablation_table_shape():
    stat = {"mean": 1.0, "n": 1}
    rows = [{"mac": m, "tdc": t, "mec": e, "base": stat, "new": stat, "hm": stat}
            for m in (False, True) for t in (False, True) for e in (False, True)]
    rep = MetricsReport("ablation", {}, [{"seed": 1}], {"rows": rows})
    body = render_table(rep).splitlines()[2:]
    assert body[0].split() == ["MAC", "TDC", "MEC", "Base", "New", "HM"] and len(body) == 2 + 8


def test_corruption_table_columns():
    stat = {"mean": 1.0, "n": 1}
    kinds = ["add_global", "add_local", "drop_global", "drop_local", "rotate", "scale", "jitter"]
    block = {"clean": stat, "corruptions": {k: stat for k in kinds}, "average": stat}
    rep = MetricsReport("corruption", {}, [{"seed": 1}], {"zero_shot": block, "tuned": block})
    header = render_table(rep).splitlines()[2].split()
    assert header == ["method", "Clean"] + kinds + ["Avg"]


# ---------------------------------------------------------------- training


def test_training_leaves_encoder_untouched(tiny_encoder, micro):
    data, cfg = micro
    before = {k: v.copy() for k, v in tiny_encoder.state_arrays().items()}
    res = train_prompts(tiny_encoder, data, cfg, seed=1)
    for k, v in tiny_encoder.state_arrays().items():
        assert np.array_equal(v, before[k]), k
    assert res.steps == 3 * 3 and len(res.history) == 3
    assert all(t.grad is None for t in tiny_encoder.parameters())


def test_training_is_deterministic(tiny_encoder, micro):
    data, cfg = micro
    a, b = train_prompts(tiny_encoder, data, cfg, seed=2), train_prompts(tiny_encoder, data, cfg, seed=2)
    assert np.array_equal(a.prompts.flat(), b.prompts.flat())
    strip = lambda h: [{k: v for k, v in r.items() if k != "seconds"} for r in h]  # noqa: E731
    assert strip(a.history) == strip(b.history)


def test_mac_off_equals_zero_weights(tiny_encoder, micro):
    data, cfg = micro
    off = train_prompts(tiny_encoder, data, cfg.with_overrides(mac=False), seed=1)
    zero = train_prompts(tiny_encoder, data, cfg.with_overrides(alpha=0.0, beta=0.0, gamma=0.0), seed=1)
    assert np.array_equal(off.prompts.flat(), zero.prompts.flat())
    assert [r["ce"] for r in off.history] == [r["ce"] for r in zero.history]


def test_regulation_changes_prompts(tiny_encoder, micro):
    data, cfg = micro
    zero = train_prompts(tiny_encoder, data, cfg.with_overrides(alpha=0.0, beta=0.0, gamma=0.0), seed=1)
    rc = train_prompts(tiny_encoder, data, cfg, seed=1)
    assert not np.allclose(zero.prompts.flat(), rc.prompts.flat())


def test_mec_changes_eval_params(tiny_encoder, micro):
    data, cfg = micro
    res = train_prompts(tiny_encoder, data, cfg, seed=1)
    assert not np.array_equal(res.prompts.flat(), res.last.flat())
    plain = train_prompts(tiny_encoder, data, cfg.with_overrides(mec=False), seed=1)
    assert np.array_equal(plain.prompts.flat(), plain.last.flat())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_names_term(tiny_encoder, micro):
    data, cfg = micro
    with pytest.raises(NonFiniteLoss) as err:
        train_prompts(tiny_encoder, data, cfg.with_overrides(tau=1e-310), seed=1)
    assert err.value.term == "ce" and err.value.step == 0


def test_training_needs_frozen_encoder(vocab, micro):
    from regprompt3d.encoders import DualEncoder

    from conftest import TINY

    data, cfg = micro
    with pytest.raises(ValueError, match="frozen"):
        train_prompts(DualEncoder.init(TINY, vocab), data, cfg, seed=1)


# ---------------------------------------------------------------- CLI


def test_cli_gen_data_and_report(tmp_path, capsys):
    out = tmp_path / "data"
    code = main(["gen-data", "--out", str(out), "--classes", "cube,torus,cone", "--train-per-class", "5",
                 "--test-per-class", "2", "--n-points", "64", "--shots", "auto"])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.json", "descriptions.txt", "test_base.jsonl", "test_new.jsonl", "train.jsonl",
                     "val.jsonl"]
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["shots"] is None and cfg["epochs"] == 20

    emit_report(fake_report(), tmp_path / "rep")
    capsys.readouterr()
    assert main(["report", str(tmp_path / "rep")]) == 0
    assert "HM" in capsys.readouterr().out


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    assert main(["gen-data", "--out", str(tmp_path), "--tau", "-1"]) == 2
    assert "tau" in capsys.readouterr().err


def test_cli_config_file(tmp_path):
    (tmp_path / "run.ini").write_text("[run]\nclasses = cube,cone\ntrain_per_class = 5\nshots = auto\n"
                                      "test_per_class = 1\nn_points = 64\n")
    assert main(["gen-data", "--out", str(tmp_path / "d"), "--config", str(tmp_path / "run.ini"),
                 "--classes", "sphere,torus"]) == 0
    assert json.loads((tmp_path / "d" / "config.json").read_text())["classes"] == ["cube", "cone"]
