"""End-to-end acceptance checks, one test per criterion.

Each test records (passed, detail) in ``conftest.ACCEPTANCE`` before
asserting, so the terminal summary prints one PASS/FAIL line per criterion
even when a check fails.
"""

import time
from dataclasses import replace

import numpy as np

from regprompt3d.autodiff import finite_diff_check
from regprompt3d.data import KINDS, CorruptionSpec, DatasetSpec, build_dataset, corrupt, gen_shape
from regprompt3d.data.splits import sample_few_shot, split_base_new
from regprompt3d.encoders import DualEncoder
from regprompt3d.harness import RunConfig, compute_metrics, run_benchmark, train_prompts
from regprompt3d.harness.benchmark import build_split, train_data
from regprompt3d.harness.cli import main
from regprompt3d.harness.features import canonical_sequences, point_features
from regprompt3d.harness.metrics import pooled_std
from regprompt3d.harness.training import TrainData, frozen_reference, step_loss
from regprompt3d.prompts import PromptSet, init_prompt_set
from regprompt3d.regulation import EnsembleAccumulator, gaussian_weights

from conftest import ACCEPTANCE, TINY
from test_autodiff import _primitive_cases
from test_data import _assert_no_leak, hand_records


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, detail


# ---------------------------------------------------------------- 1 gradients


def _full_loss_case(vocab, seed):
    """Regulated loss on a 2-class micro model; prompts are the only leaves."""
    enc = DualEncoder.init(TINY, vocab, seed=seed).freeze()
    classes = ["cube", "torus"]
    clouds = [gen_shape(c, seed * 10 + i, 128).points for i, c in enumerate(classes)]
    tokens = np.stack([enc.embed_point_patches(p).tokens() for p in clouds])
    labels = np.array([0, 1])
    cfg = RunConfig(classes=tuple(classes), depth=1, length=1, n_t=3, tau=0.1, shots=None).resolved()
    data = TrainData(tokens, labels, classes)
    ref = frozen_reference(enc, data, cfg)
    prompts = init_prompt_set(1, 1, 1, TINY.dim, seed=seed, n_blocks=TINY.n_blocks, std=0.3)
    seqs = canonical_sequences(enc, classes)
    idx = np.arange(2)

    def fn():
        return step_loss(enc, prompts, tokens, labels, seqs, cfg, ref, idx)[0]

    return fn, prompts.tensors()


def test_criterion_1_gradient_oracle(vocab):
    t0 = time.perf_counter()
    worst_prim, worst_full, failures = 0.0, 0.0, []
    for seed in range(20):
        for name, (fn, params) in _primitive_cases(np.random.default_rng(1000 + seed)).items():
            rep = finite_diff_check(fn, params, tol=1e-4)
            worst_prim = max(worst_prim, rep.max_error)
            if not rep.passed:
                failures.append(f"{name}@{seed}")
        rep = finite_diff_check(*_full_loss_case(vocab, seed), tol=1e-3)
        worst_full = max(worst_full, rep.max_error)
        if not rep.passed:
            failures.append(f"full@{seed}")
    secs = time.perf_counter() - t0
    ok = not failures and secs < 60
    record(1, ok, f"20 seeds, max rel err primitives {worst_prim:.1e}, full loss {worst_full:.1e}, "
                  f"{secs:.1f}s, failures {failures or 'none'}")


# ---------------------------------------------------------------- 2 MEC


def test_criterion_2_mec_streaming():
    worst, sums = 0.0, 0.0
    for e in (1, 3, 20, 50):
        for seed in range(5):
            rng = np.random.default_rng([e, seed])
            mu, sigma = rng.uniform(0.5, e + 0.5), rng.uniform(0.1, e)
            traj = np.cumsum(rng.normal(size=(e, 40)), axis=0)
            acc = EnsembleAccumulator(40, e, mu, sigma)
            for i, theta in enumerate(traj, start=1):
                acc.accumulate(theta, i)
            w = gaussian_weights(e, mu, sigma)
            worst = max(worst, float(np.abs(acc.finalize() - (w[:, None] * traj).sum(0)).max()))
            sums = max(sums, abs(w.sum() - 1))
    w15 = gaussian_weights(20, 15, 1)[14]
    ok = worst <= 1e-12 and sums <= 1e-12 and abs(w15 - 0.39894) <= 1e-4
    record(2, ok, f"stream-vs-batch max diff {worst:.1e}, weight-sum err {sums:.1e}, w15 {w15:.5f}")


# ---------------------------------------------------------------- 3 HM


def _grouped_predictions(base_correct, new_correct, n=10000):
    labels = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    pred = labels.copy()
    pred[base_correct:n] = 1
    pred[n + new_correct:] = 0
    return pred, labels


def test_criterion_3_hm_oracle():
    got = []
    for b, n in ((9503, 5527), (9177, 5647)):
        m = compute_metrics(*_grouped_predictions(b, n), grouping={"base": [0], "new": [1]})
        got.append(round(m["hm"], 2))
    record(3, got == [69.89, 69.92], f"HM values {got}")


# ---------------------------------------------------------------- 4 splits


def test_criterion_4_split_oracles():
    counts = {}
    for c in (40, 15, 16):
        sp = split_base_new([f"c{i:02d}" for i in range(c)], hand_records(c))
        counts[c] = (len(sp.base_classes), len(sp.new_classes))
    leaks = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 41))
        try:
            _assert_no_leak(split_base_new([f"c{i:02d}" for i in rng.permutation(c)], hand_records(c), seed=seed))
        except AssertionError:
            leaks += 1
    ok = counts == {40: (20, 20), 15: (8, 7), 16: (8, 8)} and leaks == 0
    record(4, ok, f"base/new counts {counts}, leaking manifests {leaks}/100")


# ---------------------------------------------------------------- 5 zero-shot equivalence


def test_criterion_5_zero_shot_equivalence(surrogate, surrogate_cache):
    cfg = RunConfig(kind="few_shot", classes=("cone", "sphere"), epochs=3, seeds=(1,), track_val=False).resolved()
    split = sample_few_shot(build_split(cfg), 16, 1)
    tokens = surrogate_cache.get(split.manifests["test"])
    plain = surrogate.encode_points(tokens).data
    empty = surrogate.encode_points(tokens, PromptSet(depth=0)).data
    masked = surrogate.encode_points(tokens, init_prompt_set(9, 2, 2, 64, seed=0), mask_prompts=True).data
    seqs = canonical_sequences(surrogate, cfg.classes)
    text_same = np.array_equal(surrogate.encode_text(seqs).data, surrogate.encode_text(seqs, PromptSet(0)).data)
    before = {k: v.copy() for k, v in surrogate.state_arrays().items()}
    train_prompts(surrogate, train_data(surrogate_cache, split, cfg), cfg, seed=1)
    changed = [k for k, v in surrogate.state_arrays().items() if not np.array_equal(v, before[k])]
    masked_err = float(np.abs(masked - plain).max())
    ok = np.array_equal(plain, empty) and text_same and not changed and masked_err < 1e-12
    record(5, ok, f"prompts-off bitwise equal {np.array_equal(plain, empty) and text_same}, masked-prompt "
                  f"max diff {masked_err:.1e}, frozen tensors changed by training: {len(changed)}")


# ---------------------------------------------------------------- 6 RC vs no RC


def test_criterion_6_regulation_preserves_new(surrogate, surrogate_cache):
    t0 = time.perf_counter()
    base_cfg = RunConfig(seeds=(1, 2, 3), track_val=False)
    rc = run_benchmark(base_cfg, surrogate, surrogate_cache).aggregate["tuned"]
    plain = run_benchmark(replace(base_cfg, mac=False, tdc=False, mec=False), surrogate,
                          surrogate_cache).aggregate["tuned"]
    new_margin = rc["new"]["mean"] - plain["new"]["mean"]
    hm_margin = rc["hm"]["mean"] - plain["hm"]["mean"]
    new_ok = new_margin > pooled_std(rc["new"], plain["new"])
    hm_ok = hm_margin > pooled_std(rc["hm"], plain["hm"])

    def fmt(s):
        return f"{s['mean']:.2f}±{s.get('std', 0):.2f}"

    record(6, new_ok and hm_ok,
           f"New RC {fmt(rc['new'])} vs no-RC {fmt(plain['new'])} ({'ok' if new_ok else 'miss'}); "
           f"HM RC {fmt(rc['hm'])} vs no-RC {fmt(plain['hm'])} ({'ok' if hm_ok else 'miss'}); "
           f"Base RC {fmt(rc['base'])} vs no-RC {fmt(plain['base'])}; {time.perf_counter() - t0:.0f}s")


# ---------------------------------------------------------------- 7 MAC anchoring


def test_criterion_7_mac_anchoring(surrogate, surrogate_cache):
    rep = run_benchmark(RunConfig(alpha=1e4, beta=1e4, seeds=(1,), track_val=False), surrogate, surrogate_cache)
    row = rep.per_seed[0]
    terms = row["final_terms"]
    gap = abs(row["tuned"]["new"] - row["zero_shot"]["new"])
    terms_ok = terms["L_p"] < 1e-2 and terms["L_t"] < 1e-2
    record(7, terms_ok and gap <= 2.0,
           f"final L_p {terms['L_p']:.3f}, L_t {terms['L_t']:.3f} (target < 1e-2: {'ok' if terms_ok else 'miss'}); "
           f"New {row['tuned']['new']:.2f} vs zero-shot {row['zero_shot']['new']:.2f} (gap {gap:.2f} <= 2: "
           f"{'ok' if gap <= 2 else 'miss'})")


# ---------------------------------------------------------------- 8 corruptions


def test_criterion_8_corruption_protocol(surrogate, surrogate_cache):
    pc = gen_shape("torus", 3, 1024)
    identity = all(np.array_equal(corrupt(pc, CorruptionSpec(k, 0, seed=5)).points, pc.points) for k in KINDS)
    dropped = corrupt(pc, CorruptionSpec("drop_global", 2, seed=5)).n_points
    rot = corrupt(pc, CorruptionSpec("rotate", 4, seed=5)).points
    d0 = np.sqrt(((pc.points[:, None] - pc.points[None]) ** 2).sum(-1))
    d1 = np.sqrt(((rot[:, None] - rot[None]) ** 2).sum(-1))
    iso = float(np.abs(d0 - d1).max())

    probe = [r for r in build_dataset(DatasetSpec(train_per_class=0, test_per_class=4)) if r.split == "test"]
    clean = point_features(surrogate, surrogate_cache.get(probe))
    curves = {}
    for kind in KINDS:
        drift = [0.0]
        for s in range(1, 5):
            feats = point_features(surrogate, surrogate_cache.get([replace(r, corruption=kind, severity=s)
                                                                   for r in probe]))
            drift.append(float(np.linalg.norm(feats - clean, axis=1).mean()))
        curves[kind] = drift
    monotone = [k for k, d in curves.items() if np.all(np.diff(d) >= 0)]
    ok = identity and dropped == 768 and iso <= 1e-9 and len(monotone) == len(KINDS)
    record(8, ok, f"severity-0 identity {identity}, drop_global keeps {dropped}, rotate dist err {iso:.1e}, "
                  f"monotone drift {len(monotone)}/{len(KINDS)} kinds on {len(probe)} probe clouds")


# ---------------------------------------------------------------- 9 overfit


def test_criterion_9_overfit_sanity(surrogate, surrogate_cache):
    cfg = RunConfig(kind="few_shot", classes=("cube", "cuboid"), shots=16, epochs=20, mac=False, tdc=False,
                    mec=False, seeds=(1,), track_val=False).resolved()
    split = sample_few_shot(build_split(cfg), 16, 1)
    res = train_prompts(surrogate, train_data(surrogate_cache, split, cfg), cfg, seed=1)
    ce = res.final_terms["ce"]
    record(9, ce < 0.1, f"2-class 16-shot train CE after 20 epochs {ce:.4f} (epoch-1 mean {res.history[0]['ce']:.3f})")


# ---------------------------------------------------------------- 10 determinism


def test_criterion_10_byte_identical_reports(tmp_path, surrogate):
    args = ["benchmark", "base-to-new", "--classes", "cone,cube,sphere,torus", "--train-per-class", "10",
            "--test-per-class", "4", "--shots", "4", "--epochs", "3", "--seeds", "1,2"]
    outs = []
    for i in range(2):
        assert main(args + ["--out", str(tmp_path / f"run{i}")]) == 0
        outs.append({name: (tmp_path / f"run{i}" / name).read_bytes()
                     for name in ("report.json", "report.txt", "losses.csv")})
    same = [name for name in outs[0] if outs[0][name] == outs[1][name]]
    record(10, len(same) == 3, f"identical files across two CLI runs: {same}")
