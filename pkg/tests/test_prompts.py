import numpy as np
import pytest

from regprompt3d.autodiff import Tensor, backward, cross_entropy
from regprompt3d.data import gen_shape
from regprompt3d.encoders import class_logits
from regprompt3d.prompts import PromptSet, init_prompt_set, inject_prompts, prompt_key_mask, prompt_slot

from conftest import TINY


def test_parameter_count_default():
    assert init_prompt_set(9, 2, 2, 64, seed=0).n_parameters() == 2304


def test_cross_dataset_shape_constructs():
    ps = init_prompt_set(12, 4, 4, 64, seed=0)
    assert ps.depth == 12 and ps.point_length == 4 and ps.text_length == 4


def test_same_seed_bit_identical():
    a, b = init_prompt_set(9, 2, 2, 64, seed=7), init_prompt_set(9, 2, 2, 64, seed=7)
    assert np.array_equal(a.flat(), b.flat())
    assert not np.array_equal(a.flat(), init_prompt_set(9, 2, 2, 64, seed=8).flat())


@pytest.mark.parametrize("depth", [0, 13])
def test_depth_out_of_range(depth):
    with pytest.raises(ValueError, match="depth"):
        init_prompt_set(depth, 2, 2, 64, seed=0)


def test_encoder_rejects_depth_beyond_blocks(tiny_encoder):
    ps = init_prompt_set(TINY.n_blocks + 1, 2, 2, TINY.dim, seed=0)
    toks = np.zeros((1, 1 + TINY.n_patches, TINY.dim))
    with pytest.raises(ValueError, match="exceeds"):
        tiny_encoder.encode_points(toks, ps)


def test_flat_round_trip():
    ps = init_prompt_set(3, 2, 2, 8, seed=0)
    v = ps.flat() * 2
    ps.load_flat(v)
    assert np.array_equal(ps.flat(), v)
    with pytest.raises(ValueError):
        ps.load_flat(v[:-1])


def test_snapshot_is_independent():
    ps = init_prompt_set(2, 1, 1, 4, seed=0)
    snap = ps.snapshot()
    ps.point[0].data += 1
    assert not np.array_equal(snap.flat(), ps.flat())


# ---------------------------------------------------------------- layout


def test_point_sequence_length_every_layer():
    ps = init_prompt_set(9, 2, 2, 64, seed=0)
    x = Tensor(np.zeros((2, 33, 64)))
    for layer in range(12):
        x = inject_prompts(x, layer, ps.point, "point", base_len=33)
        assert x.shape == (2, 35, 64)


def test_text_sequence_length(vocab):
    seq = vocab.encode("a point cloud of a cube.", "cube")  # v = 5 words
    ps = init_prompt_set(9, 2, 2, 64, seed=0)
    x = inject_prompts(Tensor(np.zeros((1, len(seq), 64))), 0, ps.text, "text", base_len=len(seq))
    assert x.shape[1] == 10


def test_slots_positions():
    assert prompt_slot(33, "point") == 33
    assert prompt_slot(8, "text") == 7
    np.testing.assert_array_equal(prompt_key_mask(4, 2, "text"), [0, 0, 0, 1, 1, 0])
    with pytest.raises(ValueError):
        prompt_slot(3, "audio")


def test_deep_replacement_and_passthrough(rng):
    ps = init_prompt_set(2, 2, 2, 4, seed=0, n_blocks=4)
    base = Tensor(rng.normal(size=(1, 5, 4)))
    x0 = inject_prompts(base, 0, ps.text, "text", base_len=5, n_blocks=4)
    # text prompts sit between the class token and eos
    np.testing.assert_array_equal(x0.data[0, 4:6], ps.text[0].data)
    np.testing.assert_array_equal(x0.data[0, 6], base.data[0, 4])
    carried = Tensor(rng.normal(size=(1, 7, 4)))
    x1 = inject_prompts(carried, 1, ps.text, "text", base_len=5, n_blocks=4)
    np.testing.assert_array_equal(x1.data[0, 4:6], ps.text[1].data)
    np.testing.assert_array_equal(x1.data[0, :4], carried.data[0, :4])
    x2 = inject_prompts(carried, 2, ps.text, "text", base_len=5, n_blocks=4)
    assert x2 is carried


def test_no_prompts_equals_frozen(tiny_encoder):
    toks = np.stack([tiny_encoder.embed_point_patches(gen_shape("cube", 1, 256).points).tokens()])
    empty = PromptSet(depth=0)
    assert np.array_equal(tiny_encoder.encode_points(toks, empty).data, tiny_encoder.encode_points(toks).data)


def test_only_prompts_receive_gradients(tiny_encoder):
    ps = init_prompt_set(2, 2, 2, TINY.dim, seed=0, n_blocks=TINY.n_blocks)
    toks = np.stack([tiny_encoder.embed_point_patches(gen_shape(f, 0, 256).points).tokens()
                     for f in ("cube", "torus")])
    seqs = [tiny_encoder.vocab.encode(f"a point cloud of a {c}.", c) for c in ("cube", "torus")]
    logits = class_logits(tiny_encoder.encode_points(toks, ps), tiny_encoder.encode_text(seqs, ps), 0.01)
    backward(cross_entropy(logits, np.array([0, 1])))
    assert all(t.grad is not None and np.any(t.grad != 0) for t in ps.tensors())
    assert all(t.grad is None for t in tiny_encoder.parameters())
