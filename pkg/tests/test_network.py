import numpy as np
import pytest

from ivfuse.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from ivfuse.errors import (CheckpointFormatError, CheckpointSchemaError,
                           ConfigError, ShapeError)
from ivfuse.network import (LAYER_SPECS, FeedbackConfig, ModelParams,
                            PreFusionConfig, decode, encode, fuse_add,
                            fuse_images, init_params, pre_fuse, rdb_forward)
from ivfuse.tensor import Tensor, tile_channels

# Architecture table: kernel size, in channels, out channels, activation.
EXPECTED_LAYERS = {
    "encoder.c1": (3, 1, 16, True),
    "encoder.rdb.conv1": (3, 16, 16, True),
    "encoder.rdb.conv2": (3, 32, 16, True),
    "encoder.rdb.conv3": (3, 48, 16, True),
    "encoder.rdb.conv4": (1, 64, 64, False),
    "decoder.c2": (3, 64, 64, True),
    "decoder.c3": (3, 64, 32, True),
    "decoder.c4": (3, 32, 16, True),
    "decoder.c5": (3, 16, 1, False),
    "decoder.c6": (3, 1, 64, False),
}


def zero_params(dtype=np.float64):
    tensors = {}
    for layer, (cout, cin, kh, kw, _) in LAYER_SPECS.items():
        tensors[layer + ".weight"] = Tensor(np.zeros((cout, cin, kh, kw), dtype))
        tensors[layer + ".bias"] = Tensor(np.zeros(cout, dtype))
    return ModelParams(tensors)


def rand_image(seed, side=16):
    return np.random.default_rng(seed).uniform(0.0, 1.0, (side, side))


def test_layer_table_matches_architecture():
    assert set(LAYER_SPECS) == set(EXPECTED_LAYERS)
    for name, (k, cin, cout, relu_after) in EXPECTED_LAYERS.items():
        got_cout, got_cin, kh, kw, got_relu = LAYER_SPECS[name]
        assert (kh, kw) == (k, k)
        assert (got_cin, got_cout) == (cin, cout)
        assert got_relu == relu_after


# -------------------------------------------------------------- pre_fuse

def test_pre_fuse_a1_one_is_identity():
    ir, vis = rand_image(0), rand_image(1)
    iw, vw = pre_fuse(ir, vis, PreFusionConfig(1.0))
    assert np.array_equal(iw, ir)
    assert np.array_equal(vw, vis)


def test_pre_fuse_a1_half_is_symmetric_mean():
    ir, vis = rand_image(2), rand_image(3)
    iw, vw = pre_fuse(ir, vis, PreFusionConfig(0.5))
    mean = (ir + vis) / 2.0
    assert np.array_equal(iw, vw)
    assert np.allclose(iw, mean, rtol=1e-15)


def test_pre_fuse_direct_evaluation():
    ir = np.zeros((8, 8))
    vis = np.ones((8, 8))
    iw, vw = pre_fuse(ir, vis, PreFusionConfig(0.7))
    assert np.allclose(iw, 0.3)
    assert np.allclose(vw, 0.7)


def test_pre_fuse_shape_mismatch():
    with pytest.raises(ShapeError):
        pre_fuse(np.zeros((4, 4)), np.zeros((4, 5)), PreFusionConfig())


def test_pre_fusion_config_validates_range():
    with pytest.raises(ConfigError):
        PreFusionConfig(0.3)
    with pytest.raises(ConfigError):
        PreFusionConfig(1.2)
    assert PreFusionConfig(0.7).a2 == pytest.approx(0.3)


# ----------------------------------------------------------- rdb, encode

def test_rdb_output_64_channels_spatial_preserved():
    params = init_params(0, dtype=np.float64)
    f0 = Tensor(np.random.default_rng(4).standard_normal((2, 16, 16, 16)))
    out = rdb_forward(f0, params)
    assert out.shape == (2, 64, 16, 16)


def test_rdb_zero_network_reduces_to_tiled_skip():
    params = zero_params()
    f0 = Tensor(np.random.default_rng(5).standard_normal((1, 16, 8, 8)))
    out = rdb_forward(f0, params)
    assert np.array_equal(out.data, tile_channels(f0, 4).data)


def test_rdb_rejects_wrong_channel_count():
    with pytest.raises(ShapeError):
        rdb_forward(Tensor(np.zeros((1, 8, 4, 4))), init_params(0))


def test_encode_shape_and_tied_weights():
    params = init_params(1, dtype=np.float64)
    img = Tensor(rand_image(6)[None, None])
    a = encode(img, params)
    b = encode(img, params)
    assert a.shape == (1, 64, 16, 16)
    assert np.array_equal(a.data, b.data)  # one parameter set, tied


def test_encode_zero_everything_gives_zero():
    params = zero_params()
    out = encode(Tensor(np.zeros((1, 1, 8, 8))), params)
    assert np.all(out.data == 0.0)


def test_encode_rejects_multichannel():
    with pytest.raises(ShapeError):
        encode(Tensor(np.zeros((1, 3, 8, 8))), init_params(0))


# -------------------------------------------------------------- fuse_add

def test_fuse_add_identity_and_commutative():
    rng = np.random.default_rng(7)
    phi = Tensor(rng.standard_normal((1, 64, 4, 4)))
    zeros = Tensor(np.zeros((1, 64, 4, 4)))
    other = Tensor(rng.standard_normal((1, 64, 4, 4)))
    assert np.array_equal(fuse_add(phi, zeros).data, phi.data)
    assert np.array_equal(fuse_add(phi, other).data, fuse_add(other, phi).data)
    assert np.array_equal(fuse_add(phi, phi).data, 2.0 * phi.data)


def test_fuse_add_shape_mismatch():
    with pytest.raises(ShapeError):
        fuse_add(Tensor(np.zeros((1, 64, 4, 4))), Tensor(np.zeros((1, 64, 4, 5))))


# ---------------------------------------------------------------- decode

def test_decode_single_iteration_equals_plain_pass():
    params = init_params(2, dtype=np.float64)
    y = Tensor(np.random.default_rng(8).standard_normal((1, 64, 16, 16)))
    from ivfuse.network import _decoder_pass
    assert np.array_equal(decode(y, params, FeedbackConfig(1)).data,
                          _decoder_pass(y, params).data)


def test_decode_output_single_channel_same_size():
    params = init_params(3, dtype=np.float64)
    y = Tensor(np.random.default_rng(9).standard_normal((2, 64, 12, 12)))
    out = decode(y, params, FeedbackConfig(2))
    assert out.shape == (2, 1, 12, 12)


def test_decode_zero_feedback_conv_is_noop():
    params = init_params(4, dtype=np.float64)
    params.tensors["decoder.c6.weight"].data[...] = 0.0
    params.tensors["decoder.c6.bias"].data[...] = 0.0
    y = Tensor(np.random.default_rng(10).standard_normal((1, 64, 16, 16)))
    one = decode(y, params, FeedbackConfig(1))
    four = decode(y, params, FeedbackConfig(4))
    assert np.array_equal(one.data, four.data)


def test_feedback_config_validation():
    with pytest.raises(ConfigError):
        FeedbackConfig(0)


# ----------------------------------------------------------- fuse_images

def test_fuse_images_shape_and_range():
    params = init_params(5)
    ir, vis = rand_image(11), rand_image(12)
    fused = fuse_images(ir, vis, params, FeedbackConfig(2))
    assert fused.shape == ir.shape
    assert fused.min() >= 0.0 and fused.max() <= 1.0


@pytest.mark.parametrize("seed", range(5))
def test_fuse_images_argument_order_invariance(seed):
    params = init_params(100 + seed)
    ir, vis = rand_image(2 * seed), rand_image(2 * seed + 1)
    ab = fuse_images(ir, vis, params, FeedbackConfig(2))
    ba = fuse_images(vis, ir, params, FeedbackConfig(2))
    assert np.array_equal(ab, ba)


def test_fuse_images_size_mismatch():
    with pytest.raises(ShapeError):
        fuse_images(np.zeros((8, 8)), np.zeros((8, 9)), init_params(0))


def test_fuse_images_optional_pre_fusion_changes_result():
    params = init_params(6)
    ir, vis = rand_image(13), rand_image(14)
    raw = fuse_images(ir, vis, params, FeedbackConfig(1))
    blended = fuse_images(ir, vis, params, FeedbackConfig(1),
                          pre_fusion=PreFusionConfig(0.7))
    assert not np.array_equal(raw, blended)


# ------------------------------------------------------------ init_params

def test_init_params_deterministic():
    a = init_params(42)
    b = init_params(42)
    for name in a.tensors:
        assert np.array_equal(a.tensors[name].data, b.tensors[name].data)


def test_init_params_he_variance():
    # 3x3, 16 -> 16 conv: fan_in 144, expected weight variance 2/144
    params = init_params(7, dtype=np.float64)
    w = params.tensors["encoder.rdb.conv1.weight"].data
    assert w.size >= 2000
    want = 2.0 / 144.0
    assert abs(w.var() - want) / want < 0.20


def test_init_params_biases_zero():
    params = init_params(8)
    for name, t in params.tensors.items():
        if name.endswith(".bias"):
            assert np.all(t.data == 0.0)


def test_model_params_rejects_bad_shapes():
    params = init_params(9)
    tensors = dict(params.tensors)
    tensors["encoder.c1.weight"] = Tensor(np.zeros((8, 1, 3, 3)))
    with pytest.raises(ShapeError):
        ModelParams(tensors)
    tensors = dict(params.tensors)
    del tensors["decoder.c5.bias"]
    with pytest.raises(ShapeError):
        ModelParams(tensors)


# ------------------------------------------------------------- checkpoint

def test_checkpoint_roundtrip_bitwise(tmp_path):
    params = init_params(10)
    path = tmp_path / "model.hfn"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    for name in params.tensors:
        assert np.array_equal(loaded.tensors[name].data,
                              params.tensors[name].data)
        assert loaded.tensors[name].dtype == np.float32


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.hfn"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    params = init_params(11)
    path = tmp_path / "model.hfn"
    save_checkpoint(params, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 100])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_checkpoint_wrong_shape_cites_expected(tmp_path):
    params = init_params(12)
    path = tmp_path / "model.hfn"
    save_checkpoint(params, path)
    blob = path.read_bytes()
    # corrupt the manifest: claim c1 maps 1 -> 8 instead of 1 -> 16
    bad = blob.replace(b"encoder.c1.weight f32 16,1,3,3",
                       b"encoder.c1.weight f32 8,1,3,3", 1)
    assert bad != blob
    path.write_bytes(bad)
    with pytest.raises(CheckpointSchemaError, match=r"16, 1, 3, 3"):
        load_checkpoint(path)


def test_checkpoint_magic_constant():
    assert MAGIC == b"HFN1"


def test_checkpoint_unknown_tensor_rejected(tmp_path):
    params = init_params(13)
    path = tmp_path / "model.hfn"
    save_checkpoint(params, path)
    blob = path.read_bytes()
    bad = blob.replace(b"encoder.c1.weight", b"encoder.cX.weight", 1)
    path.write_bytes(bad)
    with pytest.raises(CheckpointSchemaError):
        load_checkpoint(path)
