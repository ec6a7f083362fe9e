import struct

import numpy as np
import pytest

from tmac.checkpoint import (MAGIC, CheckpointError, load_checkpoint,
                             save_checkpoint)
from tmac.training import AdamState, TrainConfig, init_params, prepare_events, train

from test_training import TOY, TOY_TRAIN, toy_dataset, toy_records


def trained_state(rng, tmp_path):
    result = train(toy_dataset(rng), TOY, TOY_TRAIN)
    path = tmp_path / "run.ckpt"
    save_checkpoint(path, result.final_params, result.opt, TOY_TRAIN,
                    iteration=result.best_iteration, best_map=result.best_map,
                    rng_state=result.rng_state)
    return result, path


def test_roundtrip_bitexact(rng, tmp_path):
    result, path = trained_state(rng, tmp_path)
    loaded = load_checkpoint(path)
    for n in result.final_params.names():
        assert np.array_equal(loaded.params.tensors[n].data,
                              result.final_params.tensors[n].data)
        assert np.array_equal(loaded.opt.m[n], result.opt.m[n])
        assert np.array_equal(loaded.opt.v[n], result.opt.v[n])
    assert loaded.opt.t == result.opt.t
    assert loaded.iteration == result.best_iteration
    assert loaded.best_map == result.best_map
    assert loaded.train_config == TOY_TRAIN
    assert loaded.model_config == TOY
    assert loaded.rng_state == result.rng_state


def test_roundtrip_same_predictions(rng, tmp_path):
    from tmac.training import predict_scores

    result, path = trained_state(rng, tmp_path)
    loaded = load_checkpoint(path)
    probe = prepare_events(toy_records(rng, 5), TOY, TOY_TRAIN)
    a = predict_scores(result.final_params, probe)
    b = predict_scores(loaded.params, probe)
    assert np.array_equal(a, b)


def test_float_fields_roundtrip_exactly(tmp_path):
    # lr and mAP values with no short decimal form survive repr round-trip
    config = TrainConfig(base_lr=1 / 3, gamma=0.1 + 0.2)
    params = init_params(TOY, 0)
    path = tmp_path / "f.ckpt"
    save_checkpoint(path, params, AdamState(params), config,
                    best_map=np.nextafter(0.5, 1.0))
    loaded = load_checkpoint(path)
    assert loaded.train_config.base_lr == 1 / 3
    assert loaded.train_config.gamma == 0.1 + 0.2
    assert loaded.best_map == np.nextafter(0.5, 1.0)


def test_default_best_map_is_neg_inf(tmp_path):
    params = init_params(TOY, 0)
    path = tmp_path / "d.ckpt"
    save_checkpoint(path, params, AdamState(params), TOY_TRAIN)
    assert load_checkpoint(path).best_map == float("-inf")


def test_bad_magic(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_bad_version(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(MAGIC + struct.pack("<I", 99) + bytes(8))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_truncated_file(tmp_path):
    params = init_params(TOY, 0)
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, params, AdamState(params), TOY_TRAIN)
    blob = path.read_bytes()
    for cut in (3, 6, len(blob) // 2, len(blob) - 1):
        clipped = tmp_path / f"cut{cut}.ckpt"
        clipped.write_bytes(blob[:cut])
        with pytest.raises(CheckpointError):
            load_checkpoint(clipped)


def test_trailing_bytes(tmp_path):
    params = init_params(TOY, 0)
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, params, AdamState(params), TOY_TRAIN)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)


def test_missing_moment_matrix(tmp_path):
    params = init_params(TOY, 0)
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, params, AdamState(params), TOY_TRAIN)
    blob = path.read_bytes()
    # drop the final matrix record (an adam.v. entry) and fix the count
    name = b"adam.v.readout.bias"
    at = blob.rindex(struct.pack("<I", len(name)) + name)
    # matrix count u32 sits right after the config lines; recount by rewriting
    # the record count field found before the first matrix name
    first = blob.index(struct.pack("<I", len(b"layer0.gcn_a.weight")) + b"layer0.gcn_a.weight")
    count = struct.unpack("<I", blob[first - 4: first])[0]
    patched = (blob[:first - 4] + struct.pack("<I", count - 1)
               + blob[first:at])
    bad = tmp_path / "m.ckpt"
    bad.write_bytes(patched)
    with pytest.raises(CheckpointError, match="adam.v.readout.bias"):
        load_checkpoint(bad)


def test_nonfinite_param_rejected(tmp_path):
    params = init_params(TOY, 0)
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, params, AdamState(params), TOY_TRAIN)
    blob = bytearray(path.read_bytes())
    name = b"readout.bias"
    at = blob.index(struct.pack("<I", len(name)) + name)
    start = at + 4 + len(name) + 8
    blob[start: start + 8] = struct.pack("<d", float("nan"))
    bad = tmp_path / "nan.ckpt"
    bad.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
