import struct

import numpy as np
import pytest

from streams2s.binary.codecs.cursor import Cursor
from streams2s.binary.codecs.tensor_codec import decode_tensor, encode_tensor
from streams2s.binary.reader import ContainerError, read_feature_file, read_weight_container
from streams2s.binary.writer import FORMAT_VERSION, WEIGHTS_MAGIC, write_feature_file, write_weight_container
from streams2s.model import ModelWeights
from streams2s.models.features import FeatureSequence


def test_tensor_record_layout():
    data = encode_tensor("ab", np.array([[1.0, 2.0, 3.0]]))
    assert data[:2] == struct.pack("<H", 2)
    assert data[2:4] == b"ab"
    assert data[4] == 2
    assert struct.unpack("<II", data[5:13]) == (1, 3)
    assert struct.unpack("<3d", data[13:]) == (1.0, 2.0, 3.0)
    name, arr = decode_tensor(Cursor(data))
    assert name == "ab"
    np.testing.assert_array_equal(arr, [[1.0, 2.0, 3.0]])


def test_weight_container_is_name_ordered_and_exact():
    tensors = {"b": np.arange(6.0).reshape(2, 3), "a": np.array([np.pi, -0.0, 1e-300])}
    data = write_weight_container('{"x": 1}', tensors)
    assert data[:4] == WEIGHTS_MAGIC
    assert struct.unpack("<H", data[4:6])[0] == FORMAT_VERSION
    cfg, back = read_weight_container(data)
    assert cfg == '{"x": 1}'
    assert list(back) == ["a", "b"]
    for k, v in tensors.items():
        assert back[k].tobytes() == v.tobytes()
    assert write_weight_container('{"x": 1}', dict(reversed(list(tensors.items())))) == data


def test_weight_container_errors():
    data = write_weight_container("{}", {"a": np.ones(3)})
    with pytest.raises(ContainerError, match="magic"):
        read_weight_container(b"XXXX" + data[4:])
    with pytest.raises(ContainerError, match="version"):
        read_weight_container(data[:4] + struct.pack("<H", 99) + data[6:])
    with pytest.raises(ContainerError, match="truncated"):
        read_weight_container(data[:-5])
    with pytest.raises(ContainerError, match="trailing"):
        read_weight_container(data + b"\x00")


def test_feature_file_round_trip(tmp_path):
    feats = FeatureSequence(frames=np.random.default_rng(0).standard_normal((9, 4)), frame_period_ms=12.5)
    path = tmp_path / "f.s2sf"
    path.write_bytes(write_feature_file(feats))
    back = read_feature_file(path)
    assert back.frame_period_ms == 12.5
    assert back.frames.tobytes() == feats.frames.tobytes()


def test_model_container_round_trip(tmp_path, toy_model, uni_model):
    for model in (toy_model, uni_model):
        path = tmp_path / "m.s2sw"
        digest = model.save(path)
        back = ModelWeights.load(path)
        assert back.config == model.config
        assert back.to_bytes() == model.to_bytes()
        assert len(digest) == 64


def test_model_container_missing_tensor(toy_model):
    tensors = toy_model.to_tensors()
    del tensors["dec.positions"]
    data = write_weight_container(toy_model.config.model_dump_json(), tensors)
    with pytest.raises(ContainerError, match="dec.positions"):
        ModelWeights.from_bytes(data)
