from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from pgfoil import checkpoint


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=12),
                       arrays(np.float64, array_shapes(min_dims=0, max_dims=3, max_side=4),
                              elements=st.floats(allow_nan=False)), max_size=5))
def test_roundtrip_is_exact(tensors):
    out = checkpoint.decode(checkpoint.encode(tensors))
    assert list(out) == list(tensors)
    for k in tensors:
        assert out[k].shape == tensors[k].shape
        assert out[k].tobytes() == np.asarray(tensors[k], dtype="<f8").tobytes()


def test_save_load_and_no_temp_left(tmp_path):
    t = {"a": np.arange(6.0).reshape(2, 3)}
    checkpoint.save(tmp_path / "x.ckpt", t)
    assert [p.name for p in tmp_path.iterdir()] == ["x.ckpt"]
    np.testing.assert_array_equal(checkpoint.load(tmp_path / "x.ckpt")["a"], t["a"])


def test_bad_magic():
    blob = bytearray(checkpoint.encode({"a": np.ones(2)}))
    blob[0:4] = b"XXXX"
    with pytest.raises(checkpoint.CheckpointError, match="magic"):
        checkpoint.decode(bytes(blob))


def test_bad_version():
    blob = bytearray(checkpoint.encode({"a": np.ones(2)}))
    blob[4] = 99
    with pytest.raises(checkpoint.CheckpointError, match="version"):
        checkpoint.decode(bytes(blob))


@pytest.mark.parametrize("cut", [6, 10, 14, 20, 30])
def test_truncation(cut):
    blob = checkpoint.encode({"weights": np.ones((2, 2))})
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.decode(blob[:cut])
