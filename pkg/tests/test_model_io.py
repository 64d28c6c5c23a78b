import numpy as np
import pytest

from breathsentinel.autoencoder import init_ae
from breathsentinel.errors import BadMagic, TruncatedFile, VersionMismatch
from breathsentinel.model_io import (
    FORMAT_VERSION,
    MAGIC,
    ModelBundle,
    TENSOR_ORDER,
    load_model,
    save_model,
)
from breathsentinel.rnn import init_rnn


@pytest.fixture()
def bundle():
    return ModelBundle(ae=init_ae(5), rnn=init_rnn(5),
                       metadata={"seed": "5", "rnn_epochs": "0"})


def test_save_load_round_trip_is_bit_identical(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    first = path.read_bytes()
    loaded = load_model(path)
    save_model(loaded, path)
    assert path.read_bytes() == first
    for name in TENSOR_ORDER:
        original32 = bundle.tensor(name).astype(np.float32)
        assert np.array_equal(loaded.tensor(name), original32.astype(np.float64))
    assert loaded.metadata == bundle.metadata


def test_magic_and_version_header(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    data = path.read_bytes()
    assert data[:4] == MAGIC
    assert int.from_bytes(data[4:8], "little") == FORMAT_VERSION


def test_corrupted_magic_rejected(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(BadMagic):
        load_model(path)


def test_version_mismatch_rejected(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    data = bytearray(path.read_bytes())
    data[4:8] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        load_model(path)


def test_truncation_names_the_tensor(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    data = path.read_bytes()
    # cut inside the first tensor's payload
    path.write_bytes(data[:2000])
    with pytest.raises(TruncatedFile, match="ae.enc_w1"):
        load_model(path)


def test_truncation_in_metadata_detected(bundle, tmp_path):
    path = tmp_path / "model.bsm"
    save_model(bundle, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncatedFile, match="metadata"):
        load_model(path)


def test_metadata_rejects_newlines(bundle, tmp_path):
    bundle.metadata["bad"] = "a\nb"
    with pytest.raises(ValueError):
        save_model(bundle, tmp_path / "model.bsm")


def test_identical_bundles_serialize_identically(bundle, tmp_path):
    a, b = tmp_path / "a.bsm", tmp_path / "b.bsm"
    save_model(bundle, a)
    save_model(ModelBundle(ae=init_ae(5), rnn=init_rnn(5),
                           metadata={"seed": "5", "rnn_epochs": "0"}), b)
    assert a.read_bytes() == b.read_bytes()
