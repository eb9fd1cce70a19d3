import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngrc_readout.data import Layout, ShotSet
from ngrc_readout.errors import LabelOutOfRangeError, LengthMismatchError, MalformedHeaderError
from ngrc_readout.io import (load_shotset, read_record, save_shotset, shotset_from_bytes,
                             shotset_to_bytes, write_record)
from ngrc_readout.sim import QubitSimParams, SimConfig, generate_dataset


def _header(m, c=1, n=4, layout=1, nq=1, ncls=2, magic=b"NGRQ", version=1):
    return struct.pack("<4sIIIIIIQ", magic, version, layout, nq, ncls, c, n, m)


def test_minimal_binary_file(tmp_path):
    rec = struct.pack("<Q", 1) + np.arange(8, dtype="<f8").tobytes()
    path = tmp_path / "one.ngrq"
    path.write_bytes(_header(1) + rec)
    s = load_shotset(path)
    assert s.n_shots == 1 and s.n_samples == 4
    np.testing.assert_array_equal(s.iq[0, 0], [0 + 1j, 2 + 3j, 4 + 5j, 6 + 7j])
    assert s.labels.tolist() == [1]


def test_short_record_is_length_mismatch():
    # one quadrature value short
    rec = struct.pack("<Q", 0) + np.zeros(7, dtype="<f8").tobytes()
    with pytest.raises(LengthMismatchError):
        shotset_from_bytes(_header(1) + rec)


def test_header_errors_are_distinct():
    with pytest.raises(MalformedHeaderError):
        shotset_from_bytes(b"NGR")
    with pytest.raises(MalformedHeaderError):
        shotset_from_bytes(_header(0, magic=b"XXXX"))
    with pytest.raises(MalformedHeaderError):
        shotset_from_bytes(_header(0, version=2))
    with pytest.raises(MalformedHeaderError):
        shotset_from_bytes(_header(0, layout=7))
    rec = struct.pack("<Q", 5) + np.zeros(8, dtype="<f8").tobytes()
    with pytest.raises(LabelOutOfRangeError):
        shotset_from_bytes(_header(1) + rec)


def test_trailing_garbage_rejected():
    with pytest.raises(LengthMismatchError):
        shotset_from_bytes(_header(0) + b"abc")


def test_empty_set_round_trip(tmp_path):
    s = ShotSet(np.zeros((0, 1, 3), complex), np.zeros(0, int), 1, 2)
    save_shotset(s, tmp_path / "e.ngrq")
    back = load_shotset(tmp_path / "e.ngrq")
    assert back.n_shots == 0 and back.n_samples == 3


def test_simulated_round_trip_bit_identical(tmp_path):
    cfg = SimConfig((QubitSimParams(noise_sigma=2.0, t1_steps=50),), n_samples=40, shots_per_config=500)
    s = generate_dataset(cfg, 4)
    assert s.n_shots == 1000
    save_shotset(s, tmp_path / "s.ngrq")
    back = load_shotset(tmp_path / "s.ngrq")
    assert back == s
    assert shotset_to_bytes(back) == shotset_to_bytes(s)


def test_csv_rows_and_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    iq = rng.standard_normal((2, 1, 3)) + 1j * rng.standard_normal((2, 1, 3))
    s = ShotSet(iq, [0, 1], 1, 2, meta={"source": "test"})
    path = tmp_path / "s.csv"
    save_shotset(s, path)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "shot,label,ch,idx,i,q"
    assert len(lines) == 1 + 6
    back = load_shotset(path)
    assert back == s


def test_binary_csv_binary_preserves_values(tmp_path):
    cfg = SimConfig((QubitSimParams(noise_sigma=1.0),), n_samples=10, shots_per_config=3)
    s = generate_dataset(cfg, 1)
    save_shotset(s, tmp_path / "a.csv")
    c = load_shotset(tmp_path / "a.csv")
    save_shotset(c, tmp_path / "b.ngrq")
    b = load_shotset(tmp_path / "b.ngrq")
    np.testing.assert_allclose(b.iq, s.iq, rtol=1e-15, atol=0)
    assert b.labels.tolist() == s.labels.tolist()


def test_multiplexed_layout_round_trip(tmp_path):
    iq = np.ones((4, 1, 5), complex)
    s = ShotSet(iq, [0, 1, 2, 3], 2, 2, Layout.RAW_MULTIPLEXED, {"if_freqs": "0.1,0.2"})
    back = shotset_from_bytes(shotset_to_bytes(s))
    assert back == s and back.layout is Layout.RAW_MULTIPLEXED


def test_record_container(tmp_path):
    write_record(tmp_path / "r.bin", b"TEST", b"payload", version=3)
    assert read_record(tmp_path / "r.bin", b"TEST") == (3, b"payload")
    with pytest.raises(MalformedHeaderError):
        read_record(tmp_path / "r.bin", b"DISC")


@given(st.integers(0, 6), st.integers(1, 3), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_binary_round_trip_property(m, nq, n, seed):
    rng = np.random.default_rng(seed)
    iq = rng.standard_normal((m, nq, n)) + 1j * rng.standard_normal((m, nq, n))
    labels = rng.integers(0, 2**nq, m)
    s = ShotSet(iq, labels, nq, 2)
    assert shotset_from_bytes(shotset_to_bytes(s)) == s
