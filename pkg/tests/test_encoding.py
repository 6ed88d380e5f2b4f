import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fefet_imc import encoding
from fefet_imc.errors import EncodingError


def test_minus_one_splits_into_high_minus_one_low_fifteen():
    pair = encoding.encode_weight_8b(-1)
    assert pair.high_bits == (1, 1, 1, 1)
    assert pair.low_bits == (1, 1, 1, 1)
    assert pair.high_value == -1
    assert pair.low_value == 15


def test_zero_weight():
    pair = encoding.encode_weight_8b(0)
    assert pair.high_value == 0 and pair.low_value == 0


def test_exhaustive_8b_reconstruction():
    for w in range(-128, 128):
        pair = encoding.encode_weight_8b(w)
        assert 16 * pair.high_value + pair.low_value == w
        assert encoding.decode_weight(pair) == w
        assert -8 <= pair.high_value <= 7
        assert 0 <= pair.low_value <= 15


@pytest.mark.parametrize("w", [-129, 128, 1000])
def test_8b_range_errors(w):
    with pytest.raises(EncodingError):
        encoding.encode_weight_8b(w)


def test_4b_examples_and_round_trip():
    assert encoding.weight_4b_bits(encoding.encode_weight_4b(-8)) == (0, 0, 0, 1)
    assert encoding.weight_4b_bits(encoding.encode_weight_4b(7)) == (1, 1, 1, 0)
    for w in range(-8, 8):
        bits = encoding.weight_4b_bits(encoding.encode_weight_4b(w))
        assert encoding.nibble_value(bits, encoding.MODE_SIGNED) == w
    with pytest.raises(EncodingError):
        encoding.encode_weight_4b(8)


def test_input_stream_examples():
    assert encoding.encode_input(5, 4).bits == (1, 0, 1, 0)
    assert encoding.encode_input(0, 8).bits == (0,) * 8
    with pytest.raises(EncodingError):
        encoding.encode_input(16, 4)
    with pytest.raises(EncodingError):
        encoding.encode_input(1, 9)


@given(st.integers(min_value=1, max_value=8), st.data())
def test_input_round_trip(m, data):
    x = data.draw(st.integers(min_value=0, max_value=(1 << m) - 1))
    stream = encoding.encode_input(x, m)
    assert len(stream.bits) == m
    assert encoding.decode_input(stream) == x


def test_exhaustive_input_round_trip():
    for m in range(1, 9):
        for x in range(1 << m):
            assert encoding.decode_input(encoding.encode_input(x, m)) == x


def test_matrix_nibble_bits_match_scalar_encoder():
    rng = np.random.default_rng(0)
    w = rng.integers(-128, 128, size=(16, 5))
    high, low = encoding.weight_matrix_nibble_bits(w)
    for (r, c), value in np.ndenumerate(w):
        pair = encoding.encode_weight_8b(int(value))
        assert tuple(high[r, c]) == pair.high_bits
        assert tuple(low[r, c]) == pair.low_bits
    hv = encoding.nibble_bits_to_values(high, encoding.MODE_SIGNED)
    lv = encoding.nibble_bits_to_values(low, encoding.MODE_UNSIGNED)
    assert np.array_equal(16 * hv + lv, w)


def test_bit_planes():
    planes = encoding.input_bit_planes([5, 0, 15], 4)
    assert planes.shape == (4, 3)
    assert planes[:, 0].tolist() == [1, 0, 1, 0]
    assert planes[:, 2].tolist() == [1, 1, 1, 1]


def test_matrix_csv_round_trip(tmp_path):
    path = tmp_path / "w.csv"
    w = np.array([[1, -2], [127, -128], [0, 16]])
    encoding.write_int_matrix(path, w, precision=8)
    back, precision = encoding.read_int_matrix(path)
    assert precision == 8
    assert np.array_equal(back, w)


def test_matrix_csv_range_check(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,4\n3,99\n")
    with pytest.raises(EncodingError):
        encoding.read_int_matrix(path)
