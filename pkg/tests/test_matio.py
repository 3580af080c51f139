import numpy as np
import pytest

from glassinterp.errors import DimensionMismatch
from glassinterp.matio import format_matrix, parse_matrix, read_matrix, write_matrix


def test_square_header_and_round_trip(rng, tmp_path):
    M = rng.standard_normal((4, 4))
    text = format_matrix(M)
    assert text.splitlines()[0] == "4"
    p = tmp_path / "m.txt"
    write_matrix(p, M)
    assert np.array_equal(read_matrix(p), M)


def test_point_set_header():
    P = np.arange(6.0).reshape(3, 2)
    text = format_matrix(P)
    assert text.splitlines()[0] == "3 2"
    assert np.array_equal(parse_matrix(text), P)


def test_seventeen_digits():
    x = 0.1 + 0.2
    assert parse_matrix(format_matrix([[x]]))[0, 0] == x


@pytest.mark.parametrize("text", ["2\n1 2\n", "2\n1 2\n3\n", "2 2\n1 2\n3 4 5\n"])
def test_malformed(text):
    with pytest.raises(DimensionMismatch):
        parse_matrix(text)
