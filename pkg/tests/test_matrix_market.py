from fractions import Fraction

import numpy as np
import pytest

from src.core.dense import SpdMatrix, to_fractions
from src.core.errors import SpdViolationError
from src.core.matrix_market import read_block, read_matrix, read_spd, write_matrix
from src.models.schemas import ScalarMode
from src.problems.generators import integer_spd, random_spd


@pytest.mark.parametrize("layout", ["array", "coordinate"])
def test_float_matrix_survives_write_read(tmp_path, layout):
    A = random_spd(15, 100.0, seed=3)
    path = write_matrix(tmp_path / "A.mtx", A, layout=layout)
    B = read_spd(path)
    assert B.mode == ScalarMode.FLOAT
    assert np.array_equal(B.entries, A.entries)


@pytest.mark.parametrize("layout", ["array", "coordinate"])
def test_rational_matrix_survives_write_read(tmp_path, layout):
    A = integer_spd(7, seed=2)
    path = write_matrix(tmp_path / "A.mtx", A, layout=layout)
    assert "rational symmetric" in path.read_text().splitlines()[0]
    B = read_spd(path)
    assert B.mode == ScalarMode.RATIONAL
    assert np.array_equal(B.entries, A.entries)


def test_rational_block_keeps_fractions(tmp_path):
    X = to_fractions([[Fraction(1, 3), -2], [Fraction(7, 5), 0], [4, Fraction(-9, 2)]])
    path = write_matrix(tmp_path / "X0.mtx", X)
    Y = read_block(path)
    assert Y.shape == (3, 2)
    assert Y[0, 0] == Fraction(1, 3)
    assert np.array_equal(Y, X)


def test_vector_written_as_column(tmp_path):
    b = np.array([1.5, -2.25, 3.0])
    path = write_matrix(tmp_path / "b.mtx", b)
    out = read_matrix(path)
    assert out.shape == (3, 1)
    assert out[:, 0].tolist() == b.tolist()


def test_read_spd_rejects_indefinite(tmp_path):
    path = write_matrix(tmp_path / "bad.mtx", -np.eye(3))
    with pytest.raises(SpdViolationError):
        read_spd(path)


def test_comment_lines_are_skipped(tmp_path):
    A = SpdMatrix(to_fractions([[2, 1], [1, 2]]))
    path = write_matrix(tmp_path / "A.mtx", A, comment="generated\nseed 4")
    assert read_spd(path).entries[0, 1] == 1
