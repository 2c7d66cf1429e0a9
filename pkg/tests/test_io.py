import numpy as np
import pytest

from sparseot import fileio
from sparseot.core import DiscreteMeasure, SparseCoupling
from sparseot.fileio import FormatError


def test_grid_points_row_major():
    pts = fileio.grid_points((2, 3))
    assert pts.shape == (6, 2)
    assert list(pts[0]) == [0, 0]
    assert list(pts[1]) == [0, 1]
    assert list(pts[3]) == [1, 0]


def test_pts_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((17, 3))
    masses = rng.integers(1, 100, size=17)
    masses[0] += 1000 - masses.sum()
    m = DiscreteMeasure(pts, masses, 1000)
    path = tmp_path / "m.pts"
    fileio.write_pts(path, m)
    back = fileio.read_pts(path)
    assert np.array_equal(back.points, m.points)
    assert np.array_equal(back.masses, m.masses)
    assert back.mass_scale == 1000


def test_pts_write_is_deterministic(tmp_path):
    m = DiscreteMeasure(np.random.default_rng(1).standard_normal((5, 2)),
                        np.array([1, 2, 3, 4, 0]), 10)
    fileio.write_pts(tmp_path / "a.pts", m)
    fileio.write_pts(tmp_path / "b.pts", m)
    assert (tmp_path / "a.pts").read_bytes() == (tmp_path / "b.pts").read_bytes()


def test_dgrid_roundtrip(tmp_path):
    masses = np.arange(1, 13, dtype=np.int64)
    masses[-1] += 100 - masses.sum()
    path = tmp_path / "m.dgrid"
    fileio.write_dgrid(path, masses, (3, 4), 100)
    measure, shape = fileio.read_dgrid(path)
    assert shape == (3, 4)
    assert np.array_equal(measure.masses, masses)
    assert np.array_equal(measure.points, fileio.grid_points((3, 4)))


def test_cpl_roundtrip(tmp_path):
    pi = SparseCoupling.from_entries(3, 4, [0, 0, 2], [1, 3, 0], [5, 5, 10],
                                     mass_scale=20)
    path = tmp_path / "pi.cpl"
    fileio.write_cpl(path, pi)
    back = fileio.read_cpl(path)
    assert back.n_rows == 3 and back.n_cols == 4
    assert back.mass_scale == 20
    assert np.array_equal(back.indptr, pi.indptr)
    assert np.array_equal(back.cols, pi.cols)
    assert np.array_equal(back.mass, pi.mass)


@pytest.mark.parametrize("text", [
    "NOPE 2 2 10\n",
    "PTS 2 2 10\n0.0 0.0 5\n",                 # one point short
    "PTS x 2 10\n",
    "DGRID 2 2 2 10\n1 2 3\n",                 # one mass short
    "CPL 2 2 10\n0 0\n",                       # truncated triple
])
def test_malformed_files_raise(tmp_path, text):
    path = tmp_path / "bad.dat"
    path.write_text(text)
    readers = [fileio.read_pts, fileio.read_dgrid, fileio.read_cpl]
    reader = readers[["PTS", "DGRID", "CPL"].index(text.split()[0])] \
        if text.split()[0] in ("PTS", "DGRID", "CPL") else fileio.read_pts
    with pytest.raises(FormatError):
        reader(path)


def test_float_precision_survives_roundtrip(tmp_path):
    vals = np.array([[0.1 + 0.2, 1e-300], [np.pi, -1.5e300]])
    m = DiscreteMeasure(vals, np.array([1, 1]), 2)
    fileio.write_pts(tmp_path / "p.pts", m)
    back = fileio.read_pts(tmp_path / "p.pts")
    assert back.points.tobytes() == vals.tobytes()
