"""Readers and writers for the plain-text problem and coupling formats.

Three formats are supported:

``.pts``    weighted point cloud: header ``PTS n count mass_scale`` followed
            by one line per point, ``x_1 ... x_n mass``.
``.dgrid``  measure on a full Cartesian grid: header
            ``DGRID n s_1 ... s_n mass_scale`` followed by the masses in
            row-major order (any whitespace layout).
``.cpl``    coupling: header ``CPL nX nY mass_scale`` followed by one line
            per entry, ``i j mass``, in canonical (row, column) order.

Writers emit floats with ``repr`` (shortest round-trip form), so output is
reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np

from .core import DiscreteMeasure, SparseCoupling


class FormatError(ValueError):
    """Raised when a file does not conform to its declared format."""


def _tokens(path):
    with open(path, "r") as fh:
        text = fh.read()
    return text.split()


def _header(tokens, magic, path):
    if not tokens or tokens[0] != magic:
        raise FormatError(f"{path}: expected {magic} header")


def grid_points(shape) -> np.ndarray:
    """Integer coordinates of a full grid of the given shape, row-major order."""
    shape = tuple(int(s) for s in shape)
    axes = np.meshgrid(*[np.arange(s, dtype=np.float64) for s in shape],
                       indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def write_pts(path, measure: DiscreteMeasure):
    n = measure.dim
    lines = [f"PTS {n} {len(measure)} {measure.mass_scale}"]
    for p, m in zip(measure.points, measure.masses):
        coords = " ".join(repr(float(v)) for v in p)
        lines.append(f"{coords} {int(m)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pts(path) -> DiscreteMeasure:
    toks = _tokens(path)
    _header(toks, "PTS", path)
    try:
        n, count, mass_scale = int(toks[1]), int(toks[2]), int(toks[3])
        body = toks[4:]
        if len(body) != count * (n + 1):
            raise FormatError(f"{path}: expected {count * (n + 1)} values, "
                              f"got {len(body)}")
        rows = np.array(body, dtype=object).reshape(count, n + 1)
        points = rows[:, :n].astype(np.float64)
        masses = np.array([int(v) for v in rows[:, n]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed PTS file ({exc})") from exc
    return DiscreteMeasure(points, masses, mass_scale)


def write_dgrid(path, masses: np.ndarray, shape, mass_scale: int):
    shape = tuple(int(s) for s in shape)
    masses = np.asarray(masses, dtype=np.int64).reshape(shape)
    n = len(shape)
    header = f"DGRID {n} " + " ".join(str(s) for s in shape) + f" {mass_scale}"
    flat = masses.reshape(-1, shape[-1])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in flat:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_dgrid(path) -> tuple[DiscreteMeasure, tuple[int, ...]]:
    """Read a grid measure; returns (measure, shape).

    The measure's points are the integer grid coordinates in row-major order.
    """
    toks = _tokens(path)
    _header(toks, "DGRID", path)
    try:
        n = int(toks[1])
        shape = tuple(int(v) for v in toks[2 : 2 + n])
        mass_scale = int(toks[2 + n])
        body = toks[3 + n :]
        total = int(np.prod(shape))
        if len(body) != total:
            raise FormatError(f"{path}: expected {total} masses, got {len(body)}")
        masses = np.array([int(v) for v in body], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed DGRID file ({exc})") from exc
    measure = DiscreteMeasure(grid_points(shape), masses, mass_scale)
    return measure, shape


def write_cpl(path, pi: SparseCoupling):
    lines = [f"CPL {pi.n_rows} {pi.n_cols} {pi.mass_scale}"]
    for i in range(pi.n_rows):
        sl = slice(pi.indptr[i], pi.indptr[i + 1])
        for j, m in zip(pi.cols[sl], pi.mass[sl]):
            lines.append(f"{i} {int(j)} {int(m)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_cpl(path) -> SparseCoupling:
    toks = _tokens(path)
    _header(toks, "CPL", path)
    try:
        n_rows, n_cols, mass_scale = int(toks[1]), int(toks[2]), int(toks[3])
        body = toks[4:]
        if len(body) % 3:
            raise FormatError(f"{path}: entry lines must hold i j mass triples")
        trip = np.array([int(v) for v in body], dtype=np.int64).reshape(-1, 3)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed CPL file ({exc})") from exc
    return SparseCoupling.from_entries(n_rows, n_cols, trip[:, 0], trip[:, 1],
                                       trip[:, 2], mass_scale)
