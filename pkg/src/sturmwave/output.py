"""CSV and bit-packed raster writers.

CSV files use ``,`` separators, ``.`` decimals, LF line endings and 17
significant digits for reals, so identical inputs give identical bytes.

Raster layout (``.sbsg``)::

    b"SBSG" | rows: u32 LE | cols: u32 LE | bits

``bits`` is the row-major flattened boolean grid packed MSB-first, with the
final byte zero-padded. Rows are alpha values, columns frequencies.
"""
from __future__ import annotations

import csv
import struct
from fractions import Fraction
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .numbers import format_rational

MAGIC = b"SBSG"
_HEADER = struct.Struct("<II")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _writer(fh: IO[str]):
    return csv.writer(fh, lineterminator="\n")


# -- bulk grids ------------------------------------------------------------

class GridCSVWriter:
    """Streams ``alpha, omega_1, ..., omega_n`` rows; cells are 0/1."""

    def __init__(self, fh: IO[str], omega: Sequence[float]):
        self._w = _writer(fh)
        self._w.writerow(["alpha"] + [fmt(w) for w in omega])
        self._cols = len(omega)

    def write_row(self, alpha: Fraction, row: np.ndarray) -> None:
        if len(row) != self._cols:
            raise ValueError(f"row has {len(row)} cells, expected {self._cols}")
        self._w.writerow([format_rational(alpha)] + ["1" if v else "0" for v in row])


class RasterWriter:
    """Streaming writer for the bit-packed raster; rows may arrive one at a time."""

    def __init__(self, fh: IO[bytes], rows: int, cols: int):
        if rows < 0 or cols < 0 or rows >= 2 ** 32 or cols >= 2 ** 32:
            raise ValueError("raster dimensions must fit in u32")
        self._fh = fh
        self.rows, self.cols = rows, cols
        self._written = 0
        self._carry = np.zeros(0, dtype=bool)
        fh.write(MAGIC + _HEADER.pack(rows, cols))

    def write_row(self, row: np.ndarray) -> None:
        row = np.asarray(row, dtype=bool).ravel()
        if row.size != self.cols:
            raise ValueError(f"row has {row.size} cells, expected {self.cols}")
        if self._written >= self.rows:
            raise ValueError("more rows than declared")
        bits = np.concatenate([self._carry, row])
        full = bits.size - bits.size % 8
        self._fh.write(np.packbits(bits[:full]).tobytes())
        self._carry = bits[full:]
        self._written += 1

    def close(self) -> None:
        if self._written != self.rows:
            raise ValueError(f"raster declared {self.rows} rows but got {self._written}")
        if self._carry.size:
            self._fh.write(np.packbits(self._carry).tobytes())
            self._carry = np.zeros(0, dtype=bool)


def write_raster(fh: IO[bytes], grid: np.ndarray) -> None:
    grid = np.asarray(grid, dtype=bool)
    rows, cols = grid.shape
    fh.write(MAGIC + _HEADER.pack(rows, cols))
    fh.write(np.packbits(grid.ravel()).tobytes())


def read_raster(fh: IO[bytes]) -> np.ndarray:
    head = fh.read(4 + _HEADER.size)
    if len(head) < 4 + _HEADER.size or head[:4] != MAGIC:
        raise ValueError("not an SBSG raster")
    rows, cols = _HEADER.unpack(head[4:])
    n = rows * cols
    payload = fh.read()
    if len(payload) != (n + 7) // 8:
        raise ValueError(f"raster payload has {len(payload)} bytes, expected {(n + 7) // 8}")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=n)
    return bits.astype(bool).reshape(rows, cols)


def write_grid_csv(fh: IO[str], alphas: Sequence[Fraction], omega: Sequence[float], grid: np.ndarray) -> None:
    w = GridCSVWriter(fh, omega)
    for a, row in zip(alphas, grid):
        w.write_row(a, row)


# -- per-alpha and per-r tables ---------------------------------------------

def write_bands_csv(fh: IO[str], band_lists: Iterable) -> None:
    w = _writer(fh)
    w.writerow(["alpha", "band_index", "omega_lo", "omega_hi"])
    for bands in band_lists:
        for i, (lo, hi) in enumerate(bands.intervals, start=1):
            w.writerow([format_rational(bands.alpha), i, fmt(lo), fmt(hi)])


def write_selfsim_csv(fh: IO[str], report, extra: bool = False) -> None:
    """``r, alpha_r, zeta_r, N, band_count`` per entry; ``extra`` appends the nesting measures."""
    w = _writer(fh)
    head = ["r", "alpha_r", "zeta_r", "N", "band_count"]
    if extra:
        head += ["outside_measure", "inside_fraction"]
    w.writerow(head)
    for e in report.entries:
        row = [e.r, format_rational(e.alpha), format_rational(e.zeta), e.size, e.bands.band_count]
        if extra:
            row += [fmt(e.outside_measure), fmt(e.inside_fraction)]
        w.writerow(row)


def write_dispersion_csv(fh: IO[str], omega: np.ndarray, values) -> None:
    """Rows of ``omega`` with the dispersion value(s) and ``kappa L`` where real.

    ``values`` is a real array (2x2 models) or a pair of complex branch
    arrays (4x4 models). ``kappa L`` cells are empty in stopbands.
    """
    w = _writer(fh)
    if isinstance(values, tuple):
        w.writerow(["omega", "cos_kL_plus_re", "cos_kL_plus_im", "cos_kL_minus_re", "cos_kL_minus_im",
                    "kL_plus", "kL_minus"])
        plus, minus = values
        for i, om in enumerate(omega):
            row = [fmt(om)]
            for b in (plus[i], minus[i]):
                row += [fmt(b.real), fmt(b.imag)]
            row += [_kl(b.real) if abs(b.imag) <= 1e-12 else "" for b in (plus[i], minus[i])]
            w.writerow(row)
        return
    w.writerow(["omega", "cos_kL", "kL"])
    for om, z in zip(omega, values):
        w.writerow([fmt(om), fmt(z), _kl(z)])


def _kl(z: float) -> str:
    return fmt(np.arccos(z)) if abs(z) <= 1.0 else ""


def write_zmap_csv(fh: IO[str], alphas: Sequence[Fraction], omega: Sequence[float], Z: np.ndarray,
                   mask_fh: Optional[IO[str]] = None) -> None:
    """``Z(alpha, omega)`` grid; the optional second file gets the ``|Z| <= 1`` mask."""
    w = _writer(fh)
    w.writerow(["alpha"] + [fmt(x) for x in omega])
    for a, row in zip(alphas, Z):
        w.writerow([format_rational(a)] + [fmt(v) for v in row])
    if mask_fh is not None:
        write_grid_csv(mask_fh, alphas, omega, np.abs(Z) <= 1.0)
