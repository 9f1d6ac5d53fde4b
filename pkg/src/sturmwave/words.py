"""Sturmian blocks over the alphabet {p, q} and their parameter tracks.

Besides the concatenation recursion this module carries an independent
construction of the same block: the cutting sequence of a vertical line
through the periodic tiling by two rectangles of widths ``u``, ``v`` and
heights ``theta_p``, ``theta_q``. It exists to cross-check the recursion.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

import numpy as np

from .numbers import ContinuedFraction, RationalLike, as_generator, cf_from_rational, convergents

CFLike = Union[ContinuedFraction, Sequence[int]]


def _as_cf(cf: CFLike) -> ContinuedFraction:
    return cf if isinstance(cf, ContinuedFraction) else ContinuedFraction(tuple(cf))


@dataclass(frozen=True)
class SturmianWord:
    symbols: str
    source: ContinuedFraction

    def __str__(self) -> str:
        return self.symbols

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def count_p(self) -> int:
        return self.symbols.count("p")

    @property
    def count_q(self) -> int:
        return self.symbols.count("q")

    @property
    def alpha(self) -> Fraction:
        return self.source.value


@dataclass(frozen=True)
class BlockHistory:
    """Blocks ``B_-1 .. B_n`` and their lengths ``N_-1 .. N_n``."""

    blocks: Tuple[str, ...]
    lengths: Tuple[int, ...]

    def block(self, k: int) -> str:
        return self.blocks[k + 1]

    def length(self, k: int) -> int:
        return self.lengths[k + 1]


def block_history(cf: CFLike) -> BlockHistory:
    cf = _as_cf(cf)
    blocks = ["q", "p"]
    lengths = [1, 1]
    for a in cf.terms:
        blocks.append(blocks[-1] * a + blocks[-2])
        lengths.append(a * lengths[-1] + lengths[-2])
    return BlockHistory(tuple(blocks), tuple(lengths))


def sturmian_block(cf: CFLike) -> SturmianWord:
    """The block ``B(alpha) = B_n``; the empty fraction (alpha = 0) gives ``"p"``."""
    cf = _as_cf(cf)
    return SturmianWord(block_history(cf).blocks[-1], cf)


def word_for(alpha: RationalLike) -> SturmianWord:
    return sturmian_block(cf_from_rational(alpha))


def is_rotation(a: str, b: str) -> bool:
    return len(a) == len(b) and b in a + a


def cutting_sequence_oracle(alpha: RationalLike, theta_p: float, theta_q: float,
                            x0: float = 0.5) -> SturmianWord:
    """Gap pattern along the vertical line ``x = x0`` through the rectangle tiling.

    The tile ``S1 = [0, u] x [0, theta_p]`` and ``S2 = [-v, 0] x [0, theta_q]``
    is translated by the lattice spanned by ``e = (v, theta_p)`` and
    ``f = (-u, theta_q)``. Horizontal tile edges met by the line are collected
    over one vertical period ``u*theta_p + v*theta_q`` and consecutive gaps are
    read as ``p`` (height ``theta_p``) or ``q`` (height ``theta_q``). ``x0`` must
    not be an integer. When ``theta_p == theta_q`` gaps are labelled by the
    rectangle that spans them instead of by their length.
    """
    if theta_p <= 0 or theta_q <= 0:
        raise ValueError("theta_p and theta_q must be positive")
    if float(x0).is_integer():
        raise ValueError("x0 must not be an integer (line would run along tile sides)")
    alpha = as_generator(alpha)
    v, u = alpha.numerator, alpha.denominator
    period = u * theta_p + v * theta_q
    span = u + v

    # lattice offsets s = i*v - j*u; S1 copy covers x0 iff x0-u < s < x0,
    # S2 copy iff x0 < s < x0+v
    tiles = []
    for i in range(-2 * span, 2 * span + 1):
        for j in range(-2 * span, 2 * span + 1):
            s = i * v - j * u
            bottom = i * theta_p + j * theta_q
            if not (0 <= bottom < period - 1e-12 * period):
                continue
            if x0 - u < s < x0:
                tiles.append((bottom, bottom + theta_p, "p"))
            elif v and x0 < s < x0 + v:
                tiles.append((bottom, bottom + theta_q, "q"))
    tiles.sort()

    if len(tiles) != span:
        raise RuntimeError(f"tiling enumeration found {len(tiles)} tiles, expected {span}")
    tol = 1e-9 * min(theta_p, theta_q)
    symbols = []
    for (bottom, top, label), nxt in zip(tiles, tiles[1:] + [(tiles[0][0] + period,)]):
        if abs(nxt[0] - top) > tol * span:
            raise RuntimeError("rectangles along the cutting line do not stack")
        gap = top - bottom
        if abs(theta_p - theta_q) <= tol:
            symbols.append(label)
        elif abs(gap - theta_p) <= tol:
            symbols.append("p")
        elif abs(gap - theta_q) <= tol:
            symbols.append("q")
        else:
            raise RuntimeError(f"gap {gap} matches neither theta_p nor theta_q")
    return SturmianWord("".join(symbols), cf_from_rational(alpha))


@dataclass(frozen=True)
class ParameterTrack:
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def at(self, j: int) -> float:
        """Value of element ``j`` (1-based) of the periodically repeated supercell."""
        if j < 1:
            raise IndexError("element index is 1-based")
        return float(self.values[(j - 1) % len(self.values)])


def assign_parameters(word: Union[SturmianWord, str], theta_p: float, theta_q: float) -> ParameterTrack:
    symbols = str(word)
    mask = np.frombuffer(symbols.encode("ascii"), dtype=np.uint8) == ord("q")
    return ParameterTrack(np.where(mask, float(theta_q), float(theta_p)))


def parameter_sum(word: SturmianWord, theta_p: float, theta_q: float) -> float:
    """Sum of the parameter over one supercell.

    Equal to ``delta_n*theta_p + nu_n*theta_q`` and to
    ``N (theta_p + alpha theta_q) / (1 + alpha)``.
    """
    return float(np.sum(assign_parameters(word, theta_p, theta_q).values))


@dataclass(frozen=True)
class TilingGeometry:
    u: int
    v: int
    theta_p: float
    theta_q: float
    e: Tuple[int, float]
    f: Tuple[int, float]
    g: Tuple[Tuple[int, float], ...]  # g_-1 .. g_n

    def g_at(self, k: int) -> Tuple[int, float]:
        return self.g[k + 1]


def g_vectors(cf: CFLike, theta_p: float, theta_q: float) -> TilingGeometry:
    """The fan ``g_k = a_k g_{k-1} + g_{k-2}`` seeded with ``g_-1 = f``, ``g_0 = e``."""
    cf = _as_cf(cf)
    alpha = cf.value
    v, u = alpha.numerator, alpha.denominator
    e = (v, float(theta_p))
    f = (-u, float(theta_q))
    g = [f, e]
    for a in cf.terms:
        (x2, y2), (x1, y1) = g[-2], g[-1]
        g.append((a * x1 + x2, a * y1 + y2))
    return TilingGeometry(u, v, float(theta_p), float(theta_q), e, f, tuple(g))


def g_closed_form(cf: CFLike, theta_p: float, theta_q: float) -> Tuple[Tuple[int, float], ...]:
    """``(delta_k v - nu_k u, delta_k theta_p + nu_k theta_q)`` for ``k = -1 .. n``."""
    cf = _as_cf(cf)
    alpha = cf.value
    v, u = alpha.numerator, alpha.denominator
    return tuple((de * v - nu * u, de * theta_p + nu * theta_q)
                 for nu, de in convergents(cf).pairs)


def supercell_length(alpha: RationalLike) -> int:
    alpha = as_generator(alpha)
    return alpha.numerator + alpha.denominator
