"""Continued fractions and convergents of the generator parameter.

Rationals are :class:`fractions.Fraction` throughout; generator values live
in ``[0, 1]`` and all arithmetic on them is exact.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Tuple, Union

RationalLike = Union[Fraction, int, str]

_RATIONAL_RE = re.compile(r"^\s*(\d+)\s*/\s*(\d+)\s*$")
_CF_RE = re.compile(r"^\s*\[\s*0\s*(?:;\s*([\d\s,]*))?\]\s*$")


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` (or a bare integer ``"0"``/``"1"``) into a Fraction."""
    match = _RATIONAL_RE.match(text)
    if match:
        num, den = int(match.group(1)), int(match.group(2))
        if den == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(num, den)
    if text.strip().isdigit():
        return Fraction(int(text.strip()))
    raise ValueError(f"malformed rational {text!r}, expected 'p/q'")


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def as_generator(alpha: RationalLike) -> Fraction:
    """Coerce to a Fraction and check it is a valid generator in [0, 1]."""
    if isinstance(alpha, str):
        alpha = parse_rational(alpha)
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"generator {alpha} outside [0, 1]")
    return alpha


@dataclass(frozen=True)
class ContinuedFraction:
    """Terms ``[a_1, ..., a_n]`` of ``[0; a_1, ..., a_n]``.

    The empty tuple stands for 0. Canonical form requires ``a_n >= 2`` when
    ``n >= 2``; non-canonical term lists are accepted (they still evaluate
    correctly) but :func:`cf_from_rational` never produces them.
    """

    terms: Tuple[int, ...] = ()

    def __post_init__(self):
        terms = tuple(int(a) for a in self.terms)
        if any(a < 1 for a in terms):
            raise ValueError(f"continued fraction terms must be >= 1, got {terms}")
        object.__setattr__(self, "terms", terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[int]:
        return iter(self.terms)

    def __getitem__(self, k):
        return self.terms[k]

    @property
    def is_canonical(self) -> bool:
        return len(self.terms) < 2 or self.terms[-1] >= 2

    @property
    def value(self) -> Fraction:
        return rational_from_cf(self)

    def __str__(self) -> str:
        if not self.terms:
            return "[0]"
        return "[0;" + ",".join(str(a) for a in self.terms) + "]"

    @classmethod
    def parse(cls, text: str) -> "ContinuedFraction":
        """Parse ``"[0;a1,...,an]"``; ``"[0]"`` and ``"[0;]"`` give the empty fraction."""
        match = _CF_RE.match(text)
        if not match:
            raise ValueError(f"malformed continued fraction {text!r}, expected '[0;a1,...,an]'")
        body = (match.group(1) or "").strip()
        if not body:
            return cls(())
        try:
            terms = tuple(int(tok) for tok in body.split(","))
        except ValueError:
            raise ValueError(f"malformed continued fraction {text!r}") from None
        return cls(terms)


@dataclass(frozen=True)
class ConvergentSequence:
    """Pairs ``(nu_k, delta_k)`` for ``k = -1 .. n`` including the two seeds."""

    pairs: Tuple[Tuple[int, int], ...]

    @property
    def nu(self) -> Tuple[int, ...]:
        return tuple(p[0] for p in self.pairs)

    @property
    def delta(self) -> Tuple[int, ...]:
        return tuple(p[1] for p in self.pairs)

    def fractions(self) -> Tuple[Fraction, ...]:
        """Convergents ``nu_k/delta_k`` for ``k = 1 .. n`` (seeds excluded)."""
        return tuple(Fraction(nu, de) for nu, de in self.pairs[2:])

    def at(self, k: int) -> Tuple[int, int]:
        """``(nu_k, delta_k)`` indexed as in the recursion, ``k >= -1``."""
        return self.pairs[k + 1]

    @property
    def last(self) -> Fraction:
        nu, de = self.pairs[-1]
        return Fraction(nu, de)


def cf_from_rational(alpha: RationalLike) -> ContinuedFraction:
    """Canonical continued fraction of a rational in [0, 1].

    >>> cf_from_rational(Fraction(3, 11)).terms
    (3, 1, 2)
    """
    alpha = as_generator(alpha)
    terms = []
    num, den = alpha.numerator, alpha.denominator
    # Euclid on den/num: alpha = 1/(den/num)
    while num:
        a, rem = divmod(den, num)
        terms.append(a)
        den, num = num, rem
    # Euclid already ends with a_n >= 2 except for alpha == 1
    return ContinuedFraction(tuple(terms))


def rational_from_cf(cf: Union[ContinuedFraction, Tuple[int, ...]]) -> Fraction:
    terms = cf.terms if isinstance(cf, ContinuedFraction) else tuple(cf)
    value = Fraction(0)
    for a in reversed(terms):
        value = 1 / (a + value)
    return value


def convergents(cf: Union[ContinuedFraction, Tuple[int, ...]]) -> ConvergentSequence:
    """Numerators and denominators from the three-term recursion."""
    terms = cf.terms if isinstance(cf, ContinuedFraction) else tuple(cf)
    pairs = [(1, 0), (0, 1)]
    for a in terms:
        (nu2, de2), (nu1, de1) = pairs[-2], pairs[-1]
        pairs.append((a * nu1 + nu2, a * de1 + de2))
    return ConvergentSequence(tuple(pairs))


def best_rational_approx(x: float, max_den: int) -> Fraction:
    """Closest rational to ``x`` with denominator at most ``max_den``.

    Uses the convergent/semiconvergent walk of
    :meth:`fractions.Fraction.limit_denominator`.
    """
    if max_den < 1:
        raise ValueError("max_den must be >= 1")
    if not 0 <= x <= 1:
        raise ValueError(f"x = {x} outside [0, 1]")
    return Fraction(x).limit_denominator(max_den)
