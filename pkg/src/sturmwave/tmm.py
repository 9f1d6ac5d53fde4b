"""Transfer-matrix algebra for Sturmian supercells.

Matrices are numpy arrays of shape ``(..., n, n)`` with ``n`` in {2, 4}; the
leading axes (typically a frequency grid) are carried through every routine so
a whole dispersion curve is evaluated with one pass of the recursion.

Product order follows state propagation: the first element of a word acts
first, so the supercell matrix of ``w_1 ... w_N`` is ``T_{w_N} ... T_{w_1}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple, Union

import numpy as np

from .numbers import ContinuedFraction, convergents
from .words import CFLike, SturmianWord, _as_cf

DIRECT_POWER_LIMIT = 64
RENORM_TOL = 1e-12
# det drift larger than this is cancellation noise in a huge product, not drift
RENORM_MAX = 1e-3
DET_NOISE = 64 * np.finfo(float).eps
PALINDROME_TOL = 1e-6


class PalindromyError(ValueError):
    """4x4 characteristic polynomial is not palindromic (c3 != c1 or c4 != 1)."""


def _check_pair(T_p: np.ndarray, T_q: np.ndarray) -> int:
    T_p, T_q = np.asarray(T_p), np.asarray(T_q)
    if T_p.shape != T_q.shape:
        raise ValueError(f"element matrices differ in shape: {T_p.shape} vs {T_q.shape}")
    n = T_p.shape[-1]
    if T_p.shape[-2] != n or n not in (2, 4):
        raise ValueError(f"expected stacks of 2x2 or 4x4 matrices, got {T_p.shape}")
    return n


def renormalize(T: np.ndarray) -> np.ndarray:
    """Rescale to unit determinant where ``det`` has drifted slightly from 1."""
    n = T.shape[-1]
    # deep in a stopband the entries of a long product can overflow; such
    # matrices are left alone (a non-finite drift never passes the test)
    with np.errstate(over="ignore", invalid="ignore"):
        det = np.linalg.det(T) if n != 2 else T[..., 0, 0] * T[..., 1, 1] - T[..., 0, 1] * T[..., 1, 0]
        drift = np.abs(det - 1.0)
        # rounding floor of det itself (Hadamard bound): below it the drift is
        # cancellation noise and rescaling would only inject error
        noise = DET_NOISE * np.prod(np.linalg.norm(T, axis=-1), axis=-1)
    fix = (drift > RENORM_TOL) & (drift < RENORM_MAX) & (drift > noise)
    if not np.any(fix):
        return T
    scale = np.where(fix, np.abs(det) ** (1.0 / n), 1.0)
    return T / scale[..., None, None]


def mat_power(T: np.ndarray, k: int) -> np.ndarray:
    """``T**k`` for a stack of matrices, ``k >= 0``.

    Repeated multiplication up to ``DIRECT_POWER_LIMIT``, binary exponentiation
    beyond.
    """
    if k < 0:
        raise ValueError("negative exponent")
    if k == 0:
        return np.broadcast_to(np.eye(T.shape[-1], dtype=T.dtype), T.shape).copy()
    if k == 1:
        return T
    if k <= DIRECT_POWER_LIMIT:
        out = T
        for _ in range(k - 1):
            out = out @ T
        return renormalize(out)
    out = None
    base = T
    while k:
        if k & 1:
            out = base if out is None else out @ base
        k >>= 1
        if k:
            base = base @ base
    return renormalize(out)


def supercell_tm(cf: CFLike, T_p: np.ndarray, T_q: np.ndarray) -> np.ndarray:
    """Supercell matrix from the block recursion ``T_k = T_{k-2} T_{k-1}**a_k``."""
    _check_pair(T_p, T_q)
    cf = _as_cf(cf)
    dtype = np.result_type(T_p, T_q, float)
    prev, cur = np.asarray(T_q, dtype=dtype), np.asarray(T_p, dtype=dtype)
    # overflow only happens deep inside stopbands, where inf/nan still reads as blocked
    with np.errstate(over="ignore", invalid="ignore"):
        for a in cf.terms:
            prev, cur = cur, renormalize(prev @ mat_power(cur, a))
    return cur


def supercell_tm_direct(word: Union[SturmianWord, str], T_p: np.ndarray, T_q: np.ndarray) -> np.ndarray:
    """Brute-force product over the explicit word (first symbol applied first)."""
    _check_pair(T_p, T_q)
    symbols = str(word)
    mats = {"p": np.asarray(T_p, dtype=float), "q": np.asarray(T_q, dtype=float)}
    out = np.broadcast_to(np.eye(mats["p"].shape[-1]), mats["p"].shape).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for s in symbols:
            out = mats[s] @ out
    return out


def half_trace_scaled(word: Union[SturmianWord, str], T_p: np.ndarray, T_q: np.ndarray) -> np.ndarray:
    """Half trace of the supercell product, rescaled after every factor.

    Slow but immune to overflow: where the true value exceeds the float range
    it comes back as a correctly signed infinity.
    """
    _check_pair(T_p, T_q)
    mats = {"p": np.asarray(T_p, dtype=float), "q": np.asarray(T_q, dtype=float)}
    out = np.broadcast_to(np.eye(mats["p"].shape[-1]), mats["p"].shape).copy()
    log_scale = np.zeros(out.shape[:-2])
    for s in str(word):
        out = mats[s] @ out
        scale = np.max(np.abs(out), axis=(-2, -1))
        out = out / scale[..., None, None]
        log_scale += np.log(scale)
    with np.errstate(over="ignore"):
        return 0.5 * trace(out) * np.exp(log_scale)


def trace(T: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", over="ignore"):
        return np.trace(T, axis1=-2, axis2=-1)


def cos_kL_2x2(T: np.ndarray) -> np.ndarray:
    """Half trace; the frequency is in a passband iff the value lies in [-1, 1]."""
    return 0.5 * trace(np.asarray(T))


def char_coeffs_4x4(T: np.ndarray):
    """Coefficients ``(c1, c2, c3, c4)`` of ``l^4 - c1 l^3 + c2 l^2 - c3 l + c4``."""
    T = np.asarray(T, dtype=float)
    T2 = T @ T
    t1 = trace(T)
    t2 = trace(T2)
    t3 = trace(T2 @ T)
    c1 = t1
    c2 = 0.5 * (t1 ** 2 - t2)
    c3 = (t1 ** 3 - 3.0 * t2 * t1 + 2.0 * t3) / 6.0
    c4 = np.linalg.det(T)
    return c1, c2, c3, c4


def palindromy_defect(T: np.ndarray):
    """Relative defects ``|c3 - c1|`` and ``|c4 - 1|`` of a 4x4 matrix.

    ``|c3 - c1|`` is measured against ``max(1, |c1|, |c3|)``.
    """
    c1, _, c3, c4 = char_coeffs_4x4(T)
    scale = np.maximum(1.0, np.maximum(np.abs(c1), np.abs(c3)))
    return np.abs(c3 - c1) / scale, np.abs(c4 - 1.0)


def cos_kL_4x4(T: np.ndarray, check: bool = True, tol: float = PALINDROME_TOL):
    """Both branches ``(tr T +- sqrt(2 tr T^2 - tr^2 T + 8)) / 4``.

    Returns complex arrays; a negative discriminant gives a conjugate pair.
    With ``check`` the palindromic structure the reduction relies on is
    asserted and :class:`PalindromyError` raised on a violation.
    """
    T = np.asarray(T, dtype=float)
    if check:
        d13, d4 = palindromy_defect(T)
        if np.any(d13 > tol) or np.any(d4 > tol):
            raise PalindromyError(
                f"characteristic polynomial not palindromic: |c3-c1| = {np.max(d13):.3g}, "
                f"|c4-1| = {np.max(d4):.3g}")
    t1 = trace(T)
    t2 = trace(T @ T)
    root = np.sqrt((2.0 * t2 - t1 ** 2 + 8.0).astype(complex))
    return (t1 + root) / 4.0, (t1 - root) / 4.0


def quadratic_branches_4x4(T: np.ndarray):
    """Roots ``s/2`` of ``s^2 - c1 s + c2 - 2 = 0``, solved with numpy.roots.

    Scalar matrices only; used to cross-check :func:`cos_kL_4x4`.
    """
    c1, c2, _, _ = char_coeffs_4x4(T)
    roots = np.roots([1.0, -float(c1), float(c2) - 2.0]).astype(complex)
    roots = roots[np.argsort(-roots.real)]
    return roots / 2.0


# -- overflow-free 4x4 branches ----------------------------------------------

_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def compound2(T: np.ndarray) -> np.ndarray:
    """Second compound (6x6 matrix of 2x2 minors) of a stack of 4x4 matrices.

    Multiplicative, ``C(AB) = C(A) C(B)``, and its trace is the coefficient
    ``c2`` of the characteristic polynomial of ``T``.
    """
    T = np.asarray(T)
    C = np.empty(T.shape[:-2] + (6, 6), dtype=T.dtype)
    for I, (i1, i2) in enumerate(_PAIRS):
        for J, (j1, j2) in enumerate(_PAIRS):
            C[..., I, J] = T[..., i1, j1] * T[..., i2, j2] - T[..., i1, j2] * T[..., i2, j1]
    return C


def _normalized(M: np.ndarray, log: np.ndarray):
    scale = np.max(np.abs(M), axis=(-2, -1))
    scale = np.where(scale > 0, scale, 1.0)
    return M / scale[..., None, None], log + np.log(scale)


def _scaled_mul(a, b):
    return _normalized(a[0] @ b[0], a[1] + b[1])


def _scaled_power(a, k: int):
    out = None
    base = a
    while k:
        if k & 1:
            out = base if out is None else _scaled_mul(out, base)
        k >>= 1
        if k:
            base = _scaled_mul(base, base)
    return out


def supercell_scaled(cf: CFLike, A_p: np.ndarray, A_q: np.ndarray):
    """The block recursion carried as ``(M, log_scale)`` with ``max|M| = 1``.

    The supercell matrix is ``M * exp(log_scale)``; nothing overflows however
    long the word. Works for any square size (used with 4x4 matrices and
    their 6x6 compounds).
    """
    cf = _as_cf(cf)
    zero = np.zeros(np.shape(A_p)[:-2])
    prev = _normalized(np.asarray(A_q, dtype=float), zero)
    cur = _normalized(np.asarray(A_p, dtype=float), zero)
    for a in cf.terms:
        prev, cur = cur, _scaled_mul(prev, _scaled_power(cur, a))
    return cur


def branches_from_scaled(T_scaled, C_scaled):
    """Branches ``(plus, minus)`` of ``cos(kappa L)`` from scaled ``T`` and ``compound2(T)``.

    Same values as :func:`cos_kL_4x4`, ``(c1 +- sqrt(c1^2 - 4 c2 + 8)) / 4``,
    but the smaller root comes from ``s_big s_small = c2 - 2`` so a
    propagating branch keeps full precision next to an evanescent pair of any
    size. Returns complex arrays.
    """
    MT, lT = T_scaled
    MC, lC = C_scaled
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        inv = np.exp(-lT)
        c1 = trace(MT)                        # c1 / sigma, sigma = exp(lT)
        c2 = trace(MC) * np.exp(lC - lT)      # c2 / sigma
        disc = c1 ** 2 - 4.0 * (c2 * inv - 2.0 * inv ** 2)
        root = np.sqrt(disc.astype(complex))
        sgn = np.where(c1 >= 0, 1.0, -1.0)
        big = 0.5 * (c1 + sgn * root)
        small = np.where(big != 0, (c2 - 2.0 * inv) / np.where(big != 0, big, 1.0), 0.0)
        real = disc >= 0
        big_s = big * np.exp(lT)
        # complex pairs: both roots carry the scale
        small_s = np.where(real, small, 0.5 * (c1 - sgn * root) * np.exp(lT))
        plus = np.where(sgn > 0, big_s, small_s)
        minus = np.where(sgn > 0, small_s, big_s)
    return 0.5 * plus, 0.5 * minus


def supercell_branches_4x4(cf: CFLike, T_p: np.ndarray, T_q: np.ndarray):
    """Overflow-free ``(plus, minus)`` branches for the supercell of ``cf``."""
    T_s = supercell_scaled(cf, T_p, T_q)
    C_s = supercell_scaled(cf, compound2(T_p), compound2(T_q))
    return branches_from_scaled(T_s, C_s)


def admitted_branches(plus: np.ndarray, minus: np.ndarray, tol: float = 0.0,
                      imag_tol: float = 1e-12) -> np.ndarray:
    ok = np.zeros(np.shape(plus), dtype=bool)
    with np.errstate(invalid="ignore"):
        for b in (plus, minus):
            ok |= (np.abs(b.imag) <= imag_tol) & (np.abs(b.real) <= 1.0 + tol)
    return ok


def admitted_2x2(T: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """``|tr T / 2| <= 1 + tol``; a non-finite trace counts as blocked."""
    with np.errstate(invalid="ignore"):
        return np.abs(cos_kL_2x2(T)) <= 1.0 + tol


def admitted_4x4(T: np.ndarray, tol: float = 0.0, imag_tol: float = 1e-12) -> np.ndarray:
    """A branch admits the frequency if it is real and ``|value| <= 1``."""
    plus, minus = cos_kL_4x4(T, check=False)
    return admitted_branches(plus, minus, tol, imag_tol)


# -- Chebyshev machinery ---------------------------------------------------

@dataclass(frozen=True)
class ChebSequenceState:
    """Half traces at one frequency: ``z0 = tr T(a)/2``, ``z1 = tr T(a)T(b)/2``, ``zinf = tr T(b)/2``."""

    z0: float
    z1: float
    zinf: float

    @classmethod
    def from_matrices(cls, Ta: np.ndarray, Tb: np.ndarray) -> "ChebSequenceState":
        return cls(float(0.5 * np.trace(Ta)), float(0.5 * np.trace(Ta @ Tb)), float(0.5 * np.trace(Tb)))


def chebyshev_u(r: int, x):
    """Chebyshev polynomial of the second kind by forward recursion, ``U_-1 = 0``."""
    if r < -1:
        raise ValueError("order must be >= -1")
    x = np.asarray(x, dtype=float)
    if r == -1:
        return np.zeros_like(x)
    u_prev, u = np.zeros_like(x), np.ones_like(x)
    for _ in range(r):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u


def cheb_z_iterate(state: ChebSequenceState, r_max: int) -> List[float]:
    """``z_0 .. z_rmax`` from ``z_{r+1} = 2 zinf z_r - z_{r-1}``."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    zs = [state.z0, state.z1]
    for _ in range(r_max - 1):
        zs.append(2.0 * state.zinf * zs[-1] - zs[-2])
    return zs


def cheb_z_closed(state: ChebSequenceState, r: int) -> float:
    """``z_{r+1} = U_r(zinf) z1 - U_{r-1}(zinf) z0``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return float(chebyshev_u(r, state.zinf) * state.z1 - chebyshev_u(r - 1, state.zinf) * state.z0)


# -- interpolating families alpha_r ----------------------------------------

@dataclass(frozen=True)
class AlphaRSequence:
    prefix: ContinuedFraction
    r: int
    alpha: Fraction
    a: Fraction
    b: Fraction
    zeta: Fraction

    @property
    def size(self) -> int:
        return self.alpha.numerator + self.alpha.denominator


def _endpoints(prefix: ContinuedFraction) -> Tuple[int, int, int, int]:
    if len(prefix) < 1:
        raise ValueError("prefix needs at least one term")
    conv = convergents(prefix)
    nu_n, de_n = conv.pairs[-1]
    nu_m, de_m = conv.pairs[-2]
    return nu_n, de_n, nu_m, de_m


def alpha_r(prefix: CFLike, r: int) -> AlphaRSequence:
    """``alpha_r = [0; a_1, ..., a_n + r] = (nu_n + r nu_{n-1}) / (delta_n + r delta_{n-1})``."""
    prefix = _as_cf(prefix)
    if r < 0:
        raise ValueError("r must be >= 0")
    nu_n, de_n, nu_m, de_m = _endpoints(prefix)
    alpha = Fraction(nu_n + r * nu_m, de_n + r * de_m)
    return AlphaRSequence(prefix, r, alpha, Fraction(nu_n, de_n), Fraction(nu_m, de_m),
                          Fraction(de_n, de_n + r * de_m))


def zeta_r(prefix: CFLike, r: int) -> Fraction:
    """Normalized distance ``(alpha_r - b) / (a - b) = delta_n / (delta_n + r delta_{n-1})``."""
    return alpha_r(prefix, r).zeta


def size_law(prefix: CFLike, r: int) -> Tuple[int, int, int]:
    """``(N(alpha_r), N(a), N(b))``; ``N(alpha_r) = N(a) + r N(b)`` holds exactly."""
    prefix = _as_cf(prefix)
    nu_n, de_n, nu_m, de_m = _endpoints(prefix)
    return (nu_n + r * nu_m) + (de_n + r * de_m), nu_n + de_n, nu_m + de_m


def tau_r(Ta: np.ndarray, Tb: np.ndarray, r: int) -> np.ndarray:
    """``T(a) T(b)**r``, the supercell matrix of ``alpha_r``."""
    return Ta @ mat_power(Tb, r)
