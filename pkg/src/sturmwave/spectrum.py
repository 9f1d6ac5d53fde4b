"""Passbands, bulk spectra over the (alpha, omega) plane, and alpha_r sequences."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .models import ModelSpec, element_tms
from .numbers import ContinuedFraction, RationalLike, as_generator, cf_from_rational
from .tmm import (admitted_2x2, admitted_branches, alpha_r, branches_from_scaled, compound2, cos_kL_2x2,
                  cos_kL_4x4,
                  half_trace_scaled, size_law, supercell_scaled, supercell_tm, supercell_tm_direct)
from .words import CFLike, _as_cf, sturmian_block

logger = logging.getLogger(__name__)

SAMPLES_PER_ELEMENT = 40
REFINE_TOL = 1e-9
# |cos kL| up to 1 + ADMIT_TOL counts as admitted (round-off at band edges)
ADMIT_TOL = 1e-9
MAX_GRID_CELLS = 400_000_000

Interval = Tuple[float, float]


class GridTooLargeError(MemoryError):
    pass


# -- dispersion evaluation --------------------------------------------------

def supercell_for(spec: ModelSpec, alpha: RationalLike, omega) -> np.ndarray:
    T_p, T_q = element_tms(spec, omega)
    return supercell_tm(cf_from_rational(alpha), T_p, T_q)


class ElementStack:
    """Element matrices on a frequency grid, plus their compounds for 4x4 models."""

    def __init__(self, spec: ModelSpec, omega):
        self.T_p, self.T_q = element_tms(spec, omega)
        self.size = self.T_p.shape[-1]
        if self.size == 4:
            self.C_p, self.C_q = compound2(self.T_p), compound2(self.T_q)

    def values(self, cf: ContinuedFraction):
        """``cos(kappa L)``: real array (2x2) or ``(plus, minus)`` complex branches (4x4).

        4x4 branches are evaluated without forming the raw product (see
        :func:`sturmwave.tmm.branches_from_scaled`), so long supercells deep
        in a stopband neither overflow nor swamp the propagating branch.
        """
        if self.size == 2:
            return cos_kL_2x2(supercell_tm(cf, self.T_p, self.T_q))
        return branches_from_scaled(supercell_scaled(cf, self.T_p, self.T_q),
                                    supercell_scaled(cf, self.C_p, self.C_q))

    def admitted(self, cf: ContinuedFraction, tol: float) -> np.ndarray:
        v = self.values(cf)
        if self.size == 2:
            with np.errstate(invalid="ignore"):
                return np.abs(v) <= 1.0 + tol
        return admitted_branches(v[0], v[1], tol)


def dispersion(spec: ModelSpec, alpha: RationalLike, omega):
    """``cos(kappa L)`` at each frequency.

    A real array for 2x2 models; a pair of complex arrays (the two branches)
    for 4x4 models.
    """
    return ElementStack(spec, omega).values(cf_from_rational(alpha))


def admitted(spec: ModelSpec, alpha: RationalLike, omega, tol: float = ADMIT_TOL) -> np.ndarray:
    return ElementStack(spec, omega).admitted(cf_from_rational(alpha), tol)


# -- passbands for one alpha -----------------------------------------------

@dataclass(frozen=True)
class BandList:
    alpha: Fraction
    intervals: Tuple[Interval, ...]
    sparse_warning: bool = False
    # rounding in the supercell half trace may exceed the width of the
    # narrowest features: edges are then only as good as the trace itself
    ill_conditioned: bool = False

    @property
    def band_count(self) -> int:
        return len(self.intervals)

    @property
    def measure(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    def merged(self, gap: float) -> "BandList":
        return BandList(self.alpha, tuple(merge_intervals(self.intervals, gap)), self.sparse_warning,
                        self.ill_conditioned)


def merge_intervals(intervals: Iterable[Interval], gap: float = 0.0) -> List[Interval]:
    out: List[List[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo - out[-1][1] <= gap:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def intersection_measure(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    total = 0.0
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def _bisect_many(state: Callable[[np.ndarray, np.ndarray], np.ndarray], lo: np.ndarray,
                 hi: np.ndarray, tol: float, max_iter: int = 200,
                 lo_state: Optional[np.ndarray] = None) -> np.ndarray:
    """Vectorized bisection on a boolean ``state(x, idx)`` that differs at ``lo`` and ``hi``.

    ``idx`` holds the positions of ``x`` in the original bracket arrays so the
    predicate may depend on per-bracket data. ``tol = 0`` bisects to float
    resolution. ``lo_state`` overrides the state at ``lo`` where it is known
    but numerically ambiguous.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    s_lo = state(lo, np.arange(lo.size)) if lo_state is None else np.asarray(lo_state, dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        live = np.flatnonzero((hi - lo > tol) & (mid > lo) & (mid < hi))
        if live.size == 0:
            break
        same = state(mid[live], live) == s_lo[live]
        lo[live] = np.where(same, mid[live], lo[live])
        hi[live] = np.where(same, hi[live], mid[live])
    return 0.5 * (lo + hi)


def dirichlet_count(spec: ModelSpec, word: str, omega) -> np.ndarray:
    """Zeros of the displacement along one supercell for the solution with ``u(0) = 0``.

    This counts the eigenfrequencies below ``omega`` of the supercell clamped
    at both ends. Every gap closure of the periodic spectrum holds exactly one
    of them, so the count is constant on a passband and equals its 0-based
    index. Chains count sign changes of the node displacements; rods count
    the phase ``atan2(kappa EA u, f)``, which advances by exactly
    ``omega l / c`` across a uniform segment, through multiples of pi.
    Only defined for chains and rods.
    """
    if spec.kind not in ("chain", "rod"):
        raise ValueError(f"no oscillation count for {spec.kind!r} models")
    omega = np.asarray(omega, dtype=float)
    T = dict(zip("pq", element_tms(spec, omega)))
    u = np.zeros_like(omega)
    f = np.ones_like(omega)
    count = np.zeros(omega.shape, dtype=np.int64)
    if spec.kind == "chain":
        entries = {ch: (t[..., 0, 0], t[..., 0, 1], t[..., 1, 0], t[..., 1, 1]) for ch, t in T.items()}
        positive = np.ones(omega.shape, dtype=bool)
        for j, ch in enumerate(word):
            a, b, c, d = entries[ch]
            u, f = a * u + b * f, c * u + d * f
            # u == 0 keeps the previous sign
            now = np.where(u == 0, positive, u > 0)
            count += now != positive
            positive = now
            if j % 8 == 7:
                scale = np.maximum(np.abs(u), np.abs(f))
                u, f = u / scale, f / scale
        return count
    els = {ch: spec.element(ch) for ch in "pq"}
    for ch in word:
        e, t = els[ch], T[ch]
        mu = e.mu(omega)
        psi = np.arctan2(e.EA * (mu / e.l) * u, f)
        count += (np.floor((psi + mu) / np.pi) - np.floor(psi / np.pi)).astype(np.int64)
        u, f = t[..., 0, 0] * u + t[..., 0, 1] * f, t[..., 1, 0] * u + t[..., 1, 1] * f
        scale = np.maximum(np.abs(u), np.abs(f))
        u, f = u / scale, f / scale
    return count


class _Evaluator:
    """Supercell quantities of one alpha at arbitrary frequency arrays."""

    def __init__(self, spec: ModelSpec, cf: ContinuedFraction, admit_tol: float, direct: bool = False):
        self.spec, self.cf, self.tol, self.direct = spec, cf, admit_tol, direct
        self.word = sturmian_block(cf).symbols

    def matrices(self, w) -> np.ndarray:
        T_p, T_q = element_tms(self.spec, w)
        if self.direct:
            return supercell_tm_direct(self.word, T_p, T_q)
        return supercell_tm(self.cf, T_p, T_q)

    def admitted(self, w, _idx=None) -> np.ndarray:
        if self.direct:
            T = self.matrices(w)
            if T.shape[-1] == 2:
                return admitted_2x2(T, self.tol)
            return admitted_branches(*cos_kL_4x4(T, check=False), self.tol)
        return ElementStack(self.spec, w).admitted(self.cf, self.tol)

    def z(self, w) -> np.ndarray:
        z = cos_kL_2x2(self.matrices(w))
        bad = ~np.isfinite(z)
        if np.any(bad):
            # the sign of z in deep stopbands still matters for bracketing
            T_p, T_q = element_tms(self.spec, np.asarray(w)[bad])
            z[bad] = half_trace_scaled(self.word, T_p, T_q)
        return z

    def count(self, w) -> np.ndarray:
        return dirichlet_count(self.spec, self.word, w)

    def trace_noise(self, w) -> np.ndarray:
        """Spread of ``z`` over three evaluation orders: recursion, direct product
        and the direct product of the word rotated by half its length.

        The trace is invariant under all three, so the spread measures rounding.
        """
        T_p, T_q = element_tms(self.spec, w)
        with np.errstate(over="ignore", invalid="ignore"):
            z = cos_kL_2x2(supercell_tm(self.cf, T_p, T_q))
            half = len(self.word) // 2
            others = [cos_kL_2x2(supercell_tm_direct(word, T_p, T_q))
                      for word in (self.word, self.word[half:] + self.word[:half])]
            return np.max(np.abs(np.stack(others) - z), axis=0)


def _exact_bands(ev: _Evaluator, w_lo: float, w_hi: float, tol: float) -> Tuple[List[Interval], float]:
    """Passbands of a chain or rod supercell without any sampling.

    The clamped eigenfrequencies (jumps of :func:`dirichlet_count`) split the
    range into brackets, and the bracket between the ``k``-th and
    ``(k+1)``-th of them holds exactly band ``k``. The half trace ``z``
    starts every band at ``(-1)**k`` and ends it at ``-(-1)**k``, so its sign
    at a clamped point is known without evaluating it; only the two range
    ends need a computed sign. The band is located at the zero of ``z`` and
    its edges are the switches of ``s_L z > 1`` and ``s_R z > 1`` on either
    side.

    Also returns the largest edge uncertainty: the rounding level of ``z``
    (see :meth:`_Evaluator.trace_noise`) at a band centre times the band width,
    since ``z`` sweeps through ``[-1, 1]`` across the band.
    """
    ends = np.array([w_lo, w_hi])
    d_lo, d_hi = ev.count(ends)
    levels = np.arange(d_lo + 1, d_hi + 1)
    clamped = _bisect_many(lambda x, sel: ev.count(x) >= levels[sel],
                           np.full(levels.size, w_lo), np.full(levels.size, w_hi), tol)
    L = np.concatenate([[w_lo], clamped])
    R = np.concatenate([clamped, [w_hi]])
    k = d_lo + np.arange(L.size)
    parity = np.where(k % 2 == 0, 1.0, -1.0)
    sL, sR = parity.copy(), -parity

    z_ends = ev.z(ends)
    admL = np.zeros(L.size, dtype=bool)
    admR = np.zeros(R.size, dtype=bool)
    admL[0] = abs(z_ends[0]) <= 1.0 + ev.tol
    admR[-1] = abs(z_ends[1]) <= 1.0 + ev.tol
    # a range end sitting in a gap: band 0 of the bracket lies ahead of w_lo
    # iff z still has the sign of the gap before it, and the last band lies
    # behind w_hi iff z already has the sign of the gap after it
    has = np.ones(L.size, dtype=bool)
    if not admL[0]:
        sL[0] = np.sign(z_ends[0])
        has[0] = sL[0] == parity[0]
    if not admR[-1]:
        sR[-1] = np.sign(z_ends[1])
        has[-1] &= sR[-1] == -parity[-1]
    has |= admL | admR

    cross = has & ~admL & ~admR
    c = np.where(admL, L, R)
    idx = np.flatnonzero(cross)
    c[idx] = _bisect_many(lambda x, sel: ev.z(x) > 0, L[idx], R[idx], 0.0, lo_state=sL[idx] > 0)

    lo = L.copy()
    idx = np.flatnonzero(has & ~admL)
    lo[idx] = _bisect_many(lambda x, sel: sL[idx][sel] * ev.z(x) > 1.0, L[idx], c[idx], tol,
                           lo_state=np.ones(idx.size, dtype=bool))
    hi = R.copy()
    idx = np.flatnonzero(has & ~admR)
    hi[idx] = _bisect_many(lambda x, sel: sR[idx][sel] * ev.z(x) <= 1.0, c[idx], R[idx], tol,
                           lo_state=np.ones(idx.size, dtype=bool))
    with np.errstate(invalid="ignore"):
        slack = ev.trace_noise(c[has]) * np.maximum(hi[has] - lo[has], tol)
        noise = float(np.max(slack, initial=0.0))
    return [(a, b) for a, b, h in zip(lo.tolist(), hi.tolist(), has.tolist()) if h], noise


def passbands(spec: ModelSpec, alpha: RationalLike, omega_range: Tuple[float, float],
              coarse_steps: Optional[int] = None, refine_tol: float = REFINE_TOL,
              admit_tol: float = ADMIT_TOL, direct: bool = False) -> BandList:
    """Passbands of the supercell of ``alpha`` inside ``omega_range``.

    The dispersion function is sampled on a uniform grid (default
    ``SAMPLES_PER_ELEMENT * N(alpha)`` points) and every admitted/blocked
    transition is refined by bisection to ``refine_tol``. Chains and rods do
    not need the grid: their bands are bracketed exactly by the clamped
    eigenfrequencies (see :func:`_exact_bands`), so narrow bands and gaps are
    found down to the rounding level of the half trace; ``ill_conditioned``
    marks results where that rounding may move an edge by more than
    ``refine_tol``. Beam spectra rely on the grid. Bands separated by
    less than ``refine_tol`` are merged. ``sparse_warning`` is set when a band is
    narrower than two grid steps. ``direct`` multiplies out the explicit word
    instead of using the block recursion (a brute-force cross-check).
    """
    alpha = as_generator(alpha)
    w_lo, w_hi = map(float, omega_range)
    if not w_hi > w_lo:
        raise ValueError("omega_range must be increasing")
    if refine_tol <= 0:
        raise ValueError("refine_tol must be positive")
    cf = cf_from_rational(alpha)
    n_cell = alpha.numerator + alpha.denominator
    steps = coarse_steps or max(2, SAMPLES_PER_ELEMENT * n_cell)
    grid = np.linspace(w_lo, w_hi, steps)
    ev = _Evaluator(spec, cf, admit_tol, direct)

    if spec.kind in ("chain", "rod"):
        intervals, slack = _exact_bands(ev, w_lo, w_hi, refine_tol)
        intervals = merge_intervals([iv for iv in intervals if iv[1] >= iv[0]], refine_tol)
        ill = not slack <= refine_tol
        if ill:
            logger.info("alpha=%s: band edges uncertain by up to %.2g from half-trace rounding", alpha, slack)
        return BandList(alpha, tuple(intervals), False, ill)

    adm = ev.admitted(grid)
    flip = np.flatnonzero(adm[:-1] != adm[1:])
    edges = _bisect_many(ev.admitted, grid[flip], grid[flip + 1], refine_tol)
    rising = adm[flip + 1]

    intervals: List[Interval] = []
    start = w_lo if adm[0] else None
    for edge, up in zip(edges.tolist(), rising.tolist()):
        if up:
            start = edge
        else:
            intervals.append((start, edge))
            start = None
    if start is not None:
        intervals.append((start, w_hi))

    intervals = merge_intervals([iv for iv in intervals if iv[1] > iv[0]], refine_tol)
    step = (w_hi - w_lo) / (steps - 1)
    sparse = any(hi - lo < 2 * step for lo, hi in intervals)
    if sparse:
        logger.debug("alpha=%s: band narrower than two grid steps; coarse grid may be too sparse", alpha)
    return BandList(alpha, tuple(intervals), sparse)


def band_count_check(bands: BandList, alpha: Optional[RationalLike] = None,
                     refine_tol: float = REFINE_TOL) -> bool:
    """True iff the number of (touch-merged) bands equals the supercell size ``nu + delta``."""
    alpha = as_generator(bands.alpha if alpha is None else alpha)
    return bands.merged(refine_tol).band_count == alpha.numerator + alpha.denominator


# -- bulk spectrum -------------------------------------------------------

@dataclass
class BulkGrid:
    alpha_axis: List[Fraction]
    omega_axis: np.ndarray
    admitted: np.ndarray  # (len(alpha_axis), len(omega_axis)) bool

    def column(self, alpha: RationalLike) -> np.ndarray:
        return self.admitted[self.alpha_axis.index(as_generator(alpha))]


def alpha_axis(M: int) -> List[Fraction]:
    if M < 1:
        raise ValueError("M must be >= 1")
    return [Fraction(i, M) for i in range(M + 1)]


_WORKER_STATE: dict = {}


def _init_worker(stack: ElementStack, tol: float) -> None:
    _WORKER_STATE.update(stack=stack, tol=tol)


def _column(alpha: Fraction, stack: ElementStack, tol: float) -> np.ndarray:
    return stack.admitted(cf_from_rational(alpha), tol)


def _worker_columns(alphas: Sequence[Fraction]) -> np.ndarray:
    s = _WORKER_STATE
    return np.stack([_column(a, s["stack"], s["tol"]) for a in alphas])


def _chunks(seq: Sequence, size: int) -> List[Sequence]:
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def iter_bulk_rows(spec: ModelSpec, alphas: Sequence[Fraction], omega: np.ndarray,
                   workers: int = 1, chunk: int = 16,
                   admit_tol: float = ADMIT_TOL) -> Iterator[Tuple[Fraction, np.ndarray]]:
    """Yield ``(alpha, admitted row)`` in input order, computing columns in parallel."""
    stack = ElementStack(spec, np.asarray(omega, dtype=float))
    if workers <= 1:
        for a in alphas:
            yield a, _column(a, stack, admit_tol)
        return
    blocks = _chunks(list(alphas), chunk)
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(stack, admit_tol)) as pool:
        for block, rows in zip(blocks, pool.map(_worker_columns, blocks)):
            yield from zip(block, rows)


def bulk_spectrum(spec: ModelSpec, M: int, omega_range: Tuple[float, float], omega_steps: int,
                  workers: int = 1, admit_tol: float = ADMIT_TOL,
                  max_cells: int = MAX_GRID_CELLS) -> BulkGrid:
    """Admissibility grid over ``alpha = i/M`` and a uniform frequency grid.

    Columns are independent and are farmed out to ``workers`` processes; the
    result does not depend on the worker count.
    """
    if omega_steps < 2:
        raise ValueError("omega_steps must be >= 2")
    alphas = alpha_axis(M)
    cells = len(alphas) * omega_steps
    if cells > max_cells:
        raise GridTooLargeError(
            f"grid of {cells} cells exceeds {max_cells}; stream it with iter_bulk_rows "
            f"(as the bulk command does) or reduce M / omega steps")
    omega = np.linspace(float(omega_range[0]), float(omega_range[1]), omega_steps)
    grid = np.zeros((len(alphas), omega_steps), dtype=bool)
    for i, (_, row) in enumerate(iter_bulk_rows(spec, alphas, omega, workers, admit_tol=admit_tol)):
        grid[i] = row
    return BulkGrid(alphas, omega, grid)


# -- self-similarity along alpha_r ------------------------------------------

@dataclass(frozen=True)
class SelfSimEntry:
    r: int
    alpha: Fraction
    zeta: Fraction
    size: int
    bands: BandList
    outside_measure: float  # passband measure outside the limit system's passbands
    inside_fraction: float


@dataclass
class SelfSimReport:
    prefix: ContinuedFraction
    a: Fraction
    b: Fraction
    limit_bands: BandList
    entries: List[SelfSimEntry] = field(default_factory=list)

    def outside_measures(self) -> List[float]:
        return [e.outside_measure for e in self.entries]

    def band_counts(self) -> List[int]:
        return [e.bands.band_count for e in self.entries]


def selfsim_sequence(prefix: CFLike, r_max: int, spec: ModelSpec, omega_range: Tuple[float, float],
                     steps: Optional[int] = None, r_values: Optional[Sequence[int]] = None,
                     refine_tol: float = REFINE_TOL) -> SelfSimReport:
    """Band lists along ``alpha_r = [0; a_1, ..., a_n + r]`` for ``r = 0 .. r_max``.

    Each entry records how much of its passband measure lies outside the
    passbands of the limit ``b = alpha_inf``. ``steps`` fixes the coarse
    sampling for every member; by default it scales with each supercell.
    """
    prefix = _as_cf(prefix)
    if len(prefix) < 1:
        raise ValueError("prefix needs at least one term")
    if r_max < 1 and r_values is None:
        raise ValueError("r_max must be >= 1")
    rs = list(range(r_max + 1)) if r_values is None else sorted(set(r_values))
    first = alpha_r(prefix, 0)
    limit = passbands(spec, first.b, omega_range, steps, refine_tol)
    report = SelfSimReport(prefix, first.a, first.b, limit)
    for r in rs:
        seq = alpha_r(prefix, r)
        size, _, _ = size_law(prefix, r)
        bands = passbands(spec, seq.alpha, omega_range, steps, refine_tol)
        inside = intersection_measure(bands.intervals, limit.intervals)
        total = bands.measure
        report.entries.append(SelfSimEntry(r, seq.alpha, seq.zeta, size, bands,
                                           total - inside, inside / total if total > 0 else math.nan))
    return report
