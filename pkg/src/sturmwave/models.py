"""Element transfer matrices for the waveguide models.

All ``*_tm`` functions accept a scalar frequency or an array of frequencies and
return a matrix of shape ``(2, 2)``/``(4, 4)`` or a stack ``(len(omega), n, n)``.

State vectors are ``(u, f)`` for chains and rods and ``(W, phi, V, M)`` for
Timoshenko beams. Units are whatever the caller uses consistently; nothing is
converted.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

logger = logging.getLogger(__name__)

CLOSED_FORM_RTOL = 1e-6


def _freq(omega) -> np.ndarray:
    """Frequencies as a float array; complex input is kept for complex-step derivatives."""
    omega = np.asarray(omega)
    return omega.astype(complex if np.iscomplexobj(omega) else float)


@dataclass(frozen=True)
class ChainElement:
    """One mass ``m`` (kg) joined by a spring ``K`` (N/m)."""

    m: float
    K: float

    def __post_init__(self):
        if self.m <= 0 or self.K <= 0:
            raise ValueError("chain element needs m > 0 and K > 0")


@dataclass(frozen=True)
class RodElement:
    """Axial rod segment: stiffness ``EA`` (N), mass per length ``rhoA`` (kg/m), length ``l`` (m)."""

    EA: float
    rhoA: float
    l: float

    def __post_init__(self):
        if min(self.EA, self.rhoA, self.l) <= 0:
            raise ValueError("rod element parameters must be positive")

    @property
    def c(self) -> float:
        return math.sqrt(self.EA / self.rhoA)

    def mu(self, omega):
        return _freq(omega) * self.l * math.sqrt(self.rhoA / self.EA)


@dataclass(frozen=True)
class BeamElement:
    """Timoshenko beam segment.

    Attributes
    ----------
    EI : float
        Bending stiffness (N m^2).
    GA : float
        Shear stiffness (N).
    rhoA : float
        Mass per unit length (kg/m).
    rhoI : float
        Rotational inertia per unit length (kg m).
    l : float
        Segment length (m).
    """

    EI: float
    GA: float
    rhoA: float
    rhoI: float
    l: float

    def __post_init__(self):
        if min(self.EI, self.GA, self.rhoA, self.rhoI, self.l) <= 0:
            raise ValueError("beam element parameters must be positive")

    def wavenumbers(self, omega):
        """``(kappa_b, kappa_s)`` of free bending and shear waves."""
        omega = np.asarray(omega, dtype=float)
        return omega * math.sqrt(self.rhoI / self.EI), omega * math.sqrt(self.rhoA / self.GA)


@dataclass(frozen=True)
class SpringSupport:
    K: float

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("support stiffness must be >= 0")


# -- matrix exponential ---------------------------------------------------

_TAYLOR_ORDER = 18


def _balance(W: np.ndarray, sweeps: int = 8) -> np.ndarray:
    """Power-of-two diagonal scaling ``d`` so that ``diag(d) W diag(1/d)`` is balanced."""
    n = W.shape[-1]
    d = np.ones(W.shape[:-1])
    A = W.copy()
    for _ in range(sweeps):
        changed = False
        for i in range(n):
            col = np.abs(A[..., :, i]).sum(axis=-1) - np.abs(A[..., i, i])
            row = np.abs(A[..., i, :]).sum(axis=-1) - np.abs(A[..., i, i])
            ok = (col > 0) & (row > 0)
            f = np.where(ok, np.exp2(np.round(0.5 * np.log2(np.where(ok, row / np.where(ok, col, 1), 1)))), 1.0)
            if np.any(f != 1.0):
                changed = True
                # A <- S A S^-1 with S = diag(..., 1/f at i, ...)
                A[..., i, :] /= f[..., None]
                A[..., :, i] *= f[..., None]
                d[..., i] /= f
        if not changed:
            break
    return d


def expm_oracle(W: np.ndarray, l: float = 1.0) -> np.ndarray:
    """``exp(W l)`` by balancing, scaling and squaring around a Taylor core.

    Works on a single square matrix or a stack of them. Raises on non-finite
    input or output.
    """
    A = np.asarray(W, dtype=float) * l
    if A.shape[-1] != A.shape[-2]:
        raise ValueError("expm needs square matrices")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite entries in exponent")
    d = _balance(A)
    B = A * d[..., :, None] / d[..., None, :]
    norm = np.max(np.abs(B).sum(axis=-2)) if B.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.25)))) if norm > 0.25 else 0
    B = B / 2.0 ** squarings
    eye = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    term = eye.copy()
    out = eye.copy()
    for k in range(1, _TAYLOR_ORDER + 1):
        term = term @ B / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    out = out / d[..., :, None] * d[..., None, :]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matrix exponential overflowed")
    return out


# -- element matrices ------------------------------------------------------

def chain_tm(e: ChainElement, omega) -> np.ndarray:
    """``[[1, 1/K], [-m w^2, 1 - m w^2 / K]]`` (spring then mass)."""
    omega = _freq(omega)
    mw2 = e.m * omega ** 2
    T = np.empty(omega.shape + (2, 2), dtype=omega.dtype)
    T[..., 0, 0] = 1.0
    T[..., 0, 1] = 1.0 / e.K
    T[..., 1, 0] = -mw2
    T[..., 1, 1] = 1.0 - mw2 / e.K
    return T


def rod_W(e: RodElement, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    W = np.zeros(omega.shape + (2, 2))
    W[..., 0, 1] = 1.0 / e.EA
    W[..., 1, 0] = -e.rhoA * omega ** 2
    return W


def rod_tm(e: RodElement, omega) -> np.ndarray:
    """Closed form of ``exp(W l)`` for an axial rod segment, exact at ``omega = 0``."""
    mu = e.mu(omega)
    sinc = np.sinc(mu / np.pi)  # sin(mu)/mu with the mu -> 0 limit
    cos = np.cos(mu)
    T = np.empty(mu.shape + (2, 2), dtype=mu.dtype)
    T[..., 0, 0] = cos
    T[..., 0, 1] = (e.l / e.EA) * sinc
    T[..., 1, 0] = -(e.EA / e.l) * mu ** 2 * sinc
    T[..., 1, 1] = cos
    return T


def beam_W(e: BeamElement, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    w2 = omega ** 2
    W = np.zeros(omega.shape + (4, 4))
    W[..., 0, 1] = 1.0
    W[..., 0, 2] = 1.0 / e.GA
    W[..., 1, 3] = 1.0 / e.EI
    W[..., 2, 0] = -e.rhoA * w2
    W[..., 3, 1] = -e.rhoI * w2
    return W


def beam_tm_closed(e: BeamElement, omega) -> np.ndarray:
    """Printed closed form of the beam exponential.

    Only meaningful for ``omega > 0`` and ``kappa_b != kappa_s``; kept as a
    cross-check and never used as the authoritative matrix.
    """
    omega = np.asarray(omega, dtype=float)
    kb, ks = e.wavenumbers(omega)
    l = e.l
    w2 = omega ** 2
    cb, sb = np.cos(kb * l), np.sin(kb * l)
    cs, ss = np.cos(ks * l), np.sin(ks * l)
    dk = kb ** 2 - ks ** 2
    mixed = (kb * sb - ks * ss) / dk
    T = np.zeros(omega.shape + (4, 4))
    T[..., 0, 0] = cs
    T[..., 0, 1] = mixed
    T[..., 0, 2] = ks * ss / (e.rhoA * w2)
    T[..., 0, 3] = kb ** 2 * (cs - cb) / (e.rhoI * w2 * dk)
    T[..., 1, 1] = cb
    T[..., 1, 3] = kb * sb / (e.rhoI * w2)
    T[..., 2, 0] = -e.rhoA * w2 * ss / ks
    T[..., 2, 1] = -e.rhoI * w2 * (cs - cb) / (kb ** 2 * dk)
    T[..., 2, 2] = cs
    T[..., 2, 3] = (kb * e.rhoA) / (ks * e.rhoI) * mixed
    T[..., 3, 1] = -e.rhoI * w2 * sb / kb
    T[..., 3, 3] = cb
    return T


def beam_tm(e: BeamElement, omega, cross_check: bool = True) -> np.ndarray:
    """``exp(W l)`` of a Timoshenko segment, evaluated with :func:`expm_oracle`.

    With ``cross_check`` the printed closed form is evaluated wherever it is
    defined and relative discrepancies above ``CLOSED_FORM_RTOL`` are logged.
    """
    omega = np.asarray(omega, dtype=float)
    T = expm_oracle(beam_W(e, omega), e.l)
    if cross_check:
        kb, ks = e.wavenumbers(omega)
        usable = (omega > 0) & (np.abs(kb - ks) > 1e-9 * np.maximum(kb, ks))
        if np.any(usable):
            with np.errstate(divide="ignore", invalid="ignore"):
                C = beam_tm_closed(e, omega)
            err = np.linalg.norm(C - T, axis=(-2, -1)) / np.linalg.norm(T, axis=(-2, -1))
            err = np.where(usable, err, 0.0)
            if np.any(err > CLOSED_FORM_RTOL):
                logger.debug("beam closed form deviates from exp(Wl) by up to %.3g (relative)",
                             float(np.nanmax(err)))
    return T


def spring_tm(s: SpringSupport) -> np.ndarray:
    T = np.eye(4)
    T[2, 0] = -s.K
    return T


def supported_beam_tm(beam: BeamElement, support: SpringSupport, omega) -> np.ndarray:
    """Support at the upstream node followed by the span: ``T_beam @ T(K)``."""
    return beam_tm(beam, omega) @ spring_tm(support)


# -- rod closed-form spectra -----------------------------------------------

def rod_zr_closed(lam: float, r: int, omega, l: float = 1.0, c_q: float = 1.0):
    """Half trace of ``T_q T_p**r`` for rods with ``EA_p = lam^2 EA_q`` and equal ``rhoA``.

    The phase argument is ``omega l / c_q``.
    """
    if lam <= 0 or r < 0:
        raise ValueError("need lam > 0 and r >= 0")
    phase = np.asarray(omega, dtype=float) * l / c_q
    plus = (1.0 + lam) ** 2 / (4.0 * lam)
    minus = (1.0 - lam) ** 2 / (4.0 * lam)
    return plus * np.cos((lam + r) / lam * phase) - minus * np.cos((lam - r) / lam * phase)


def rod_Z_alpha(lam: float, alpha, omega, l: float = 1.0, c_q: float = 1.0):
    """The rod half trace with ``r`` replaced by ``1/alpha`` for real ``alpha`` in (0, 1].

    Broadcasts over ``alpha`` and ``omega``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be > 0")
    if lam <= 0:
        raise ValueError("lam must be > 0")
    phase = np.asarray(omega, dtype=float) * l / c_q
    al = alpha * lam
    plus = (1.0 + lam) ** 2 / (4.0 * lam)
    minus = (1.0 - lam) ** 2 / (4.0 * lam)
    return plus * np.cos((al + 1.0) / al * phase) - minus * np.cos((al - 1.0) / al * phase)


# -- model specification ---------------------------------------------------

MODEL_FIELDS: Dict[str, Tuple[str, ...]] = {
    "chain": ("m", "K"),
    "rod": ("EA", "rhoA", "l"),
    "beam": ("EI", "GA", "rhoA", "rhoI", "l"),
    "beam-on-supports": ("EI", "GA", "rhoA", "rhoI", "l", "K"),
}


class ModelSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A two-valued waveguide: every field fixed except ``varied``, which is ``theta_p`` or ``theta_q``."""

    kind: str
    params: Dict[str, float] = field(default_factory=dict)
    varied: str = ""
    theta_p: float = 1.0
    theta_q: float = 1.0

    def __post_init__(self):
        if self.kind not in MODEL_FIELDS:
            raise ModelSpecError(f"unknown model kind {self.kind!r}; expected one of {sorted(MODEL_FIELDS)}")
        fields = MODEL_FIELDS[self.kind]
        if self.varied not in fields:
            raise ModelSpecError(f"varied field {self.varied!r} is not a {self.kind} parameter {fields}")
        unknown = set(self.params) - set(fields)
        if unknown:
            raise ModelSpecError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        missing = [f for f in fields if f != self.varied and f not in self.params]
        if missing:
            raise ModelSpecError(f"missing {self.kind} parameters: {missing}")
        if self.varied in self.params:
            raise ModelSpecError(f"{self.varied!r} is varied; give it via theta_p/theta_q, not params")
        params = {k: float(v) for k, v in self.params.items()}
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "theta_p", float(self.theta_p))
        object.__setattr__(self, "theta_q", float(self.theta_q))
        # validate both parameter sets eagerly
        self.element("p")
        self.element("q")

    @property
    def size(self) -> int:
        return 4 if self.kind.startswith("beam") else 2

    def values(self, which: str) -> Dict[str, float]:
        theta = {"p": self.theta_p, "q": self.theta_q}[which]
        return {**self.params, self.varied: theta}

    def element(self, which: str):
        v = self.values(which)
        try:
            if self.kind == "chain":
                return ChainElement(v["m"], v["K"])
            if self.kind == "rod":
                return RodElement(v["EA"], v["rhoA"], v["l"])
            beam = BeamElement(v["EI"], v["GA"], v["rhoA"], v["rhoI"], v["l"])
            if self.kind == "beam":
                return beam
            return beam, SpringSupport(v["K"])
        except ValueError as exc:
            raise ModelSpecError(f"{which}-element: {exc}") from None

    def with_thetas(self, theta_p: float, theta_q: float) -> "ModelSpec":
        return replace(self, theta_p=theta_p, theta_q=theta_q)

    @classmethod
    def from_mapping(cls, data: dict) -> "ModelSpec":
        """Build from the configuration schema (``kind``, ``varied``, ``theta_p``, ``theta_q``, ``[params]``)."""
        missing = [k for k in ("kind", "varied", "theta_p", "theta_q") if k not in data]
        if missing:
            raise ModelSpecError(f"config is missing keys: {missing}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ModelSpecError("'params' must be a table of numbers")
        for k, v in list(params.items()) + [("theta_p", data["theta_p"]), ("theta_q", data["theta_q"])]:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelSpecError(f"{k!r} must be a number, got {v!r}")
        return cls(str(data["kind"]), dict(params), str(data["varied"]), data["theta_p"], data["theta_q"])


def element_tm(spec: ModelSpec, which: str, omega) -> np.ndarray:
    el = spec.element(which)
    if spec.kind == "chain":
        return chain_tm(el, omega)
    if spec.kind == "rod":
        return rod_tm(el, omega)
    if spec.kind == "beam":
        return beam_tm(el, omega)
    beam, support = el
    return supported_beam_tm(beam, support, omega)


def element_tms(spec: ModelSpec, omega) -> Tuple[np.ndarray, np.ndarray]:
    """``(T_p, T_q)`` at the given frequency or frequencies."""
    return element_tm(spec, "p", omega), element_tm(spec, "q", omega)


# reproduction defaults
def chain_spec(K_p: float = 1.0, K_q: float = 2.0, m: float = 1.0) -> ModelSpec:
    return ModelSpec("chain", {"m": m}, "K", K_p, K_q)


def rod_spec(lam: float = 2.0, EA_q: float = 1.0, rhoA: float = 1.0, l: float = 1.0) -> ModelSpec:
    return ModelSpec("rod", {"rhoA": rhoA, "l": l}, "EA", lam ** 2 * EA_q, EA_q)


BEAM_CASES: Dict[str, ModelSpec] = {
    "a": ModelSpec("beam", {"GA": 3.0, "rhoA": 0.010, "rhoI": 8.33e-6, "l": 1.0}, "EI", 0.2500, 0.0083),
    "b": ModelSpec("beam", {"EI": 0.0083, "GA": 3.0, "rhoI": 8.33e-6, "l": 1.0}, "rhoA", 0.160, 0.010),
    "c": ModelSpec("beam-on-supports", {"EI": 8.33, "GA": 3.33e3, "rhoA": 0.010, "rhoI": 8.33e-6, "l": 1.0},
                   "K", 6.67e3, 8.33),
    "d": ModelSpec("beam-on-supports", {"EI": 8.33, "GA": 3.33e3, "rhoA": 0.010, "rhoI": 8.33e-6, "K": 6.67e3},
                   "l", 4.0, 1.0),
}
