"""Command-line front end.

Subcommands ``cf``, ``word``, ``dispersion``, ``bulk``, ``selfsim`` and
``zmap``. Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.

Model configurations are TOML files::

    kind = "chain"          # chain | rod | beam | beam-on-supports
    varied = "K"            # the field that differs between p and q
    theta_p = 1.0
    theta_q = 2.0

    [params]                # every other field of the model
    m = 1.0

    [sweep]                 # optional defaults for the numeric flags
    omega = [0.0, 3.0, 3000]
    M = 1000
    alpha = "2/7"

Without ``--config`` the chain with ``K_p = 1, K_q = 2, m = 1`` is used.
"""
from __future__ import annotations

import argparse
import contextlib
import math
import sys
import time
from fractions import Fraction
from typing import IO, Iterator, List, Optional, Sequence

import numpy as np

from . import output
from .models import ModelSpec, ModelSpecError, chain_spec, rod_Z_alpha
from .numbers import (ContinuedFraction, as_generator, best_rational_approx, cf_from_rational,
                      convergents, format_rational, parse_rational)
from .spectrum import REFINE_TOL, alpha_axis, dispersion, iter_bulk_rows, selfsim_sequence
from .words import block_history

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    """Bad arguments or configuration (exit code 2)."""


# -- config ------------------------------------------------------------------

class RunConfig:
    """A model plus the optional ``[sweep]`` defaults from a config file."""

    def __init__(self, spec: ModelSpec, sweep: Optional[dict] = None, source: str = "<default chain>"):
        self.spec = spec
        self.sweep = dict(sweep or {})
        self.source = source

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls(chain_spec(), {"omega": [0.0, 3.0, 3000]})
        with open(path, "rb") as fh:  # OSError propagates as an I/O failure
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise UsageError(f"{path}: invalid TOML: {exc}") from None
        sweep = data.pop("sweep", {})
        if not isinstance(sweep, dict):
            raise UsageError(f"{path}: [sweep] must be a table")
        unknown = set(data) - {"kind", "varied", "theta_p", "theta_q", "params"}
        if unknown:
            raise UsageError(f"{path}: unknown keys {sorted(unknown)}")
        try:
            spec = ModelSpec.from_mapping(data)
        except ModelSpecError as exc:
            raise UsageError(f"{path}: {exc}") from None
        return cls(spec, sweep, path)

    def omega(self, given: Optional[Sequence[str]], need_steps: bool = True):
        """``(lo, hi, steps)`` from the flag, else from ``[sweep].omega``."""
        if given is None:
            if "omega" not in self.sweep:
                raise UsageError("no frequency range: pass --omega MIN MAX STEPS or set [sweep].omega")
            given = [str(v) for v in self.sweep["omega"]]
        return parse_omega(given, need_steps)


def parse_omega(values: Sequence[str], need_steps: bool = True):
    if len(values) not in (2, 3) or (need_steps and len(values) != 3):
        raise UsageError("--omega takes MIN MAX STEPS" if need_steps else "--omega takes MIN MAX [STEPS]")
    try:
        lo, hi = float(values[0]), float(values[1])
        steps = int(values[2]) if len(values) == 3 else None
    except ValueError:
        raise UsageError(f"malformed --omega {' '.join(values)}") from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise UsageError("--omega needs MIN < MAX")
    if steps is not None and steps < 2:
        raise UsageError("--omega needs STEPS >= 2")
    return lo, hi, steps


def parse_generator(text: str, max_den: Optional[int] = None) -> Fraction:
    """``"p/q"`` exactly, or a decimal rounded to the best rational with denominator <= ``max_den``."""
    try:
        if "/" in text or text.strip().isdigit():
            return as_generator(parse_rational(text))
        x = float(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if max_den is None:
        raise UsageError(f"decimal {text!r} needs --max-den")
    try:
        return best_rational_approx(x, max_den)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_prefix(text: str) -> ContinuedFraction:
    """``"[0;1,2,2,2]"``, ``"[1,2,2,2]"`` or ``"1,2,2,2"``."""
    body = text.strip()
    try:
        if ";" in body:
            cf = ContinuedFraction.parse(body)
        else:
            body = body.strip("[]").strip()
            cf = ContinuedFraction(tuple(int(t) for t in body.split(",")) if body else ())
    except ValueError as exc:
        raise UsageError(f"malformed prefix {text!r}: {exc}") from None
    if len(cf) == 0:
        raise UsageError("prefix must have at least one term")
    return cf


@contextlib.contextmanager
def _open_text(path: Optional[str], default: IO[str]) -> Iterator[IO[str]]:
    if path is None or path == "-":
        yield default
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        yield fh


# -- subcommands -------------------------------------------------------------

def cmd_cf(args) -> int:
    alpha = parse_generator(args.alpha, args.max_den)
    cf = cf_from_rational(alpha)
    conv = convergents(cf)
    out = args.stdout
    out.write(f"alpha = {format_rational(alpha)}\n")
    out.write(f"cf = {cf}\n")
    out.write("terms = " + ",".join(map(str, cf.terms)) + "\n")
    out.write("k,a_k,nu_k,delta_k,convergent,N_k\n")
    for k, (nu, de) in enumerate(conv.pairs, start=-1):
        a = str(cf.terms[k - 1]) if k >= 1 else ""
        out.write(f"{k},{a},{nu},{de},{nu}/{de},{nu + de}\n")
    return EXIT_OK


def cmd_word(args) -> int:
    alpha = parse_generator(args.alpha, args.max_den)
    hist = block_history(cf_from_rational(alpha))
    word = hist.blocks[-1]
    out = args.stdout
    out.write(f"alpha = {format_rational(alpha)}\n")
    out.write(f"word = {word}\n")
    out.write(f"length = {len(word)}\n")
    out.write(f"count_p = {word.count('p')}\n")
    out.write(f"count_q = {word.count('q')}\n")
    if args.blocks:
        out.write("k,block,length\n")
        for k, b in enumerate(hist.blocks, start=-1):
            out.write(f"{k},{b},{len(b)}\n")
    return EXIT_OK


def cmd_dispersion(args) -> int:
    cfg = RunConfig.load(args.config)
    text = args.alpha or cfg.sweep.get("alpha")
    if text is None:
        raise UsageError("no generator: pass --alpha p/q or set [sweep].alpha")
    alpha = parse_generator(str(text))
    lo, hi, steps = cfg.omega(args.omega)
    omega = np.linspace(lo, hi, steps)
    values = dispersion(cfg.spec, alpha, omega)
    with _open_text(args.out, args.stdout) as fh:
        output.write_dispersion_csv(fh, omega, values)
    return EXIT_OK


def cmd_bulk(args) -> int:
    cfg = RunConfig.load(args.config)
    M = args.M if args.M is not None else cfg.sweep.get("M")
    if M is None:
        raise UsageError("no alpha resolution: pass -M or set [sweep].M")
    if int(M) < 1:
        raise UsageError("-M must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    lo, hi, steps = cfg.omega(args.omega)
    alphas = alpha_axis(int(M))
    omega = np.linspace(lo, hi, steps)

    start = time.perf_counter()
    with open(args.out + ".sbsg", "wb") as raw, \
            open(args.out + ".csv", "w", newline="", encoding="utf-8") as text:
        raster = output.RasterWriter(raw, len(alphas), steps)
        grid = output.GridCSVWriter(text, omega)
        for alpha, row in iter_bulk_rows(cfg.spec, alphas, omega, args.workers):
            raster.write_row(row)
            grid.write_row(alpha, row)
        raster.close()
    elapsed = time.perf_counter() - start
    rate = len(alphas) / elapsed if elapsed > 0 else float("inf")
    args.stdout.write(f"wrote {args.out}.sbsg and {args.out}.csv: {len(alphas)} x {steps} cells\n")
    args.stdout.write(f"wall-clock {elapsed:.3f} s, {rate:.1f} columns/s, workers={args.workers}\n")
    return EXIT_OK


def cmd_selfsim(args) -> int:
    prefix = parse_prefix(args.prefix)
    if args.rmax < 1:
        raise UsageError("--rmax must be >= 1")
    cfg = RunConfig.load(args.config)
    lo, hi, steps = cfg.omega(args.omega, need_steps=False)
    report = selfsim_sequence(prefix, args.rmax, cfg.spec, (lo, hi), steps, refine_tol=args.refine_tol)
    with _open_text(args.out, args.stdout) as fh:
        output.write_selfsim_csv(fh, report, extra=args.extra)
    if args.bands_out:
        with _open_text(args.bands_out, args.stdout) as fh:
            output.write_bands_csv(fh, [report.limit_bands] + [e.bands for e in report.entries])
    return EXIT_OK


def cmd_zmap(args) -> int:
    lam = args.lam
    if not lam > 0:
        raise UsageError("--lambda must be > 0")
    if args.M < 1:
        raise UsageError("-M must be >= 1")
    if args.omega is None:
        lo, hi, steps = 0.0, math.pi * lam * args.cq / (2.0 * args.length), 500
    else:
        lo, hi, steps = parse_omega(args.omega)
    alphas = [Fraction(i, args.M) for i in range(1, args.M + 1)]
    omega = np.linspace(lo, hi, steps)
    Z = rod_Z_alpha(lam, np.array([float(a) for a in alphas])[:, None], omega[None, :], args.length, args.cq)
    with _open_text(args.out, args.stdout) as fh:
        if args.mask_out:
            with _open_text(args.mask_out, args.stdout) as mask:
                output.write_zmap_csv(fh, alphas, omega, Z, mask)
        else:
            output.write_zmap_csv(fh, alphas, omega, Z)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sturmwave",
                                description="Spectra of Sturmian quasiperiodic waveguides.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cf", help="continued fraction and convergents of a generator")
    s.add_argument("alpha", help="'p/q' or a decimal (with --max-den)")
    s.add_argument("--max-den", type=int, help="largest denominator when rounding a decimal")
    s.set_defaults(func=cmd_cf)

    s = sub.add_parser("word", help="Sturmian block of a generator",
                       description="Sturmian block of a generator. alpha = 0 gives the "
                                   "one-element cell 'p' (the all-p limit word).")
    s.add_argument("alpha", help="'p/q' or a decimal (with --max-den)")
    s.add_argument("--max-den", type=int)
    s.add_argument("--blocks", action="store_true", help="also list every intermediate block")
    s.set_defaults(func=cmd_word)

    omega_help = "frequency grid MIN MAX STEPS"
    s = sub.add_parser("dispersion", help="cos(kappa L) over a frequency grid")
    s.add_argument("--config", help="model TOML (default: the reference chain)")
    s.add_argument("--alpha", help="generator 'p/q'")
    s.add_argument("--omega", nargs="+", metavar="X", help=omega_help)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_dispersion)

    s = sub.add_parser("bulk", help="admissibility grid over alpha = i/M and omega")
    s.add_argument("--config")
    s.add_argument("-M", type=int, help="alpha resolution (M + 1 rows)")
    s.add_argument("--omega", nargs="+", metavar="X", help=omega_help)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True, help="output prefix; writes PREFIX.sbsg and PREFIX.csv")
    s.set_defaults(func=cmd_bulk)

    s = sub.add_parser("selfsim", help="band lists along alpha_r = [0; a_1, ..., a_n + r]")
    s.add_argument("--prefix", required=True, help="e.g. '[0;1,2,2,2]'")
    s.add_argument("--rmax", type=int, required=True)
    s.add_argument("--config")
    s.add_argument("--omega", nargs="+", metavar="X", help="MIN MAX [STEPS]")
    s.add_argument("--refine-tol", type=float, default=REFINE_TOL)
    s.add_argument("--extra", action="store_true", help="append nesting measures")
    s.add_argument("--bands-out", help="also write every band list to this CSV")
    s.add_argument("--out")
    s.set_defaults(func=cmd_selfsim)

    s = sub.add_parser("zmap", help="rod closed form Z(alpha, omega) with r = 1/alpha")
    s.add_argument("--lambda", dest="lam", type=float, required=True, help="sqrt(EA_p / EA_q)")
    s.add_argument("-M", type=int, default=200, help="alpha = i/M for i = 1..M")
    s.add_argument("--omega", nargs="+", metavar="X",
                   help="MIN MAX STEPS (default: 0 to pi lambda c_q / 2l, 500 steps)")
    s.add_argument("--length", type=float, default=1.0, help="element length l")
    s.add_argument("--cq", type=float, default=1.0, help="wave speed of the q element")
    s.add_argument("--out")
    s.add_argument("--mask-out", help="CSV for the |Z| <= 1 mask")
    s.set_defaults(func=cmd_zmap)
    return p


def main(argv: Optional[List[str]] = None, stdout: Optional[IO[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    args.stdout = stdout or sys.stdout
    try:
        return args.func(args)
    except (UsageError, ModelSpecError, ValueError) as exc:
        print(f"sturmwave {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sturmwave {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
