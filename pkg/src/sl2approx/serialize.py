"""Deterministic decimal formatting and output headers."""
from __future__ import annotations

import csv
import decimal
import io
import math

import gmpy2

from . import __version__
from .cf import CFConstants


_EXACT = decimal.Context(prec=10**6, rounding=decimal.ROUND_HALF_EVEN)


def _fix_exp(text: str) -> str:
    """Decimal writes e+5; pad the exponent to two digits like float formatting."""
    mant, _, exp = text.partition("e")
    sign, digits = exp[0], exp[1:]
    return f"{mant}e{sign}{digits.zfill(2)}"


def fmt_num(x, digits: int) -> str:
    """Scientific notation with ``digits`` significant digits, round-half-even on the exact value."""
    if isinstance(x, type(gmpy2.mpfr(0))):
        if gmpy2.is_nan(x):
            return "nan"
        if gmpy2.is_infinite(x):
            return "inf" if x > 0 else "-inf"
        if gmpy2.is_zero(x):
            return fmt_num(0.0, digits)
        m, e = x.as_mantissa_exp()
        m, e = int(m), int(e)
        exact = decimal.Decimal(m << e) if e >= 0 else _EXACT.divide(m, _EXACT.power(2, -e))
        return _fix_exp(format(exact, f".{digits - 1}e"))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits - 1}e}"


def header_lines(cfg_hash: str, consts: CFConstants | None, digits: int, extra: dict | None = None) -> list[str]:
    lines = [f"tool: sl2approx {__version__}", f"config_sha256: {cfg_hash}", f"digits: {digits}"]
    if consts is not None:
        f = consts.as_floats()
        lines += [f"theta: {consts.theta} ({fmt_num(f['theta'], digits)})", f"r0: {consts.r0}",
                  f"C0: {consts.C0} ({fmt_num(f['C0'], digits)})",
                  f"C1: {consts.C1} ({fmt_num(f['C1'], digits)})",
                  f"C2: {consts.C2} ({fmt_num(f['C2'], digits)})", f"r1: {consts.r1}"]
    else:
        lines.append("constants: not declared for this ring")
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return ["# " + ln for ln in lines]


def csv_text(header: list[str], columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write("\n".join(header) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def kv_text(header: list[str], items: dict) -> str:
    return "\n".join(header) + "\n" + "".join(f"{k}: {v}\n" for k, v in items.items())
