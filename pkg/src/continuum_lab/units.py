"""Exact parsing and rendering of rationals, durations and bandwidths."""

import re
from decimal import Decimal
from fractions import Fraction

NS_PER_S = 1_000_000_000

_DURATION_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": NS_PER_S}
_BANDWIDTH_UNITS = {"bps": 1, "kbps": 10**3, "mbps": 10**6, "gbps": 10**9}

_NUMBER = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_DURATION_RE = re.compile(rf"^\s*({_NUMBER})\s*(ns|us|ms|s)?\s*$")
_BANDWIDTH_RE = re.compile(rf"^\s*({_NUMBER})\s*([KkMmGg]?bps)?\s*$")
_FRACTION_RE = re.compile(r"^\s*[+-]?\d+\s*/\s*\d+\s*$")


def to_rational(value) -> Fraction:
    """Convert an int, Fraction, float or numeric string to an exact Fraction.

    Floats go through their shortest ``repr`` so ``0.1`` becomes ``1/10``.
    Strings may be decimals (``"0.25"``) or fractions (``"1/4"``).
    """
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if _FRACTION_RE.match(text):
            num, den = text.split("/")
            return Fraction(int(num), int(den))
        if re.match(rf"^{_NUMBER}$", text):
            return Fraction(text)
    raise ValueError(f"not a number: {value!r}")


def parse_duration_ns(value) -> int:
    """Duration to integer nanoseconds; bare numbers are nanoseconds.

    >>> parse_duration_ns("50ms")
    50000000
    >>> parse_duration_ns("1.5us")
    1500
    """
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, (int, Fraction, float)):
        amount, scale = to_rational(value), 1
    elif isinstance(value, str):
        m = _DURATION_RE.match(value)
        if not m:
            raise ValueError(f"not a duration: {value!r}")
        amount, scale = Fraction(m.group(1)), _DURATION_UNITS[m.group(2) or "ns"]
    else:
        raise ValueError(f"not a duration: {value!r}")
    ns = amount * scale
    if ns.denominator != 1:
        raise ValueError(f"duration {value!r} is not a whole number of nanoseconds")
    return int(ns)


def parse_bandwidth_bps(value):
    """Bandwidth to integer bits per second, or None for ``"unlimited"``.

    Multipliers are decimal: ``"1Mbps"`` is 1,000,000 bps.
    """
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() == "unlimited":
        return None
    if isinstance(value, bool):
        raise ValueError(f"not a bandwidth: {value!r}")
    if isinstance(value, (int, Fraction, float)):
        bps = to_rational(value)
    elif isinstance(value, str):
        m = _BANDWIDTH_RE.match(value)
        if not m:
            raise ValueError(f"not a bandwidth: {value!r}")
        bps = Fraction(m.group(1)) * _BANDWIDTH_UNITS[(m.group(2) or "bps").lower()]
    else:
        raise ValueError(f"not a bandwidth: {value!r}")
    if bps.denominator != 1:
        raise ValueError(f"bandwidth {value!r} is not a whole number of bps")
    return int(bps)


def ceil_div(num: int, den: int) -> int:
    return -((-num) // den)


def duration_for_units(units, capacity) -> int:
    """``ceil(units * 1e9 / capacity)`` in exact arithmetic."""
    q = Fraction(units) * NS_PER_S / Fraction(capacity)
    return ceil_div(q.numerator, q.denominator)


def serialization_ns(size_bits: int, bandwidth_bps) -> int:
    if bandwidth_bps is None:
        return 0
    return ceil_div(size_bits * NS_PER_S, bandwidth_bps)


def format_decimal(value, digits: int = 9) -> str:
    """Render a rational with at most ``digits`` fractional digits.

    Rounding is half-to-even and trailing zeros are dropped.

    >>> format_decimal(Fraction(1, 3))
    '0.333333333'
    >>> format_decimal(Fraction(5, 2))
    '2.5'
    >>> format_decimal(Fraction(1, 2 * 10**9))
    '0'
    """
    scale = 10**digits
    q = round(Fraction(value) * scale)  # Fraction.__round__ is half-even
    sign = "-" if q < 0 else ""
    whole, frac = divmod(abs(q), scale)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{str(frac).rjust(digits, '0').rstrip('0')}"


def format_rational(value) -> str:
    """Reduced ``p/q`` form used by canonical serializations."""
    f = Fraction(value)
    return f"{f.numerator}/{f.denominator}"
