"""Exact rational helpers: the "p/q" wire format and harmonic numbers."""
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

ZERO = Fraction(0)
ONE = Fraction(1)


def parse_rational(raw) -> Fraction:
    """Accept ints and "p/q" / "n" strings; floats are rejected so nothing is rounded."""
    if isinstance(raw, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(raw, Fraction):
        return raw
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, str):
        text = raw.strip()
        if not text or any(c in text for c in ".eE"):
            raise ValueError(f"not a rational: {raw!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {raw!r}") from exc
    raise ValueError(f"rationals must be integers or 'p/q' strings, got {type(raw).__name__}")


def format_rational(value: Fraction) -> str:
    return str(Fraction(value))


def format_row(row: Iterable[Fraction]) -> list[str]:
    return [format_rational(x) for x in row]


def parse_row(raw: Iterable) -> tuple[Fraction, ...]:
    return tuple(parse_rational(x) for x in raw)


@lru_cache(maxsize=None)
def harmonic(n: int) -> Fraction:
    """H_n = 1 + 1/2 + ... + 1/n (H_0 = 0)."""
    return sum((Fraction(1, j) for j in range(1, n + 1)), ZERO)


def mask_of(items: Iterable[int]) -> int:
    mask = 0
    for j in items:
        mask |= 1 << j
    return mask


def items_of(mask: int) -> list[int]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out
