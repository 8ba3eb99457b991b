"""Shared helpers: seed derivation and exact-rational rounding/rendering."""

from __future__ import annotations

import hashlib
from fractions import Fraction

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, name: str) -> int:
    """Derive an independent 64-bit seed from a root seed and a stream name.

    root ^ sha256(name)[:8], so sub-streams ("init", "batches",
    "member:claims", ...) are reproducible in isolation.
    """
    h = hashlib.sha256(name.encode("utf-8")).digest()
    return (int(root) ^ int.from_bytes(h[:8], "little")) & _MASK64


def round_half_up(x, places: int = 0) -> Fraction:
    """Round an exact rational to `places` decimals, halves rounded up."""
    x = Fraction(x)
    q = 10**places
    scaled = x * q
    # floor(scaled + 1/2), computed exactly on integers
    n = (2 * scaled.numerator + scaled.denominator) // (2 * scaled.denominator)
    return Fraction(n, q)


def format_fixed(x, places: int = 2) -> str:
    """Render a rational with exactly `places` decimals (half-up)."""
    q = 10**places
    n = int(round_half_up(Fraction(x) * q))
    sign = "-" if n < 0 else ""
    n = abs(n)
    if places == 0:
        return f"{sign}{n}"
    return f"{sign}{n // q}.{n % q:0{places}d}"
