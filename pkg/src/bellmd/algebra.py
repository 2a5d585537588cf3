"""Exact scalars, product sets, intuples and bitmask subsets.

Subsets of a universe of indexed elements are plain ``int`` bitmasks: bit ``i``
set means element ``i`` is a member.  Outcomes are stored 0-based and shown
1-based in JSON, so outcome ``1`` of an observable is index ``0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

Rational = Fraction

MAX_ELEMENTS = 64

# float ingestion grid: nearest rational with this denominator
FLOAT_DENOMINATOR = 2**64


# -- rationals ---------------------------------------------------------------


def to_rational(value) -> Fraction:
    """Coerce ints, Fractions, ``"num/den"`` strings and floats to a Fraction.

    Floats are snapped to the nearest multiple of ``2**-64`` so that
    numerically produced statistics enter the exact code path with a
    bounded, documented rounding.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return rationalize(value)
    # numpy scalars and friends
    if hasattr(value, "item"):
        return to_rational(value.item())
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def rationalize(x: float, denominator: int = FLOAT_DENOMINATOR) -> Fraction:
    return Fraction(round(Fraction(x) * denominator), denominator)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(s) -> Fraction:
    return to_rational(s)


# -- element sets (bitmasks) -------------------------------------------------


def mask_of(elements: Iterable[int]) -> int:
    m = 0
    for e in elements:
        if not 0 <= e < MAX_ELEMENTS:
            raise ValueError(f"element {e} outside 0..{MAX_ELEMENTS - 1}")
        m |= 1 << e
    return m


def elements(mask: int) -> list[int]:
    """Members of ``mask`` in ascending order."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def submasks(mask: int) -> Iterator[int]:
    """All subsets of ``mask`` in ascending numeric order (``0`` first)."""
    bits = elements(mask)
    for k in range(1 << len(bits)):
        sub = 0
        for j, b in enumerate(bits):
            if k >> j & 1:
                sub |= 1 << b
        yield sub


def full_mask(n: int) -> int:
    return (1 << n) - 1


# -- product sets ------------------------------------------------------------


@dataclass(frozen=True)
class ProductSet:
    """Cartesian product of outcome sets ``A_0 x A_1 x ...``; ``sizes[i] = |A_i|``."""

    sizes: tuple[int, ...]

    def __init__(self, sizes: Sequence[int]):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) > MAX_ELEMENTS:
            raise ValueError(f"at most {MAX_ELEMENTS} elements supported")
        if any(s < 2 for s in sizes):
            raise ValueError(f"every outcome set needs at least 2 outcomes, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    def __len__(self) -> int:
        return len(self.sizes)

    @property
    def full(self) -> int:
        return full_mask(len(self.sizes))

    @property
    def n(self) -> int:
        return math.prod(self.sizes)

    @property
    def n_min(self) -> int:
        return min(self.sizes)

    @property
    def is_binary(self) -> bool:
        return all(s == 2 for s in self.sizes)

    def check(self, mask: int) -> None:
        if mask & ~self.full:
            raise ValueError(f"set {elements(mask)} not inside universe of {len(self)} elements")

    def shape(self, mask: int) -> tuple[int, ...]:
        self.check(mask)
        return tuple(self.sizes[i] for i in elements(mask))

    def card(self, mask: int) -> int:
        return math.prod(self.shape(mask))

    def card_star(self, mask: int) -> int:
        """Product of ``|A_i| - 1`` over the set."""
        return math.prod(s - 1 for s in self.shape(mask))

    def sub(self, mask: int) -> "ProductSet":
        return ProductSet(self.shape(mask))


def cardinality(ps: ProductSet, sigma: int) -> int:
    return ps.card(sigma)


# -- intuples ----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Intuple:
    """An indexed tuple: one outcome per element of ``support``.

    ``outcomes`` lists the 0-based outcome of each supported element in
    ascending element order.
    """

    support: int
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if popcount(self.support) != len(self.outcomes):
            raise ValueError("one outcome required per supported element")

    @classmethod
    def from_map(cls, m: dict[int, int]) -> "Intuple":
        keys = sorted(m)
        return cls(mask_of(keys), tuple(int(m[k]) for k in keys))

    @classmethod
    def full(cls, outcomes: Sequence[int]) -> "Intuple":
        return cls(full_mask(len(outcomes)), tuple(int(o) for o in outcomes))

    @classmethod
    def ones(cls, support: int) -> "Intuple":
        """The all-first-outcome intuple (label ``1`` everywhere)."""
        return cls(support, (0,) * popcount(support))

    def as_map(self) -> dict[int, int]:
        return dict(zip(elements(self.support), self.outcomes))

    def __getitem__(self, element: int) -> int:
        return self.as_map()[element]

    def restrict(self, mask: int) -> "Intuple":
        if mask & ~self.support:
            raise ValueError("restriction must be a subset of the support")
        m = self.as_map()
        return Intuple.from_map({k: m[k] for k in elements(mask)})

    def validate(self, ps: ProductSet) -> None:
        ps.check(self.support)
        for e, o in self.as_map().items():
            if not 0 <= o < ps.sizes[e]:
                raise ValueError(f"outcome {o + 1} out of range for element {e}")

    def to_json(self) -> list[list[int]]:
        return [[e, o + 1] for e, o in self.as_map().items()]

    @classmethod
    def from_json(cls, pairs) -> "Intuple":
        return cls.from_map({int(e): int(o) - 1 for e, o in pairs})


def enumerate_intuples(ps: ProductSet, sigma: int) -> list[Intuple]:
    """All intuples over ``sigma`` in mixed-radix order, lowest element most significant."""
    return [Intuple(sigma, combo) for combo in itertools.product(*(range(s) for s in ps.shape(sigma)))]


def encode(ps: ProductSet, x: Intuple) -> int:
    x.validate(ps)
    idx = 0
    for e, o in zip(elements(x.support), x.outcomes):
        idx = idx * ps.sizes[e] + o
    return idx


def decode(ps: ProductSet, sigma: int, index: int) -> Intuple:
    shape = ps.shape(sigma)
    n = math.prod(shape)
    if not 0 <= index < n:
        raise ValueError(f"index {index} outside 0..{n - 1}")
    outs = []
    for s in reversed(shape):
        index, o = divmod(index, s)
        outs.append(o)
    return Intuple(sigma, tuple(reversed(outs)))


# -- JSON helpers ----------------------------------------------------------


def set_to_json(mask: int) -> list[int]:
    return elements(mask)


def set_from_json(items) -> int:
    return mask_of(int(i) for i in items)
