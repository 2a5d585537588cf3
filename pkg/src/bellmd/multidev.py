"""Multideviation transform, its inverse, and the seed-function algebra.

A function ``f`` on a product set is split into one component ``Q^sigma`` per
subset ``sigma`` of elements.  Each component sums to zero along every
element of ``sigma`` and is orthogonal to every other component; adding all
components back together reproduces ``f``.

All values are exact ``Fraction``s carried in numpy object arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .algebra import (
    Intuple,
    ProductSet,
    decode,
    elements,
    encode,
    enumerate_intuples,
    format_rational,
    popcount,
    set_from_json,
    set_to_json,
    submasks,
    to_rational,
)


def frac_array(values: Iterable) -> np.ndarray:
    vals = [to_rational(v) for v in values]
    out = np.empty(len(vals), dtype=object)
    out[:] = vals
    return out


def _zeros(n: int) -> np.ndarray:
    return frac_array([0] * n)


# -- data types ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DistVector:
    """A rational-valued function on ``ps``, dense in encode order."""

    ps: ProductSet
    values: np.ndarray

    def __init__(self, ps: ProductSet, values: Iterable, probability: bool = False):
        arr = frac_array(values)
        if arr.shape != (ps.n,):
            raise ValueError(f"expected {ps.n} values, got {arr.shape[0]}")
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "values", arr)
        if probability:
            self.check_probability()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DistVector)
            and self.ps == other.ps
            and all(a == b for a, b in zip(self.values, other.values))
        )

    def __getitem__(self, x: Intuple) -> Fraction:
        return self.values[encode(self.ps, x)]

    def __add__(self, other: "DistVector") -> "DistVector":
        return DistVector(self.ps, self.values + other.values)

    def scale(self, c) -> "DistVector":
        return DistVector(self.ps, self.values * to_rational(c))

    def tensor(self) -> np.ndarray:
        return self.values.reshape(self.ps.sizes) if len(self.ps) else self.values.reshape(())

    def total(self) -> Fraction:
        return sum(self.values, Fraction(0))

    def is_probability(self) -> bool:
        return all(v >= 0 for v in self.values) and self.total() == 1

    def check_probability(self) -> None:
        if any(v < 0 for v in self.values):
            raise ValueError("probability vector has a negative entry")
        if self.total() != 1:
            raise ValueError(f"probabilities sum to {self.total()}, not 1")

    @classmethod
    def uniform(cls, ps: ProductSet) -> "DistVector":
        return cls(ps, [Fraction(1, ps.n)] * ps.n)

    @classmethod
    def point(cls, ps: ProductSet, y: Intuple) -> "DistVector":
        vals = [0] * ps.n
        vals[encode(ps, y)] = 1
        return cls(ps, vals)

    def to_json(self) -> dict:
        return {"sizes": list(self.ps.sizes), "values": [format_rational(v) for v in self.values]}

    @classmethod
    def from_json(cls, data: dict, probability: bool = False) -> "DistVector":
        return cls(ProductSet(data["sizes"]), data["values"], probability=probability)


@dataclass(frozen=True, eq=False)
class MultidevTable:
    """``Q^sigma(x_sigma)`` for every ``sigma``; ``entries[sigma]`` is in encode order."""

    ps: ProductSet
    entries: dict[int, np.ndarray]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultidevTable) or self.ps != other.ps:
            return False
        for sigma in submasks(self.ps.full):
            a = self.entries.get(sigma)
            b = other.entries.get(sigma)
            a = _zeros(self.ps.card(sigma)) if a is None else a
            b = _zeros(self.ps.card(sigma)) if b is None else b
            if any(u != v for u, v in zip(a, b)):
                return False
        return True

    def get(self, sigma: int) -> np.ndarray:
        arr = self.entries.get(sigma)
        return _zeros(self.ps.card(sigma)) if arr is None else arr

    def value(self, x: Intuple) -> Fraction:
        return self.get(x.support)[encode(self.ps, x)]

    @classmethod
    def zero(cls, ps: ProductSet) -> "MultidevTable":
        return cls(ps, {s: _zeros(ps.card(s)) for s in submasks(ps.full)})

    def to_json(self) -> dict:
        return {
            "sizes": list(self.ps.sizes),
            "orders": [
                {"sigma": set_to_json(s), "values": [format_rational(v) for v in self.get(s)]}
                for s in submasks(self.ps.full)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultidevTable":
        ps = ProductSet(data["sizes"])
        entries = {}
        for row in data["orders"]:
            sigma = set_from_json(row["sigma"])
            arr = frac_array(row["values"])
            if arr.shape != (ps.card(sigma),):
                raise ValueError(f"order {row['sigma']} needs {ps.card(sigma)} values")
            entries[sigma] = arr
        return cls(ps, entries)


@dataclass(frozen=True)
class LatticeIntuple:
    """A nonempty proper subset ``alpha_i`` of the outcomes of each supported element."""

    support: int
    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        if popcount(self.support) != len(self.blocks):
            raise ValueError("one lattice element required per supported element")
        object.__setattr__(self, "blocks", tuple(frozenset(b) for b in self.blocks))

    @classmethod
    def from_map(cls, m: dict[int, Iterable[int]]) -> "LatticeIntuple":
        keys = sorted(m)
        return cls(sum(1 << k for k in keys), tuple(frozenset(m[k]) for k in keys))

    @classmethod
    def ones(cls, support: int) -> "LatticeIntuple":
        return cls(support, tuple(frozenset({0}) for _ in range(popcount(support))))

    def as_map(self) -> dict[int, frozenset[int]]:
        return dict(zip(elements(self.support), self.blocks))

    def restrict(self, mask: int) -> "LatticeIntuple":
        if mask & ~self.support:
            raise ValueError("restriction must be a subset of the support")
        m = self.as_map()
        return LatticeIntuple.from_map({k: m[k] for k in elements(mask)})

    def validate(self, ps: ProductSet) -> None:
        ps.check(self.support)
        for e, block in self.as_map().items():
            if not block or len(block) >= ps.sizes[e] or any(not 0 <= o < ps.sizes[e] for o in block):
                raise ValueError(f"lattice element for {e} must be a nonempty proper subset of its outcomes")

    def sort_key(self):
        return (self.support, tuple(tuple(sorted(b)) for b in self.blocks))

    def to_json(self) -> list:
        return [[e, sorted(o + 1 for o in block)] for e, block in self.as_map().items()]

    @classmethod
    def from_json(cls, pairs) -> "LatticeIntuple":
        return cls.from_map({int(e): [int(o) - 1 for o in outs] for e, outs in pairs})


# -- seed functions ------------------------------------------------------------


def _check_pair(ps: ProductSet, sigma: int, x: Intuple, y: Intuple) -> None:
    if x.support != sigma or y.support != sigma:
        raise ValueError("both intuples must have support sigma")
    x.validate(ps)
    y.validate(ps)


def msf(ps: ProductSet, sigma: int, x: Intuple, y: Intuple) -> Fraction:
    """Seed function ``(1/n_B) prod_{i in sigma} (n_i [x_i = y_i] - 1)``."""
    _check_pair(ps, sigma, x, y)
    out = Fraction(1, ps.n)
    for e, xi, yi in zip(elements(sigma), x.outcomes, y.outcomes):
        out *= ps.sizes[e] * (xi == yi) - 1
    return out


def msf_expanded(ps: ProductSet, sigma: int, x: Intuple, y: Intuple) -> Fraction:
    """Binomial expansion of the seed function, ``sum_mu (-1)^|sigma-mu| / n_{B-mu} [x_mu = y_mu]``.

    Kept as an independent evaluation path for cross-checking :func:`msf`.
    """
    _check_pair(ps, sigma, x, y)
    xm, ym = x.as_map(), y.as_map()
    out = Fraction(0)
    for mu in submasks(sigma):
        if all(xm[i] == ym[i] for i in elements(mu)):
            sign = -1 if popcount(sigma & ~mu) % 2 else 1
            out += Fraction(sign, ps.card(ps.full & ~mu))
    return out


# -- transform -----------------------------------------------------------------


def _marginal_tensor(f: DistVector, sigma: int) -> np.ndarray:
    drop = tuple(i for i in range(len(f.ps)) if not sigma >> i & 1)
    t = f.tensor()
    if drop:
        t = t.sum(axis=drop)
    return np.asarray(t, dtype=object)


def _deviation_axes(t: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Apply ``g -> n_i g - sum_i g`` along every axis."""
    for axis, n in enumerate(sizes):
        t = n * t - t.sum(axis=axis, keepdims=True)
    return t


def multideviation(f: DistVector, sigma: int) -> np.ndarray:
    """``Q^sigma_f`` over ``x_sigma`` in encode order."""
    f.ps.check(sigma)
    t = _deviation_axes(_marginal_tensor(f, sigma), f.ps.shape(sigma))
    return (np.asarray(t, dtype=object).reshape(-1) * Fraction(1, f.ps.n)).astype(object)


def transform(f: DistVector) -> MultidevTable:
    return MultidevTable(f.ps, {s: multideviation(f, s) for s in submasks(f.ps.full)})


def _broadcast(ps: ProductSet, sigma: int, arr: np.ndarray) -> np.ndarray:
    shape = tuple(s if sigma >> i & 1 else 1 for i, s in enumerate(ps.sizes))
    return arr.reshape(shape) if shape else arr.reshape(())


def _sum_orders(ps: ProductSet, orders: Iterable[tuple[int, np.ndarray]]) -> np.ndarray:
    acc = np.empty(ps.sizes if len(ps) else (), dtype=object)
    acc[...] = Fraction(0)
    for sigma, arr in orders:
        acc = acc + _broadcast(ps, sigma, arr)
    return np.asarray(acc, dtype=object).reshape(-1)


def reconstruct(t: MultidevTable) -> DistVector:
    """Inverse transform: ``f(x) = sum_sigma Q^sigma(x_sigma)``."""
    return DistVector(t.ps, _sum_orders(t.ps, ((s, t.get(s)) for s in submasks(t.ps.full))))


def marginal(f: DistVector, sigma: int) -> DistVector:
    f.ps.check(sigma)
    return DistVector(f.ps.sub(sigma), _marginal_tensor(f, sigma).reshape(-1))


# -- constraints ---------------------------------------------------------------


class ConstraintCheck(NamedTuple):
    ok: bool
    witness: Intuple | None = None


def check_constraints(t: MultidevTable) -> ConstraintCheck:
    """Nonnegativity of ``sum_sigma Q^sigma(x_sigma)`` at every full outcome."""
    q0 = t.get(0)[0]
    if q0 != Fraction(1, t.ps.n):
        raise ValueError(f"Q^empty must be 1/{t.ps.n}, got {q0}")
    f = reconstruct(t)
    for idx, v in enumerate(f.values):
        if v < 0:
            return ConstraintCheck(False, decode(t.ps, t.ps.full, idx))
    return ConstraintCheck(True)


def multidev_range(ps: ProductSet, sigma: int) -> tuple[Fraction, Fraction]:
    """Bounds every ``Q^sigma_P(x_sigma)`` of a probability distribution must obey."""
    q0 = Fraction(1, ps.n)
    hi = ps.card_star(sigma) * q0
    return -hi / (ps.n_min - 1), hi


# -- binary and Boolean specialisations --------------------------------------


def binary_q(t: MultidevTable, sigma: int) -> Fraction:
    """The single degree of freedom ``Q^sigma(1_sigma)`` of a binary table."""
    if not t.ps.is_binary:
        raise ValueError("binary_q needs all outcome sets of size 2")
    return t.get(sigma)[0]


def boolean_multidev(f: DistVector, sigma: int, alpha: LatticeIntuple) -> Fraction:
    """``W^sigma_f(alpha) = sum_y f(y) 2^-|B| prod_{i in sigma} (2[y_i in alpha_i] - 1)``."""
    if alpha.support != sigma:
        raise ValueError("lattice intuple must be supported on sigma")
    alpha.validate(f.ps)
    t = _marginal_tensor(f, sigma)
    for axis, (e, block) in enumerate(alpha.as_map().items()):
        signs = np.array([1 if o in block else -1 for o in range(f.ps.sizes[e])], dtype=object)
        shape = [1] * t.ndim
        shape[axis] = len(signs)
        t = t * signs.reshape(shape)
    total = sum(np.asarray(t, dtype=object).reshape(-1), Fraction(0))
    return total / 2 ** len(f.ps)


# -- vector-space picture ------------------------------------------------------


def md_vector(ps: ProductSet, sigma: int, x: Intuple) -> np.ndarray:
    """Components ``q^sigma(x_sigma, y_sigma)`` over all ``y`` in encode order."""
    if x.support != sigma:
        raise ValueError("intuple must have support sigma")
    x.validate(ps)
    out = np.empty(ps.sizes if len(ps) else (), dtype=object)
    out[...] = Fraction(1, ps.n)
    for e, xe in zip(elements(sigma), x.outcomes):
        factor = np.array([ps.sizes[e] * (o == xe) - 1 for o in range(ps.sizes[e])], dtype=object)
        shape = [1] * len(ps)
        shape[e] = ps.sizes[e]
        out = out * factor.reshape(shape)
    return np.asarray(out, dtype=object).reshape(-1)


def project_to_psi(f: DistVector, psi: Iterable[int]) -> np.ndarray:
    """Keep only the components of ``f`` whose order lies in ``psi``."""
    psi = sorted(set(psi))
    for s in psi:
        f.ps.check(s)
    return _sum_orders(f.ps, ((s, multideviation(f, s)) for s in psi))


def project_to_psi_explicit(f: DistVector, psi: Iterable[int]) -> np.ndarray:
    """Same projection assembled literally from MD-vectors; quadratic cost."""
    ps = f.ps
    acc = _zeros(ps.n)
    for sigma in sorted(set(psi)):
        q = multideviation(f, sigma)
        reps = ps.card(ps.full & ~sigma)
        for x, qx in zip(enumerate_intuples(ps, sigma), q):
            if qx:
                acc = acc + md_vector(ps, sigma, x) * (qx * reps)
    return acc


def powerset_family(ps: ProductSet) -> list[int]:
    return list(submasks(ps.full))


def nonzero_orders(t: MultidevTable) -> list[int]:
    return [s for s in submasks(t.ps.full) if any(v != 0 for v in t.get(s))]


__all__ = [
    "DistVector",
    "MultidevTable",
    "LatticeIntuple",
    "ConstraintCheck",
    "frac_array",
    "msf",
    "msf_expanded",
    "multideviation",
    "transform",
    "reconstruct",
    "marginal",
    "check_constraints",
    "multidev_range",
    "binary_q",
    "boolean_multidev",
    "md_vector",
    "project_to_psi",
    "project_to_psi_explicit",
    "powerset_family",
    "nonzero_orders",
]
