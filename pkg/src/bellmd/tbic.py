"""Exact tightness checks for candidate Bell inequalities.

A candidate is a set ``Gamma`` of omni-joint outcomes.  The function ``f``
must vanish off ``Gamma`` and satisfy, for every observer and every pair of
that observer's observables, the local condition that kills multideviations
mixing the two observables.  ``Gamma`` gives a facet exactly when those
conditions leave a one-dimensional, strictly positive solution space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .algebra import Intuple, decode, encode
from .contexts import (
    BellInequality,
    EventSpace,
    canonical_function,
    inequality_from_function,
    off_psi_orders,
    vertex_vector,
)
from .multidev import DistVector


class RowTag(NamedTuple):
    observer: int
    p: int
    q: int
    gamma: int


@dataclass(frozen=True)
class LinearSystem:
    """Sparse rows ``{column: coefficient}`` over unknowns ``f(gamma)``, ``gamma`` in ``unknowns``."""

    space: EventSpace
    unknowns: tuple[int, ...]
    rows: tuple[dict[int, Fraction], ...]
    tags: tuple[RowTag, ...]

    @property
    def n_unknowns(self) -> int:
        return len(self.unknowns)


def _gamma_indices(space: EventSpace, gamma) -> list[int]:
    items = gamma.intuples() if hasattr(gamma, "intuples") else list(gamma)
    out = set()
    for g in items:
        if isinstance(g, int):
            if not 0 <= g < space.omni.n:
                raise ValueError(f"outcome index {g} out of range")
            out.add(g)
        else:
            if g.support != space.omni.full:
                raise ValueError("Gamma members must assign every observable")
            out.add(encode(space.omni, g))
    return sorted(out)


def build_system(space: EventSpace, gamma) -> LinearSystem:
    """Rows ``(I - A_p)(I - A_q) f = 0`` restricted to ``Gamma``.

    ``A_p`` replaces ``f`` by ``n_p`` times its average over the outcomes of
    ``p``; the product vanishes at every point exactly when ``f`` carries no
    multideviation containing both ``p`` and ``q``.
    """
    members = _gamma_indices(space, gamma)
    if not members:
        raise ValueError("Gamma must be nonempty")
    col = {g: j for j, g in enumerate(members)}
    omni = space.omni
    rows, tags, seen = [], [], set()
    for i, obs in enumerate(space.observables_of):
        for p, q in itertools.combinations(obs, 2):
            n_p, n_q = omni.sizes[p], omni.sizes[q]
            for idx in range(omni.n):
                g = list(decode(omni, omni.full, idx).outcomes)
                row: dict[int, Fraction] = {}
                for a in range(n_p):
                    for b in range(n_q):
                        c = (n_p * (a == g[p]) - 1) * (n_q * (b == g[q]) - 1)
                        h = list(g)
                        h[p], h[q] = a, b
                        j = col.get(encode(omni, Intuple.full(h)))
                        if j is not None and c:
                            row[j] = row.get(j, 0) + c
                row = {j: Fraction(v) for j, v in row.items() if v}
                if not row:
                    continue
                key = tuple(sorted(row.items()))
                if key in seen:
                    continue
                seen.add(key)
                rows.append(row)
                tags.append(RowTag(i, p, q, idx))
    return LinearSystem(space, tuple(members), tuple(rows), tuple(tags))


def rref(rows: Iterable[dict[int, Fraction]]) -> dict[int, dict[int, Fraction]]:
    """Reduced row echelon form of sparse rows, keyed by pivot column."""
    pivots: dict[int, dict[int, Fraction]] = {}
    for row in rows:
        r = {c: Fraction(v) for c, v in row.items() if v}
        for c in [c for c in r if c in pivots]:
            v = r.get(c)
            if not v:
                continue
            for k, w in pivots[c].items():
                nv = r.get(k, 0) - v * w
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
        if not r:
            continue
        lead = min(r)
        inv = 1 / r[lead]
        r = {k: w * inv for k, w in r.items()}
        for prow in pivots.values():
            v = prow.get(lead)
            if v:
                for k, w in r.items():
                    nv = prow.get(k, 0) - v * w
                    if nv:
                        prow[k] = nv
                    else:
                        prow.pop(k, None)
        pivots[lead] = r
    return pivots


def nullspace(sys: LinearSystem | Sequence[dict[int, Fraction]], n_unknowns: int | None = None) -> list[list[Fraction]]:
    if isinstance(sys, LinearSystem):
        rows, n = sys.rows, sys.n_unknowns
    else:
        rows, n = sys, n_unknowns
        if n is None:
            raise ValueError("number of unknowns required for bare rows")
    piv = rref(rows)
    basis = []
    for free in range(n):
        if free in piv:
            continue
        v = [Fraction(0)] * n
        v[free] = Fraction(1)
        for c, r in piv.items():
            w = r.get(free)
            if w:
                v[c] = -w
        basis.append(v)
    return basis


def rank(vectors) -> int:
    rows = [{j: Fraction(int(x)) if isinstance(x, (int, np.integer)) else Fraction(x) for j, x in enumerate(v) if x}
            for v in vectors]
    return len(rref(rows))


@dataclass(frozen=True)
class Verdict:
    verdict: str
    nullity: int
    f: DistVector | None = None
    witness: dict | None = None

    @property
    def tight(self) -> bool:
        return self.verdict == "tight"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "f": None if self.f is None else [str(v) for v in canonical_function(self.f)],
            "nullity": self.nullity,
            "witness": self.witness,
        }


def tbic_check(space: EventSpace, gamma) -> Verdict:
    sys = build_system(space, gamma)
    basis = nullspace(sys)
    k = len(basis)
    omni = space.omni

    def point(j):
        return decode(omni, omni.full, sys.unknowns[j]).to_json()

    if k == 0:
        return Verdict("not_dependent", 0, witness={"reason": "only f = 0 solves the system"})
    if k > 1:
        v = basis[1]
        return Verdict("not_minimal", k, witness={"reason": "solution space has dimension > 1",
                                                   "second_solution_support": [point(j) for j, x in enumerate(v) if x]})
    v = basis[0]
    zeros = [j for j, x in enumerate(v) if x == 0]
    if zeros:
        return Verdict("not_minimal", 1, witness={"reason": "solution vanishes inside Gamma", "outcome": point(zeros[0])})
    first = next(x for x in v if x)
    v = [x if first > 0 else -x for x in v]
    neg = [j for j, x in enumerate(v) if x < 0]
    if neg:
        return Verdict("not_positive", 1, witness={"reason": "mixed signs", "outcome": point(neg[0])})
    vals = [Fraction(0)] * omni.n
    for j, x in zip(sys.unknowns, v):
        vals[j] = x
    f = DistVector(omni, canonical_function(DistVector(omni, vals)))
    bad = off_psi_orders(space, f)
    if bad:  # would mean the row system above is wrong
        raise RuntimeError(f"solution carries a multideviation outside the comeasurable family: {space.ids_of(bad[0])}")
    return Verdict("tight", 1, f=f)


# -- polytope checks -------------------------------------------------------------


def _vertex_matrix(space: EventSpace) -> np.ndarray:
    return np.array([vertex_vector(space, decode(space.omni, space.omni.full, i)) for i in range(space.omni.n)])


def affine_rank(points: np.ndarray) -> int:
    if len(points) == 0:
        return -1
    return rank(points[1:] - points[0])


def polytope_dimension(space: EventSpace) -> int:
    return affine_rank(_vertex_matrix(space))


def facet_check(space: EventSpace, ineq: BellInequality) -> bool:
    """True iff the inequality is valid on every vertex and its saturated vertices span a facet."""
    if ineq.omni_f is None:
        raise ValueError("facet check needs the omni-joint function of the inequality")
    if ineq.space != space:
        raise ValueError("inequality lives on a different event space")
    f = ineq.omni_f
    bad = off_psi_orders(space, f)
    if bad:
        raise ValueError(f"omni_f has multideviations outside the comeasurable family: {space.ids_of(bad[0])}")
    if any(v < 0 for v in f.values):
        return False
    verts = _vertex_matrix(space)
    tight = verts[[i for i, v in enumerate(f.values) if v == 0]]
    return affine_rank(tight) == affine_rank(verts) - 1


def _affine_coordinates(verts: np.ndarray) -> np.ndarray:
    """Columns forming a basis of the affine hull's directions."""
    diff = verts[1:] - verts[0]
    piv: list[int] = []
    acc: list[dict[int, Fraction]] = []
    for j in range(diff.shape[1]):
        trial = acc + [{i: Fraction(int(x)) for i, x in enumerate(diff[:, j]) if x}]
        if len(rref(trial)) > len(acc):
            acc = trial
            piv.append(j)
    return verts[:, piv]


def brute_force_facets(space: EventSpace) -> list[BellInequality]:
    """All facets of the Bell polytope of two observers with two binary observables each."""
    if space.n_observers != 2 or not space.is_binary or any(len(o) != 2 for o in space.observable_ids):
        raise ValueError("hull search is limited to two observers with two binary observables each")
    verts = _vertex_matrix(space)
    X = _affine_coordinates(verts)
    n, dim = X.shape
    H = np.hstack([X, np.ones((n, 1), dtype=np.int64)])
    found: dict[frozenset[int], tuple[int, ...]] = {}
    for S in itertools.combinations(range(n), dim):
        M = H[list(S)]
        # normal by cofactor expansion; entries are small so float determinants round exactly
        h = np.array([(-1) ** j * round(np.linalg.det(np.delete(M, j, axis=1))) for j in range(dim + 1)],
                     dtype=np.int64)
        if not h.any() or (M @ h).any():
            continue
        vals = H @ h
        if (vals < 0).any() and (vals > 0).any():
            continue
        if (vals < 0).any():
            vals = -vals
        sat = frozenset(int(i) for i in np.flatnonzero(vals == 0))
        if sat not in found:
            found[sat] = tuple(int(v) for v in vals)
    out = []
    for sat in sorted(found, key=lambda s: sorted(s)):
        f = DistVector(space.omni, list(found[sat]))
        f = DistVector(space.omni, canonical_function(f))
        out.append(inequality_from_function(space, f).canonical())
    return out


def positivity_inequality(space: EventSpace, context: int, x: Intuple) -> BellInequality:
    """``P_context(x) >= 0`` in coefficient form."""
    omni = space.omni
    vals = []
    for i in range(omni.n):
        g = decode(omni, omni.full, i)
        vals.append(int(g.restrict(context).outcomes == x.outcomes))
    return inequality_from_function(space, DistVector(omni, vals))


def positivity_gamma(space: EventSpace, context: int, x: Intuple) -> list[Intuple]:
    """Vertices on which ``P_context(x)`` is positive."""
    omni = space.omni
    return [g for g in (decode(omni, omni.full, i) for i in range(omni.n)) if g.restrict(context).outcomes == x.outcomes]


__all__ = [
    "LinearSystem",
    "RowTag",
    "Verdict",
    "build_system",
    "rref",
    "nullspace",
    "rank",
    "tbic_check",
    "affine_rank",
    "polytope_dimension",
    "facet_check",
    "brute_force_facets",
    "positivity_inequality",
    "positivity_gamma",
]
