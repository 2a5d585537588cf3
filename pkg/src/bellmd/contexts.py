"""Event spaces with several measurement contexts, their distributions, and Bell inequalities.

Observables of all observers are numbered globally, observer by observer, so
a context (one observable per observer) is a bitmask over the omni-joint
product set and its own product set lists outcomes in observer order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
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
    mask_of,
    submasks,
    to_rational,
)
from .multidev import DistVector, LatticeIntuple, boolean_multidev, marginal, multideviation

PI_TOLERANCE = 1e-9


# -- event space ---------------------------------------------------------------


@dataclass(frozen=True)
class EventSpace:
    """Observers, their observables, and each observable's outcome count."""

    observer_ids: tuple[str, ...]
    observable_ids: tuple[tuple[str, ...], ...]
    outcomes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.observer_ids:
            raise ValueError("need at least one observer")
        if len(set(self.observer_ids)) != len(self.observer_ids):
            raise ValueError("observer ids must be unique")
        if not (len(self.observer_ids) == len(self.observable_ids) == len(self.outcomes)):
            raise ValueError("one observable list per observer")
        flat = [o for obs in self.observable_ids for o in obs]
        if len(set(flat)) != len(flat):
            raise ValueError("observable ids must be globally unique")
        for obs, outs in zip(self.observable_ids, self.outcomes):
            if not obs or len(obs) != len(outs):
                raise ValueError("every observer needs at least one observable and one size per observable")
        # ProductSet validates sizes and the 64-element cap
        ProductSet([n for outs in self.outcomes for n in outs])

    @classmethod
    def from_lists(cls, spec: Sequence[Sequence[int]], observer_ids=None) -> "EventSpace":
        """``spec[i]`` lists the outcome counts of observer ``i``'s observables."""
        observer_ids = tuple(observer_ids or default_observer_ids(len(spec)))
        ids, k = [], 1
        for sizes in spec:
            ids.append(tuple(str(k + j) for j in range(len(sizes))))
            k += len(sizes)
        return cls(observer_ids, tuple(ids), tuple(tuple(int(s) for s in sizes) for sizes in spec))

    @classmethod
    def binary(cls, n_observers: int) -> "EventSpace":
        """Two two-outcome observables per observer: observables ``2i`` and ``2i+1``."""
        return cls.from_lists([[2, 2]] * n_observers)

    @property
    def n_observers(self) -> int:
        return len(self.observer_ids)

    @cached_property
    def omni(self) -> ProductSet:
        return ProductSet([n for outs in self.outcomes for n in outs])

    @cached_property
    def observer_of(self) -> tuple[int, ...]:
        return tuple(i for i, obs in enumerate(self.observable_ids) for _ in obs)

    @cached_property
    def observables_of(self) -> tuple[tuple[int, ...], ...]:
        out, k = [], 0
        for obs in self.observable_ids:
            out.append(tuple(range(k, k + len(obs))))
            k += len(obs)
        return tuple(out)

    @cached_property
    def flat_ids(self) -> tuple[str, ...]:
        return tuple(o for obs in self.observable_ids for o in obs)

    def index_of(self, observable_id: str) -> int:
        try:
            return self.flat_ids.index(str(observable_id))
        except ValueError:
            raise ValueError(f"unknown observable {observable_id!r}") from None

    @property
    def is_binary(self) -> bool:
        return self.omni.is_binary

    @cached_property
    def contexts(self) -> tuple[int, ...]:
        """All joint measurement contexts, lexicographic in observable index."""
        return tuple(mask_of(c) for c in itertools.product(*self.observables_of))

    def context_space(self, context: int) -> ProductSet:
        return self.omni.sub(context)

    def is_comeasurable(self, rho: int) -> bool:
        self.omni.check(rho)
        seen = set()
        for e in elements(rho):
            i = self.observer_of[e]
            if i in seen:
                return False
            seen.add(i)
        return True

    @cached_property
    def psi(self) -> tuple[int, ...]:
        return tuple(r for r in submasks(self.omni.full) if self.is_comeasurable(r))

    def first_context(self, rho: int) -> int:
        for c in self.contexts:
            if rho & ~c == 0:
                return c
        raise ValueError(f"observables {self.ids_of(rho)} are not comeasurable")

    def local(self, context: int, rho: int) -> int:
        """Positions, inside ``context``'s product set, of the observables in ``rho``."""
        pos = {e: k for k, e in enumerate(elements(context))}
        return mask_of(pos[e] for e in elements(rho))

    def ids_of(self, mask: int) -> list[str]:
        return [self.flat_ids[e] for e in elements(mask)]

    def mask_from_ids(self, ids: Iterable[str]) -> int:
        return mask_of(self.index_of(i) for i in ids)

    def to_json(self) -> dict:
        return {
            "observers": [
                {"id": oid, "observables": [{"id": b, "outcomes": n} for b, n in zip(obs, outs)]}
                for oid, obs, outs in zip(self.observer_ids, self.observable_ids, self.outcomes)
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> "EventSpace":
        obs = data["observers"]
        return cls(
            tuple(str(o["id"]) for o in obs),
            tuple(tuple(str(b["id"]) for b in o["observables"]) for o in obs),
            tuple(tuple(int(b["outcomes"]) for b in o["observables"]) for o in obs),
        )


def default_observer_ids(n: int) -> list[str]:
    out = []
    for k in range(n):
        s, k1 = "", k
        while True:
            s = chr(ord("A") + k1 % 26) + s
            k1 = k1 // 26 - 1
            if k1 < 0:
                break
        out.append(s)
    return out


# -- multiple-context distributions -------------------------------------------


class Check(NamedTuple):
    ok: bool
    witness: dict | None = None


@dataclass(frozen=True, eq=False)
class MultiContextDistribution:
    space: EventSpace
    dists: dict[int, DistVector]
    approximate: bool = False

    def __post_init__(self):
        if set(self.dists) != set(self.space.contexts):
            raise ValueError("one distribution per context required")
        for c, d in self.dists.items():
            if d.ps != self.space.context_space(c):
                raise ValueError("context distribution has the wrong product set")
            if not self.approximate:
                d.check_probability()
            elif any(v < 0 for v in d.values) or abs(float(d.total()) - 1) > PI_TOLERANCE:
                raise ValueError("context distribution is not a probability vector")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultiContextDistribution)
            and self.space == other.space
            and all(self.dists[c] == other.dists[c] for c in self.space.contexts)
        )

    def __getitem__(self, context: int) -> DistVector:
        return self.dists[context]

    @classmethod
    def from_arrays(cls, space: EventSpace, arrays: dict[int, Iterable]) -> "MultiContextDistribution":
        """Build from float arrays; values are snapped onto the rational grid."""
        dists = {c: DistVector(space.context_space(c), [float(v) for v in arrays[c]]) for c in space.contexts}
        return cls(space, dists, approximate=True)

    def to_json(self) -> dict:
        return {
            "contexts": [
                {"context": self.space.ids_of(c), "probabilities": [format_rational(v) for v in self.dists[c].values]}
                for c in self.space.contexts
            ]
        }

    @classmethod
    def from_json(cls, space: EventSpace, data: dict) -> "MultiContextDistribution":
        dists = {}
        for row in data["contexts"]:
            c = space.mask_from_ids(row["context"])
            if c not in space.contexts:
                raise ValueError(f"{row['context']} is not a context")
            dists[c] = DistVector(space.context_space(c), row["probabilities"])
        return cls(space, dists)


def _check_full(space: EventSpace, gamma: Intuple) -> None:
    if gamma.support != space.omni.full:
        raise ValueError("gamma must assign an outcome to every observable")
    gamma.validate(space.omni)


def deterministic_pi(space: EventSpace, gamma: Intuple) -> MultiContextDistribution:
    _check_full(space, gamma)
    return MultiContextDistribution(
        space, {c: DistVector.point(space.context_space(c), _relabel(space, c, gamma.restrict(c))) for c in space.contexts}
    )


def _relabel(space: EventSpace, context: int, x: Intuple) -> Intuple:
    """Move an intuple over omni indices into context-local positions."""
    return Intuple(space.local(context, x.support), x.outcomes)


def bell_mixture(space: EventSpace, weights: DistVector) -> MultiContextDistribution:
    """``sum_gamma weights(gamma) G^gamma``, by direct summation over vertices."""
    if weights.ps != space.omni:
        raise ValueError("weights must live on the omni-joint product set")
    weights.check_probability()
    acc = {c: [Fraction(0)] * space.context_space(c).n for c in space.contexts}
    for idx, w in enumerate(weights.values):
        if not w:
            continue
        gamma = decode(space.omni, space.omni.full, idx)
        for c in space.contexts:
            acc[c][encode(space.context_space(c), _relabel(space, c, gamma.restrict(c)))] += w
    return MultiContextDistribution(space, {c: DistVector(space.context_space(c), v) for c, v in acc.items()})


def project_omni(space: EventSpace, mu: DistVector) -> MultiContextDistribution:
    """Each context sees the marginal of the omni-joint distribution on its observables."""
    if mu.ps != space.omni:
        raise ValueError("mu must live on the omni-joint product set")
    mu.check_probability()
    return MultiContextDistribution(space, {c: marginal(mu, c) for c in space.contexts})


def projection_scale(space: EventSpace, context: int, sigma: int) -> int:
    """``n`` over the observables outside the context; the ratio between the two multideviations."""
    del sigma  # the ratio is the same for every order inside one context
    return space.omni.card(space.omni.full & ~context)


def projection_identity_holds(space: EventSpace, mu: DistVector, scale=projection_scale) -> Check:
    """Compare ``Q^{p_sigma}`` of each projected context with the scaled omni-joint one.

    ``scale(space, context, sigma)`` gives the factor relating the two sides.
    """
    proj = project_omni(space, mu)
    for c in space.contexts:
        for sub in submasks(c):
            lhs = multideviation(proj[c], space.local(c, sub))
            rhs = multideviation(mu, sub)
            k = scale(space, c, sub)
            # both tables over the same intuples in the same order
            for x, a, b in zip(enumerate_intuples(space.omni, sub), lhs, rhs):
                if a != k * b:
                    return Check(False, {"context": space.ids_of(c), "sigma": space.ids_of(sub),
                                         "x": x.to_json(), "lhs": str(a), "rhs": str(k * b)})
    return Check(True)


# -- conditions ----------------------------------------------------------------


def _close(a: Fraction, b: Fraction, tol: float) -> bool:
    return a == b if tol == 0 else abs(float(a - b)) <= tol


def check_parameter_independence(d: MultiContextDistribution, tol: float | None = None) -> Check:
    """Marginals on the observables two contexts share must coincide.

    Exact for rational input; ``PI_TOLERANCE`` when the distribution came
    from floats (or ``tol`` if given).
    """
    if tol is None:
        tol = PI_TOLERANCE if d.approximate else 0
    space = d.space
    ctx = space.contexts
    for a_i, a in enumerate(ctx):
        for b in ctx[a_i + 1:]:
            shared = a & b
            if shared == 0:
                continue
            ma = marginal(d[a], space.local(a, shared)).values
            mb = marginal(d[b], space.local(b, shared)).values
            for k, (u, v) in enumerate(zip(ma, mb)):
                if not _close(u, v, tol):
                    x = decode(space.omni, shared, k)
                    return Check(False, {
                        "contexts": [space.ids_of(a), space.ids_of(b)],
                        "observables": space.ids_of(shared),
                        "outcome": [o + 1 for o in x.outcomes],
                        "values": [format_rational(u), format_rational(v)],
                    })
    return Check(True)


def check_outcome_independence(dist: DistVector) -> bool:
    ps = dist.ps
    n = ps.n
    first = {e: multideviation(dist, 1 << e) for e in range(len(ps))}
    for sigma in submasks(ps.full):
        q = multideviation(dist, sigma)
        for x, v in zip(enumerate_intuples(ps, sigma), q):
            prod = Fraction(1)
            for e, o in x.as_map().items():
                prod *= n * first[e][o]
            if n * v != prod:
                return False
    return True


# -- Bell inequalities ---------------------------------------------------------


class Term(NamedTuple):
    rho: int
    reference: Intuple | LatticeIntuple
    coeff: Fraction


def _ref_key(ref) -> tuple:
    if isinstance(ref, LatticeIntuple):
        return (1,) + ref.sort_key()
    return (0, ref.support, ref.outcomes)


@dataclass(frozen=True, eq=False)
class BellInequality:
    """``constant + sum coeff * Q^rho_{P_p}(reference) >= 0``.

    ``Q`` is read from the first context ``p`` containing ``rho``; lattice
    references use the Boolean multideviation ``W`` instead.  ``omni_f`` is
    the matching function on the omni-joint set, equal to the inequality's
    value on each deterministic vertex.
    """

    space: EventSpace
    constant: Fraction
    terms: tuple[Term, ...]
    omni_f: DistVector | None = field(default=None)

    def __post_init__(self):
        merged: dict[tuple, Fraction] = {}
        refs = {}
        for t in self.terms:
            t = Term(t.rho, t.reference, to_rational(t.coeff))
            if t.reference.support != t.rho:
                raise ValueError("reference must be supported on rho")
            if not t.rho or not self.space.is_comeasurable(t.rho):
                raise ValueError(f"{self.space.ids_of(t.rho)} is not a nonempty comeasurable set")
            t.reference.validate(self.space.omni)
            key = (t.rho, _ref_key(t.reference))
            merged[key] = merged.get(key, Fraction(0)) + t.coeff
            refs[key] = t.reference
        terms = tuple(Term(k[0], refs[k], c) for k, c in sorted(merged.items()) if c != 0)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "constant", to_rational(self.constant))
        if self.omni_f is not None and self.omni_f.ps != self.space.omni:
            raise ValueError("omni_f must live on the omni-joint product set")

    def key(self) -> tuple:
        return (self.constant, tuple((t.rho, _ref_key(t.reference), t.coeff) for t in self.terms))

    def __eq__(self, other) -> bool:
        return isinstance(other, BellInequality) and self.space == other.space and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def scaled(self, c) -> "BellInequality":
        c = to_rational(c)
        if c <= 0:
            raise ValueError("only positive scalings preserve the inequality")
        f = None if self.omni_f is None else self.omni_f.scale(c)
        return BellInequality(self.space, self.constant * c, tuple(Term(t.rho, t.reference, t.coeff * c) for t in self.terms), f)

    def canonical(self) -> "BellInequality":
        """Integer constant and coefficients with gcd 1."""
        vals = [self.constant] + [t.coeff for t in self.terms]
        return self.scaled(_integer_scale(vals))

    def with_vertex_function(self) -> "BellInequality":
        return BellInequality(self.space, self.constant, self.terms, vertex_values(self))

    def coefficient(self, rho: int, reference) -> Fraction:
        key = _ref_key(reference)
        for t in self.terms:
            if t.rho == rho and _ref_key(t.reference) == key:
                return t.coeff
        return Fraction(0)

    def to_json(self) -> dict:
        sp = self.space

        def ref_json(ref):
            if isinstance(ref, LatticeIntuple):
                return {"lattice": [[sp.flat_ids[e], sorted(o + 1 for o in b)] for e, b in ref.as_map().items()]}
            return [[sp.flat_ids[e], o + 1] for e, o in ref.as_map().items()]

        out = {
            "space": sp.to_json(),
            "constant": format_rational(self.constant),
            "terms": [{"rho": sp.ids_of(t.rho), "reference": ref_json(t.reference), "coeff": format_rational(t.coeff)}
                      for t in self.terms],
        }
        if self.omni_f is not None:
            out["omni_f"] = [format_rational(v) for v in self.omni_f.values]
        return out

    @classmethod
    def from_json(cls, data: dict, space: EventSpace | None = None) -> "BellInequality":
        if space is None:
            space = EventSpace.from_json(data["space"])
        terms = []
        for t in data["terms"]:
            rho = space.mask_from_ids(t["rho"])
            ref = t["reference"]
            if isinstance(ref, dict):
                ref = LatticeIntuple.from_map({space.index_of(e): [int(o) - 1 for o in outs] for e, outs in ref["lattice"]})
            else:
                ref = Intuple.from_map({space.index_of(e): int(o) - 1 for e, o in ref})
            terms.append(Term(rho, ref, to_rational(t["coeff"])))
        f = data.get("omni_f")
        f = None if f is None else DistVector(space.omni, f)
        return cls(space, to_rational(data["constant"]), tuple(terms), f)


def _integer_scale(vals: Sequence[Fraction]) -> Fraction:
    den = math.lcm(*(v.denominator for v in vals)) if vals else 1
    ints = [int(v * den) for v in vals]
    g = math.gcd(*ints) if any(ints) else 1
    return Fraction(den, g or 1)


def canonical_function(f: DistVector) -> tuple[int, ...]:
    """Integer vector with gcd 1 and the same sign pattern as ``f``."""
    c = _integer_scale(list(f.values))
    return tuple(int(v * c) for v in f.values)


def off_psi_orders(space: EventSpace, f: DistVector) -> list[int]:
    """Orders outside the comeasurable family on which ``f`` has nonzero multideviations."""
    psi = set(space.psi)
    ints = np.array(canonical_function(f), dtype=object)
    omni = space.omni
    bound = int(np.abs(ints).max(initial=0)) * omni.n * math.prod(2 * s for s in omni.sizes)
    if bound < 2**62:
        # vanishing is scale invariant, so exact int64 arithmetic suffices
        t = ints.astype(np.int64).reshape(omni.sizes)
        out = []
        for s in submasks(omni.full):
            if s in psi:
                continue
            drop = tuple(i for i in range(len(omni)) if not s >> i & 1)
            m = t.sum(axis=drop) if drop else t
            for axis, n in enumerate(omni.shape(s)):
                m = n * m - m.sum(axis=axis, keepdims=True)
            if np.any(m):
                out.append(s)
        return out
    return [s for s in submasks(omni.full)
            if s not in psi and any(v != 0 for v in multideviation(f, s))]


def inequality_from_function(space: EventSpace, f: DistVector, reduced: bool | None = None) -> BellInequality:
    """Coefficient form of ``sum_gamma f(gamma) mu(gamma) >= 0``.

    On binary spaces (``reduced``) each order contributes one term at the
    all-first reference; otherwise every outcome of every order is listed.
    """
    if f.ps != space.omni:
        raise ValueError("f must live on the omni-joint product set")
    bad = off_psi_orders(space, f)
    if bad:
        raise ValueError(f"f has multideviations outside the comeasurable family, e.g. {space.ids_of(bad[0])}")
    if reduced is None:
        reduced = space.is_binary
    if reduced and not space.is_binary:
        raise ValueError("reduced form needs a binary space")
    omni = space.omni
    terms = []
    for rho in space.psi:
        if not rho:
            continue
        q = multideviation(f, rho)
        if reduced:
            terms.append(Term(rho, Intuple.ones(rho), 2 ** space.n_observers * q[0]))
        else:
            k = omni.card(space.first_context(rho) & ~rho)
            terms.extend(Term(rho, x, k * v) for x, v in zip(enumerate_intuples(omni, rho), q) if v)
    return BellInequality(space, multideviation(f, 0)[0], tuple(terms), f)


def _term_value(space: EventSpace, t: Term, dist: DistVector, context: int, cache: dict) -> Fraction:
    local = space.local(context, t.rho)
    if isinstance(t.reference, LatticeIntuple):
        alpha = LatticeIntuple(local, t.reference.blocks)
        return boolean_multidev(dist, local, alpha)
    key = (context, local)
    if key not in cache:
        cache[key] = multideviation(dist, local)
    return cache[key][encode(dist.ps, Intuple(local, t.reference.outcomes))]


class ParameterDependenceError(ValueError):
    def __init__(self, witness: dict):
        super().__init__(f"distribution violates parameter independence: {witness}")
        self.witness = witness


def evaluate_inequality(ineq: BellInequality, d: MultiContextDistribution, check: bool = True) -> Fraction:
    if d.space != ineq.space:
        raise ValueError("inequality and distribution live on different event spaces")
    if check:
        pi = check_parameter_independence(d)
        if not pi.ok:
            raise ParameterDependenceError(pi.witness)
    space = ineq.space
    cache: dict = {}
    total = ineq.constant
    for t in ineq.terms:
        c = space.first_context(t.rho)
        total += t.coeff * _term_value(space, t, d[c], c, cache)
    return total


def vertex_values(ineq: BellInequality) -> DistVector:
    """The inequality's value at every deterministic vertex, as a function on the omni-joint set."""
    space = ineq.space
    omni = space.omni
    n_v = space.n_observers
    prepared = []
    for t in ineq.terms:
        c = space.first_context(t.rho)
        n_c = omni.card(c)
        prepared.append((t, n_c))
    out = []
    for idx in range(omni.n):
        gamma = decode(omni, omni.full, idx)
        g = gamma.as_map()
        v = ineq.constant
        for t, n_c in prepared:
            if isinstance(t.reference, LatticeIntuple):
                prod = 1
                for e, block in t.reference.as_map().items():
                    prod *= 1 if g[e] in block else -1
                v += t.coeff * Fraction(prod, 2 ** n_v)
            else:
                prod = 1
                for e, o in t.reference.as_map().items():
                    prod *= omni.sizes[e] * (g[e] == o) - 1
                v += t.coeff * Fraction(prod, n_c)
        out.append(v)
    return DistVector(omni, out)


def all_vertices(space: EventSpace) -> list[Intuple]:
    return enumerate_intuples(space.omni, space.omni.full)


def vertex_vector(space: EventSpace, gamma: Intuple) -> np.ndarray:
    """Concatenated context probability vectors of ``G^gamma``."""
    parts = []
    for c in space.contexts:
        ps = space.context_space(c)
        v = np.zeros(ps.n, dtype=np.int64)
        v[encode(ps, _relabel(space, c, gamma.restrict(c)))] = 1
        parts.append(v)
    return np.concatenate(parts)


def chsh_family(space: EventSpace) -> list[BellInequality]:
    """The eight CHSH inequalities ``1/2 -+ (Q^pp + Q^pq + Q^qp + Q^qq with one sign flipped) >= 0``."""
    if space.n_observers != 2 or not space.is_binary or any(len(o) != 2 for o in space.observable_ids):
        raise ValueError("CHSH needs two observers with two binary observables each")
    ctx = space.contexts
    out = []
    for flipped in range(4):
        for sign in (1, -1):
            terms = tuple(
                Term(c, Intuple.ones(c), Fraction(-sign * (-1 if k == flipped else 1)))
                for k, c in enumerate(ctx)
            )
            out.append(BellInequality(space, Fraction(1, 2), terms))
    return out


__all__ = [
    "EventSpace",
    "MultiContextDistribution",
    "BellInequality",
    "Term",
    "Check",
    "ParameterDependenceError",
    "PI_TOLERANCE",
    "default_observer_ids",
    "deterministic_pi",
    "bell_mixture",
    "project_omni",
    "projection_scale",
    "projection_identity_holds",
    "check_parameter_independence",
    "check_outcome_independence",
    "evaluate_inequality",
    "inequality_from_function",
    "off_psi_orders",
    "vertex_values",
    "canonical_function",
    "all_vertices",
    "vertex_vector",
    "chsh_family",
]
