"""Pioneer sets and the tight Bell inequalities they generate.

Work happens on the binary space with two observables per observer:
observer ``i`` owns ``p_i`` (omni index ``2i``) and ``q_i`` (``2i + 1``).
A label ``(sigma, rho)`` of two observer subsets names the vertex whose
outcome is 2 exactly on ``p_j`` for ``j`` in ``sigma ^ rho`` and on ``q_j``
for ``j`` in ``rho``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .algebra import Intuple, decode, elements, encode, full_mask, mask_of, popcount, submasks
from .contexts import BellInequality, EventSpace, Term, default_observer_ids, inequality_from_function, vertex_values
from .multidev import DistVector, LatticeIntuple

MAX_FULL_ENUMERATION = 4


# -- set-family helpers --------------------------------------------------------


def _check_family(S: Iterable[int], z: int) -> frozenset[int]:
    S = frozenset(S)
    for s in S:
        if s & ~z:
            raise ValueError(f"member {elements(s)} is not a subset of {elements(z)}")
    return S


def odd_out(S: Iterable[int], z: int) -> frozenset[int]:
    """``{sigma <= z : an odd number of members of S lie inside sigma}``."""
    S = _check_family(S, z)
    return frozenset(sig for sig in submasks(z) if sum(1 for s in S if s & ~sig == 0) % 2)


def is_connected(S: Iterable[int], z: int) -> bool:
    S = _check_family(S, z)
    if popcount(z) <= 1:
        return True
    members = [s for s in S if s]
    covered = 0
    for s in members:
        covered |= s
    if covered != z:
        return False
    # union-find over members; overlapping members merge
    parent = list(range(len(members)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in itertools.combinations(range(len(members)), 2):
        if members[a] & members[b]:
            parent[find(a)] = find(b)
    return len({find(a) for a in range(len(members))}) == 1


# -- specs ---------------------------------------------------------------------


@dataclass(frozen=True)
class PioneerSpec:
    """A partition of the observers and one family of subsets per block."""

    n_observers: int
    partition: tuple[int, ...]
    family: tuple[tuple[int, ...], ...]

    def __init__(self, n_observers: int, partition: Sequence[int], family: Sequence[Iterable[int]], strict: bool = True):
        blocks = sorted(zip(partition, family), key=lambda bf: min(elements(bf[0])) if bf[0] else -1)
        partition = tuple(b for b, _ in blocks)
        family = tuple(tuple(sorted(set(f))) for _, f in blocks)
        object.__setattr__(self, "n_observers", int(n_observers))
        object.__setattr__(self, "partition", partition)
        object.__setattr__(self, "family", family)
        self._validate(strict)

    def _validate(self, strict: bool) -> None:
        seen = 0
        for z, S in zip(self.partition, self.family):
            if not z or z & seen:
                raise ValueError("partition blocks must be nonempty and disjoint")
            seen |= z
            _check_family(S, z)
            if strict and not is_connected(S, z):
                raise ValueError(f"family on block {elements(z)} violates the connectivity condition")
        if seen != full_mask(self.n_observers):
            raise ValueError("partition must cover every observer")

    @property
    def is_top_level(self) -> bool:
        return len(self.partition) == 1

    def is_valid(self) -> bool:
        return all(is_connected(S, z) for z, S in zip(self.partition, self.family))

    @property
    def starred(self) -> tuple[frozenset[int], ...]:
        return tuple(odd_out(S, z) for z, S in zip(self.partition, self.family))

    def to_json(self) -> dict:
        return {
            "partition": [elements(z) for z in self.partition],
            "family": [[elements(s) for s in S] for S in self.family],
        }

    @classmethod
    def from_json(cls, data: dict, n_observers: int | None = None, strict: bool = True) -> "PioneerSpec":
        ids = [x for b in data["partition"] for x in b]
        if n_observers is None:
            n_observers = len(ids)
        names = {name: k for k, name in enumerate(default_observer_ids(n_observers))}

        def index(x) -> int:
            # observers may be given by index or by letter
            if isinstance(x, int):
                return x
            if x not in names:
                raise ValueError(f"unknown observer {x!r}")
            return names[x]

        partition = [mask_of(index(x) for x in b) for b in data["partition"]]
        family = [[mask_of(index(x) for x in s) for s in S] for S in data["family"]]
        if len(partition) != len(family):
            raise ValueError("one family per partition block")
        return cls(n_observers, partition, family, strict=strict)


# -- labels and Gamma ------------------------------------------------------------


def label_to_intuple(n: int, sigma: int, rho: int) -> Intuple:
    outs = []
    for i in range(n):
        outs.append((sigma ^ rho) >> i & 1)
        outs.append(rho >> i & 1)
    return Intuple.full(outs)


def intuple_to_label(n: int, gamma: Intuple) -> tuple[int, int]:
    o = gamma.outcomes
    if len(o) != 2 * n:
        raise ValueError("intuple does not cover the binary space")
    rho = sum(o[2 * i + 1] << i for i in range(n))
    sigma = rho ^ sum(o[2 * i] << i for i in range(n))
    return sigma, rho


def in_block(Sstar: frozenset[int], mu: int, nu: int) -> bool:
    return (mu in Sstar) == (popcount(nu) % 2 == 1)


@dataclass(frozen=True)
class GammaSet:
    spec: PioneerSpec
    labels: frozenset[tuple[int, int]]

    @property
    def space(self) -> EventSpace:
        return EventSpace.binary(self.spec.n_observers)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label) -> bool:
        return label in self.labels

    def intuples(self) -> list[Intuple]:
        n = self.spec.n_observers
        return sorted(label_to_intuple(n, s, r) for s, r in self.labels)

    def indicator(self) -> DistVector:
        sp = self.space
        vals = [0] * sp.omni.n
        n = self.spec.n_observers
        for s, r in self.labels:
            vals[encode(sp.omni, label_to_intuple(n, s, r))] = 1
        return DistVector(sp.omni, vals)


def _membership(spec: PioneerSpec):
    blocks = list(zip(spec.partition, spec.starred))

    def member(sigma: int, rho: int) -> bool:
        return all(in_block(st, sigma & z, rho & z) for z, st in blocks)

    return member


def gamma_set(spec: PioneerSpec) -> GammaSet:
    member = _membership(spec)
    full = full_mask(spec.n_observers)
    labels = frozenset((s, r) for s in submasks(full) for r in submasks(full) if member(s, r))
    return GammaSet(spec, labels)


# -- coefficients ---------------------------------------------------------------


def coefficient_q(spec: PioneerSpec, sigma: int, rho: int) -> Fraction:
    """``Q_f`` at the all-first reference on observables ``p_{sigma - rho} q_rho``, ``f`` the indicator of Gamma."""
    if rho & ~sigma:
        raise ValueError("rho must be a subset of sigma")
    out = Fraction(1, 2 ** len(spec.partition))
    for z, st in zip(spec.partition, spec.starred):
        term = Fraction(int(z & sigma == 0))
        if z & ~sigma == 0:
            acc = 0
            for mu in submasks(z):
                sign = (-1) ** popcount(mu & ~rho) * (-1 if mu in st else 1)
                acc += sign
            term += Fraction(acc, 2 ** popcount(z))
        out *= term
    return out


def observables_for(n: int, sigma: int, rho: int) -> int:
    """Omni mask of ``p_i`` for ``i`` in ``sigma - rho`` and ``q_i`` for ``i`` in ``rho``."""
    m = 0
    for i in range(n):
        if rho >> i & 1:
            m |= 1 << (2 * i + 1)
        elif sigma >> i & 1:
            m |= 1 << (2 * i)
    return m


def coefficients(spec: PioneerSpec) -> BellInequality:
    """The inequality of a pioneer set, normalized so vertex values are the indicator of Gamma."""
    n = spec.n_observers
    space = EventSpace.binary(n)
    full = full_mask(n)
    terms = []
    for sigma in submasks(full):
        if not sigma:
            continue
        for rho in submasks(sigma):
            q = coefficient_q(spec, sigma, rho)
            if q:
                obs = observables_for(n, sigma, rho)
                terms.append(Term(obs, Intuple.ones(obs), 2**n * q))
    constant = coefficient_q(spec, 0, 0)
    return BellInequality(space, constant, tuple(terms), gamma_set(spec).indicator())


def pioneer_inequality_from_gamma(spec: PioneerSpec) -> BellInequality:
    """Same inequality, computed by transforming the indicator of Gamma."""
    return inequality_from_function(EventSpace.binary(spec.n_observers), gamma_set(spec).indicator())


def simplest_inequality(n: int, phi: int, m: int) -> BellInequality:
    """``1/2 + (-1)^m (2^(n-1) Q^phi - sum_rho Q^rho) >= 0`` over full-order multideviations.

    ``Q^rho`` is the top-order multideviation of the context measuring
    ``q`` on ``rho`` and ``p`` elsewhere.
    """
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    full = full_mask(n)
    if phi & ~full:
        raise ValueError("phi must be a set of observers")
    sign = -1 if m else 1
    terms = []
    for rho in submasks(full):
        obs = observables_for(n, full, rho)
        c = -sign + (sign * 2 ** (n - 1) if rho == phi else 0)
        terms.append(Term(obs, Intuple.ones(obs), Fraction(c)))
    ineq = BellInequality(EventSpace.binary(n), Fraction(1, 2), tuple(terms))
    return ineq.with_vertex_function()


# -- enumeration -----------------------------------------------------------------


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    """Set partitions in a fixed order: the first item's block is chosen first."""
    if not items:
        yield []
        return
    first, rest = items[0], list(items[1:])
    for k in range(len(rest) + 1):
        for others in itertools.combinations(rest, k):
            block = [first, *others]
            remaining = [x for x in rest if x not in others]
            for tail in set_partitions(remaining):
                yield [block, *tail]


@lru_cache(maxsize=None)
def connected_families(k: int) -> tuple[tuple[int, ...], ...]:
    """All connected families over the block ``{0..k-1}``, in bit order of the family index."""
    z = full_mask(k)
    subsets = list(submasks(z))
    out = []
    for code in range(1 << len(subsets)):
        S = tuple(s for j, s in enumerate(subsets) if code >> j & 1)
        if is_connected(S, z):
            out.append(S)
    return tuple(out)


def _embed(S: tuple[int, ...], block: Sequence[int]) -> tuple[int, ...]:
    return tuple(mask_of(block[j] for j in elements(s)) for s in S)


def _partitions(n: int, top_level_only: bool) -> list[list[list[int]]]:
    if top_level_only:
        return [[list(range(n))]]
    return list(set_partitions(list(range(n))))


def count_pioneers(n: int, top_level_only: bool = False) -> int:
    if n > MAX_FULL_ENUMERATION:
        raise ValueError(f"enumeration beyond {MAX_FULL_ENUMERATION} observers is refused")
    if n < 1:
        raise ValueError("need at least one observer")
    total = 0
    for part in _partitions(n, top_level_only):
        c = 1
        for block in part:
            c *= len(connected_families(len(block)))
        total += c
    return total


def iter_pioneers(n: int, top_level_only: bool = False) -> Iterator[PioneerSpec]:
    if n > MAX_FULL_ENUMERATION:
        raise ValueError(f"enumeration beyond {MAX_FULL_ENUMERATION} observers is refused")
    for part in _partitions(n, top_level_only):
        masks = [mask_of(b) for b in part]
        choices = [connected_families(len(b)) for b in part]
        for combo in itertools.product(*choices):
            fam = [_embed(S, b) for S, b in zip(combo, part)]
            yield PioneerSpec(n, masks, fam)


def enumerate_pioneers(n: int, top_level_only: bool = False, stream: bool = False):
    """``(count, specs)``; ``specs`` is a lazy iterator when ``stream`` is set, else ``None``."""
    count = count_pioneers(n, top_level_only)
    return count, (iter_pioneers(n, top_level_only) if stream else None)


def pioneer_at(n: int, index: int, top_level_only: bool = False) -> PioneerSpec:
    """The ``index``-th spec of :func:`iter_pioneers` without walking the stream."""
    for part in _partitions(n, top_level_only):
        choices = [connected_families(len(b)) for b in part]
        size = 1
        for c in choices:
            size *= len(c)
        if index < size:
            picks = []
            for c in reversed(choices):
                index, j = divmod(index, len(c))
                picks.append(c[j])
            picks.reverse()
            return PioneerSpec(n, [mask_of(b) for b in part], [_embed(S, b) for S, b in zip(picks, part)])
        index -= size
    raise IndexError("pioneer index out of range")


def broken_families(n: int) -> Iterator[PioneerSpec]:
    """Top-level families that fail the connectivity condition."""
    z = full_mask(n)
    subsets = list(submasks(z))
    for code in range(1 << len(subsets)):
        S = tuple(s for j, s in enumerate(subsets) if code >> j & 1)
        if not is_connected(S, z):
            yield PioneerSpec(n, [z], [S], strict=False)


# -- connectivity through the difference function ------------------------------


def difference(Sstar: frozenset[int], mu: int, i: int) -> int:
    """``{i}`` when toggling ``i`` changes membership of ``mu`` in ``S*``, else empty."""
    return (1 << i) if (mu in Sstar) != ((mu ^ (1 << i)) in Sstar) else 0


def connectivity_verify(spec: PioneerSpec) -> bool:
    """Walk the equalities between neighbouring members of Gamma; True iff they tie all of it together."""
    n = spec.n_observers
    gam = gamma_set(spec)
    labels = sorted(gam.labels)
    if not labels:
        return False
    block_of = {}
    for z, st in zip(spec.partition, spec.starred):
        for i in elements(z):
            block_of[i] = (z, st)
    seen = {labels[0]}
    stack = [labels[0]]
    while stack:
        sigma, rho = stack.pop()
        for i in range(n):
            z, st = block_of[i]
            nb = (sigma ^ (1 << i), rho ^ difference(st, sigma & z, i))
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(labels)


# -- hypercube realizability -----------------------------------------------------


def hypercube_realizability(assignment: dict[int, int], n: int | None = None) -> bool:
    """Can the ±1 signs on contexts be written as products of per-observable signs?"""
    if n is None:
        n = max((r.bit_length() for r in assignment), default=0)
        n = max(n, (len(assignment) - 1).bit_length())
    full = full_mask(n)
    if set(assignment) != set(submasks(full)):
        raise ValueError("assignment must give a sign for every context")
    if any(v not in (1, -1) for v in assignment.values()):
        raise ValueError("signs must be +1 or -1")
    g = {r: int(v == -1) for r, v in assignment.items()}
    base = g[0]
    slope = {i: g[1 << i] ^ base for i in range(n)}
    for r in submasks(full):
        pred = base
        for i in elements(r):
            pred ^= slope[i]
        if pred != g[r]:
            return False
    return True


# -- lifting ---------------------------------------------------------------------


def lift(
    ineq: BellInequality,
    target: EventSpace,
    p: Sequence[int],
    q: Sequence[int],
    alpha: LatticeIntuple,
) -> BellInequality:
    """Carry an inequality on the binary space to ``target``.

    ``p[i]`` and ``q[i]`` are target observables of observer ``i`` standing
    in for the binary ``p_i`` and ``q_i``; ``alpha`` marks, on each of them,
    the outcomes that count as outcome 1.
    """
    n = target.n_observers
    src = ineq.space
    if src != EventSpace.binary(n):
        raise ValueError("source inequality must live on the binary space with matching observers")
    if len(p) != n or len(q) != n:
        raise ValueError("one p and one q observable per observer")
    image = []
    for i in range(n):
        if p[i] == q[i]:
            raise ValueError(f"observer {i}: p and q must differ")
        for o in (p[i], q[i]):
            if target.observer_of[o] != i:
                raise ValueError(f"observable {o} does not belong to observer {i}")
        image += [p[i], q[i]]
    if alpha.support != mask_of(image):
        raise ValueError("alpha must cover exactly the chosen p and q observables")
    alpha.validate(target.omni)
    blocks = alpha.as_map()

    terms = []
    for t in ineq.terms:
        if isinstance(t.reference, LatticeIntuple):
            raise ValueError("source inequality must use ordinary references")
        rho = mask_of(image[e] for e in elements(t.rho))
        sign = (-1) ** sum(t.reference.outcomes)
        sel = {image[e]: blocks[image[e]] for e in elements(t.rho)}
        if all(target.omni.sizes[e] == 2 for e in sel):
            # on two outcomes the Boolean multideviation is the ordinary one
            terms.append(Term(rho, Intuple.from_map({e: min(b) for e, b in sel.items()}), t.coeff * sign))
        else:
            terms.append(Term(rho, LatticeIntuple.from_map(sel), t.coeff * sign))
    lifted = BellInequality(target, ineq.constant, tuple(terms))
    return BellInequality(target, lifted.constant, lifted.terms, vertex_values(lifted))


def lift_function(f: DistVector, target: EventSpace, p, q, alpha: LatticeIntuple) -> DistVector:
    """``f*(gamma) = f(chi(gamma))`` with ``chi`` coarse-graining through ``alpha``."""
    n = target.n_observers
    blocks = alpha.as_map()
    src = f.ps
    vals = []
    for idx in range(target.omni.n):
        g = decode(target.omni, target.omni.full, idx).as_map()
        outs = []
        for i in range(n):
            outs += [0 if g[p[i]] in blocks[p[i]] else 1, 0 if g[q[i]] in blocks[q[i]] else 1]
        vals.append(f.values[encode(src, Intuple.full(outs))])
    return DistVector(target.omni, vals)


__all__ = [
    "PioneerSpec",
    "GammaSet",
    "odd_out",
    "is_connected",
    "gamma_set",
    "label_to_intuple",
    "intuple_to_label",
    "coefficient_q",
    "coefficients",
    "observables_for",
    "pioneer_inequality_from_gamma",
    "simplest_inequality",
    "set_partitions",
    "connected_families",
    "count_pioneers",
    "iter_pioneers",
    "enumerate_pioneers",
    "pioneer_at",
    "broken_families",
    "difference",
    "connectivity_verify",
    "hypercube_realizability",
    "lift",
    "lift_function",
]
