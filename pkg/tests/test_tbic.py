import random
from fractions import Fraction

import pytest

from bellmd.algebra import Intuple, decode, encode
from bellmd.contexts import BellInequality, EventSpace, chsh_family, off_psi_orders, vertex_values
from bellmd.multidev import DistVector
from bellmd.pioneer import PioneerSpec, coefficients, gamma_set, iter_pioneers
from bellmd.tbic import (
    build_system,
    brute_force_facets,
    facet_check,
    nullspace,
    positivity_gamma,
    positivity_inequality,
    rank,
    rref,
    tbic_check,
)

AB = 0b11


def _flip(space, idx, *obs):
    g = list(decode(space.omni, space.omni.full, idx).outcomes)
    for e in obs:
        g[e] ^= 1
    return encode(space.omni, Intuple.full(g))


def test_binary_rows_are_four_term_parities():
    sp = EventSpace.binary(2)
    sys = build_system(sp, range(16))
    for row, tag in zip(sys.rows, sys.tags):
        g = tag.gamma
        want = {g: 1, _flip(sp, g, tag.p): -1, _flip(sp, g, tag.q): -1, _flip(sp, g, tag.p, tag.q): 1}
        assert row == {k: Fraction(v) for k, v in want.items()}


def test_full_gamma_solutions_are_psi_functions():
    # with Gamma everything the solutions are exactly the functions without mixed orders
    sp = EventSpace.binary(2)
    basis = nullspace(build_system(sp, range(16)))
    assert len(basis) == 9
    for v in basis:
        assert off_psi_orders(sp, DistVector(sp.omni, v)) == []


def test_full_gamma_not_minimal():
    v = tbic_check(EventSpace.binary(2), range(16))
    assert v.verdict == "not_minimal" and v.nullity == 9


def test_rref_and_nullspace_small():
    assert nullspace([], 3) == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert nullspace([{0: Fraction(1)}, {1: Fraction(1)}], 2) == []
    basis = nullspace([{0: Fraction(1), 1: Fraction(-1)}], 2)
    assert basis == [[1, 1]]
    piv = rref([{0: Fraction(2), 1: Fraction(4)}, {0: Fraction(1), 1: Fraction(3)}])
    assert piv == {0: {0: 1}, 1: {1: 1}}
    assert rank([[1, 2], [2, 4]]) == 1
    with pytest.raises(ValueError):
        nullspace([{0: Fraction(1)}])


def test_nullspace_invariant_under_row_order():
    rng = random.Random(3)
    sp = EventSpace.binary(2)
    gamma = gamma_set(PioneerSpec(2, [AB], [[AB, 0b01]]))
    sys = build_system(sp, gamma)
    base = nullspace(sys)
    for _ in range(5):
        rows = list(sys.rows)
        rng.shuffle(rows)
        assert rank(base) == rank(nullspace(rows, sys.n_unknowns)) == 1
        v, w = base[0], nullspace(rows, sys.n_unknowns)[0]
        assert [x * w[0] for x in v] == [x * v[0] for x in w]


def test_pioneer_sets_are_tight():
    for n in (1, 2, 3):
        for spec in list(iter_pioneers(n))[::5]:
            g = gamma_set(spec)
            v = tbic_check(EventSpace.binary(n), g)
            assert v.tight
            assert v.f.values.tolist() == [Fraction(x) for x in g.indicator().values]


def test_single_outcome_only_zero_function():
    # a lone vertex supports no nonzero Psi-function vanishing elsewhere
    sp = EventSpace.binary(2)
    v = tbic_check(sp, [Intuple.full([0, 0, 0, 0])])
    assert v.verdict == "not_dependent" and v.nullity == 0


def test_positivity_gamma_is_tight():
    for sp in (EventSpace.binary(2), EventSpace.from_lists([[2, 3], [3]])):
        c = sp.contexts[-1]
        x = Intuple.from_map({e: 1 for e in range(len(sp.omni.sizes)) if c >> e & 1})
        v = tbic_check(sp, positivity_gamma(sp, c, x))
        assert v.tight
        assert v.f == vertex_values(positivity_inequality(sp, c, x))


def test_extra_point_breaks_minimality():
    sp = EventSpace.binary(2)
    g = gamma_set(PioneerSpec(2, [AB], [[AB]]))
    members = [encode(sp.omni, t) for t in g.intuples()]
    extra = next(i for i in range(16) if i not in members)
    v = tbic_check(sp, members + [extra])
    assert v.verdict == "not_minimal" and v.nullity == 2


def test_mixed_sign_solution_reported():
    sp = EventSpace.binary(2)
    v = tbic_check(sp, [0, 3, 5, 7, 8, 10, 13, 14])
    assert v.verdict == "not_positive" and v.nullity == 1
    assert v.witness["reason"] == "mixed signs"


def test_pioneer_set_minus_a_point_fails():
    sp = EventSpace.binary(2)
    inside = sorted(encode(sp.omni, t) for t in gamma_set(PioneerSpec(2, [AB], [[AB]])).intuples())
    assert not tbic_check(sp, inside[1:]).tight


def test_gamma_validation():
    sp = EventSpace.binary(2)
    with pytest.raises(ValueError):
        tbic_check(sp, [])
    with pytest.raises(ValueError):
        tbic_check(sp, [99])
    with pytest.raises(ValueError):
        tbic_check(sp, [Intuple.from_map({0: 0})])


def test_verdict_json():
    sp = EventSpace.binary(2)
    v = tbic_check(sp, gamma_set(PioneerSpec(2, [AB], [[AB]])))
    js = v.to_json()
    assert js["verdict"] == "tight" and js["nullity"] == 1
    assert sorted(set(js["f"])) == ["0", "1"]


def test_facet_check_examples():
    sp = EventSpace.binary(2)
    assert all(facet_check(sp, i.with_vertex_function()) for i in chsh_family(sp))
    c = sp.contexts[0]
    assert facet_check(sp, positivity_inequality(sp, c, Intuple.from_map({0: 0, 2: 1})))
    a, b = chsh_family(sp)[:2]
    combo = BellInequality(sp, a.constant + b.constant, a.terms + b.terms).with_vertex_function()
    assert not facet_check(sp, combo)
    with pytest.raises(ValueError):
        facet_check(sp, BellInequality(sp, Fraction(1), ()))


def test_brute_force_facets():
    sp = EventSpace.binary(2)
    facets = brute_force_facets(sp)
    assert len(facets) == 24
    assert all(facet_check(sp, f) for f in facets)
    pioneers = {coefficients(s).canonical() for s in iter_pioneers(2, top_level_only=True)}
    assert len(pioneers) == 8
    assert pioneers <= set(facets)
    positivity = [f for f in facets if f not in pioneers]
    assert len(positivity) == 16
    for f in positivity:
        vals = set(f.omni_f.values)
        assert len(vals) == 2 and 0 in vals and sum(1 for v in f.omni_f.values if v) == 4


def test_brute_force_facets_scope():
    with pytest.raises(ValueError):
        brute_force_facets(EventSpace.binary(3))
