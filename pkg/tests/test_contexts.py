import math
from fractions import Fraction

import numpy as np
import pytest

from bellmd.algebra import Intuple, decode, encode, submasks
from bellmd.contexts import (
    BellInequality,
    EventSpace,
    MultiContextDistribution,
    ParameterDependenceError,
    Term,
    all_vertices,
    bell_mixture,
    chsh_family,
    check_outcome_independence,
    check_parameter_independence,
    deterministic_pi,
    evaluate_inequality,
    inequality_from_function,
    off_psi_orders,
    project_omni,
    projection_identity_holds,
    vertex_values,
)
from bellmd.multidev import DistVector, multideviation
from bellmd.tbic import polytope_dimension

from conftest import random_distribution, random_function


@pytest.fixture
def space2():
    return EventSpace.binary(2)


def test_binary_space_layout(space2):
    assert space2.flat_ids == ("1", "2", "3", "4")
    assert space2.observer_ids == ("A", "B")
    assert space2.contexts == (0b0101, 0b1001, 0b0110, 0b1010)
    assert len(space2.psi) == 9


def test_psi_definition():
    sp = EventSpace.from_lists([[2, 3, 2], [2], [3, 2]])
    for r in submasks(sp.omni.full):
        per = [sum(1 for e in sp.observables_of[i] if r >> e & 1) for i in range(3)]
        assert (r in sp.psi) == all(c <= 1 for c in per)


def test_space_validation_and_json():
    with pytest.raises(ValueError):
        EventSpace(("A",), (("1", "1"),), ((2, 2),))
    with pytest.raises(ValueError):
        EventSpace(("A",), (("1",),), ((1,),))
    sp = EventSpace.from_lists([[2, 3], [3]])
    assert EventSpace.from_json(sp.to_json()) == sp


def test_deterministic_examples(space2):
    g = deterministic_pi(space2, Intuple.full([0, 0, 0, 0]))
    for c in space2.contexts:
        assert list(g[c].values) == [1, 0, 0, 0]
    gammas = {tuple(np.concatenate([deterministic_pi(space2, v)[c].values for c in space2.contexts]))
              for v in all_vertices(space2)}
    assert len(gammas) == 16
    with pytest.raises(ValueError):
        deterministic_pi(space2, Intuple.from_map({0: 0}))


def test_vertices_are_parameter_independent():
    sp = EventSpace.from_lists([[2, 3], [3, 2]])
    for v in all_vertices(sp)[::7]:
        assert check_parameter_independence(deterministic_pi(sp, v)).ok


def test_mixtures(space2, rng):
    point = DistVector.point(space2.omni, Intuple.full([1, 0, 1, 1]))
    assert bell_mixture(space2, point) == deterministic_pi(space2, Intuple.full([1, 0, 1, 1]))
    uni = bell_mixture(space2, DistVector.uniform(space2.omni))
    for c in space2.contexts:
        assert list(uni[c].values) == [Fraction(1, 4)] * 4
    for _ in range(20):
        d = bell_mixture(space2, random_distribution(rng, space2.omni, zeros=0.3))
        assert check_parameter_independence(d).ok
        for ineq in chsh_family(space2):
            assert evaluate_inequality(ineq, d) >= 0


def test_mixture_rejects_non_probability(space2):
    with pytest.raises(ValueError):
        bell_mixture(space2, DistVector(space2.omni, [2] + [0] * 14 + [-1]))


def test_projection_equals_mixture(rng):
    for sp in (EventSpace.binary(2), EventSpace.from_lists([[2, 3], [3]])):
        for _ in range(10):
            mu = random_distribution(rng, sp.omni, zeros=0.2)
            assert project_omni(sp, mu) == bell_mixture(sp, mu)
            assert projection_identity_holds(sp, mu).ok


def test_literal_scale_fails_on_empty_order(rng):
    # the factor must use the observables outside the whole context, not outside p_sigma
    sp = EventSpace.binary(2)
    mu = random_distribution(rng, sp.omni)

    def literal(space, context, sigma):
        return space.omni.card(space.omni.full & ~sigma)

    res = projection_identity_holds(sp, mu, scale=literal)
    assert not res.ok
    assert res.witness["sigma"] == []


def test_signalling_detected(space2):
    base = bell_mixture(space2, DistVector.uniform(space2.omni))
    dists = dict(base.dists)
    c = space2.contexts[1]
    # shift A's marginal only in the context (1, 4)
    dists[c] = DistVector(dists[c].ps, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8)])
    d = MultiContextDistribution(space2, dists)
    res = check_parameter_independence(d)
    assert not res.ok
    assert res.witness["observables"] == ["1"]
    with pytest.raises(ParameterDependenceError):
        evaluate_inequality(chsh_family(space2)[0], d)


def test_pi_as_multideviation_condition(rng):
    sp = EventSpace.from_lists([[2, 3], [2, 2]])
    d = bell_mixture(sp, random_distribution(rng, sp.omni))
    for p in sp.contexts:
        for q in sp.contexts:
            for sig in submasks(p & q):
                lp = multideviation(d[p], sp.local(p, sig))
                lq = multideviation(d[q], sp.local(q, sig))
                n_p = sp.omni.card(p & ~sig)
                n_q = sp.omni.card(q & ~sig)
                assert list(lp * n_p) == list(lq * n_q)


def test_determinism_not_preserved_by_mixing(space2):
    a = deterministic_pi(space2, Intuple.full([0, 0, 0, 0]))
    mix = bell_mixture(space2, DistVector(space2.omni, [Fraction(1, 2)] + [0] * 14 + [Fraction(1, 2)]))
    assert max(a[space2.contexts[0]].values) == 1
    assert max(mix[space2.contexts[0]].values) == Fraction(1, 2)


def test_outcome_independence():
    from bellmd.algebra import ProductSet

    ps = ProductSet([2, 3])
    pa, pb = [Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 2), Fraction(1, 6), Fraction(1, 3)]
    prod = DistVector(ps, [a * b for a in pa for b in pb])
    assert check_outcome_independence(prod)
    corr = DistVector(ProductSet([2, 2]), [Fraction(1, 2), 0, 0, Fraction(1, 2)])
    assert not check_outcome_independence(corr)
    assert check_outcome_independence(DistVector.point(ps, Intuple.full([1, 2])))


def test_chsh_at_tsirelson_angles(space2):
    # singlet-like statistics sum-of-angles form: P(x) = (1 + (-1)^k cos(theta_A + theta_B)) / 4
    angles = {0: 0.0, 1: math.pi / 2, 2: -math.pi / 4, 3: math.pi / 4}
    arrays = {}
    for c in space2.contexts:
        a, b = [e for e in range(4) if c >> e & 1]
        s = math.cos(angles[a] + angles[b])
        arrays[c] = [(1 + s) / 4, (1 - s) / 4, (1 - s) / 4, (1 + s) / 4]
    d = MultiContextDistribution.from_arrays(space2, arrays)
    vals = [float(evaluate_inequality(i, d)) for i in chsh_family(space2)]
    assert min(vals) == pytest.approx(0.5 - math.sqrt(2) / 2, abs=1e-12)


def test_constant_only_inequality(space2):
    ineq = BellInequality(space2, Fraction(3, 7), ())
    d = bell_mixture(space2, DistVector.uniform(space2.omni))
    assert evaluate_inequality(ineq, d) == Fraction(3, 7)


def test_inequality_from_function_is_parseval(rng):
    """sum_gamma f mu equals the coefficient form on the projected contexts."""
    for sp, reduced in ((EventSpace.binary(2), True), (EventSpace.from_lists([[2, 3], [3, 2]]), False)):
        mu = random_distribution(rng, sp.omni)
        d = project_omni(sp, mu)
        # a Psi-supported function: sum of functions of single contexts
        vals = []
        for idx in range(sp.omni.n):
            g = decode(sp.omni, sp.omni.full, idx)
            vals.append(sum(Fraction((k + 1) * (sum(g.restrict(c).outcomes) % 3), 5)
                            for k, c in enumerate(sp.contexts)))
        f = DistVector(sp.omni, vals)
        assert off_psi_orders(sp, f) == []
        ineq = inequality_from_function(sp, f, reduced=reduced)
        direct = sum(a * b for a, b in zip(f.values, mu.values))
        assert evaluate_inequality(ineq, d) == direct
        assert vertex_values(ineq) == f


def test_inequality_from_function_rejects_off_psi(space2, rng):
    f = random_function(rng, space2.omni)
    with pytest.raises(ValueError):
        inequality_from_function(space2, f)


def test_chsh_vertices_and_saturation(space2):
    for ineq in chsh_family(space2):
        f = vertex_values(ineq)
        assert sorted(f.values) == [0] * 8 + [1] * 8


def test_canonical_scaling(space2):
    ineq = chsh_family(space2)[0]
    c = ineq.canonical()
    assert c.constant == 1 and all(abs(t.coeff) == 2 for t in c.terms)
    assert c.canonical() == c


def test_inequality_json_roundtrip(space2):
    ineq = chsh_family(space2)[3].with_vertex_function()
    back = BellInequality.from_json(ineq.to_json())
    assert back == ineq and back.omni_f == ineq.omni_f


def test_distribution_json_roundtrip(space2, rng):
    d = bell_mixture(space2, random_distribution(rng, space2.omni))
    assert MultiContextDistribution.from_json(space2, d.to_json()) == d


def test_bad_terms_rejected(space2):
    with pytest.raises(ValueError):
        BellInequality(space2, 0, (Term(0b11, Intuple.ones(0b11), Fraction(1)),))


def test_polytope_dimension(space2):
    assert polytope_dimension(space2) == 8


def test_evaluate_uses_first_context(space2, rng):
    d = bell_mixture(space2, random_distribution(rng, space2.omni))
    rho = 0b0001
    ineq = BellInequality(space2, 0, (Term(rho, Intuple.ones(rho), Fraction(1)),))
    c = space2.first_context(rho)
    assert c == space2.contexts[0]
    expect = multideviation(d[c], space2.local(c, rho))[encode(d[c].ps, Intuple.from_map({0: 0}))]
    assert evaluate_inequality(ineq, d) == expect
