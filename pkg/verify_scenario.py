"""Scenario structure: validation, the domination order, complementary hypergraphs."""

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from src.cycle import build_cycle
from src.errors import EnumerationCapError, PreconditionError
from src.scenario import (
    ContextString,
    Scenario,
    bits_of,
    bitstring_to_mask,
    buttons_of_light,
    complementary_hypergraph,
    dominates,
    lights_of_context,
    mask_of,
    mask_to_bitstring,
    maximal_complementary,
    maximal_contexts,
    validate_scenario,
)


def test_cycle_scenario_is_valid():
    print("Testing 4-cycle scenario validation...")
    report = validate_scenario(build_cycle(4))
    assert report.ok, report.to_dict()
    print("✅ C_4 passes validate_scenario")


def test_shared_light_rule_violation():
    s = Scenario.from_lists(2, 3, [[0, 1]], [[0, 1], [1, 2]])
    report = validate_scenario(s)
    assert not report.ok
    assert 'shared-light rule' in report.rules()
    where = report.violations[report.rules().index('shared-light rule')].where
    assert where['buttons'] == [0, 1]
    assert where['lights'] == [1]


def test_minimal_scenario_is_valid():
    s = Scenario.from_lists(1, 2, [[0]], [[0, 1]])
    assert validate_scenario(s).ok


@pytest.mark.parametrize('contexts, edges, rule', [
    ([[]], [[0, 1]], 'context.empty'),
    ([[0], [0]], [[0, 1]], 'context.duplicate'),
    ([[0]], [[0, 1], [2, 3]], 'button.uncovered'),
    ([[0]], [[0]], 'light.uncovered'),
])
def test_validation_rules(contexts, edges, rule):
    num_lights = 2 if rule == 'light.uncovered' else 1 + max(max(e) for e in edges)
    s = Scenario.from_lists(len(edges), num_lights, contexts, edges)
    assert rule in validate_scenario(s).rules()


def test_dominates_examples():
    assert dominates(ContextString.from_bitstring('110'), ContextString.from_bitstring('100'))
    assert not dominates(ContextString.from_bitstring('100'), ContextString.from_bitstring('110'))
    x = ContextString.from_bitstring('101')
    assert dominates(x, x)
    with pytest.raises(PreconditionError):
        dominates(ContextString.from_bitstring('10'), ContextString.from_bitstring('100'))


def test_dominates_is_a_partial_order_exhaustive():
    print("Checking domination order on all pairs for b = 5...")
    b = 5
    xs = [ContextString(m, b) for m in range(1 << b)]
    for x in xs:
        assert dominates(x, x)
    for x, y in itertools.product(xs, repeat=2):
        if dominates(x, y) and dominates(y, x):
            assert x == y
    for x, y, z in itertools.product(xs[::3], repeat=3):
        if dominates(x, y) and dominates(y, z):
            assert dominates(x, z)
    print("✅ reflexive, antisymmetric, transitive")


@settings(derandomize=True, max_examples=200)
@given(st.integers(0, 2 ** 12 - 1), st.integers(0, 2 ** 12 - 1), st.integers(0, 2 ** 12 - 1))
def test_dominates_transitive_hypothesis(a, b, c):
    x, y, z = (ContextString(v, 12) for v in (a, a & b, a & b & c))
    assert dominates(x, y) and dominates(y, z) and dominates(x, z)


def test_maximal_contexts():
    assert [c.bits for c in maximal_contexts(build_cycle(5))] == list(build_cycle(5).contexts)
    s = Scenario.from_lists(2, 4, [[0], [1], [0, 1]], [[0, 1], [2, 3]])
    assert [c.indices() for c in maximal_contexts(s)] == [[0, 1]]
    single = Scenario.from_lists(1, 2, [[0]], [[0, 1]])
    assert [c.bits for c in maximal_contexts(single)] == [1]


def test_every_context_dominated_by_a_maximal_one():
    s = Scenario.from_lists(3, 6, [[0], [0, 1], [1, 2], [2]], [[0, 1], [2, 3], [4, 5]])
    maximal = maximal_contexts(s)
    assert maximal
    for j in range(len(s.contexts)):
        assert any(dominates(m, s.context(j)) for m in maximal)


def test_closure_of_the_three_cycle():
    s = build_cycle(3)
    closure = s.closure()
    assert closure == {0b001, 0b010, 0b100, 0b011, 0b110, 0b101}
    assert not s.in_closure(0) and not s.in_closure(0b111)
    for x in range(1, 8):
        assert s.in_closure(x) == (x in closure)
        assert s.in_closure(x) == (s.dominating_context(x) is not None)


def test_complementary_hypergraph_examples():
    assert complementary_hypergraph([0b11], 2) == {0b00, 0b01, 0b10}
    assert complementary_hypergraph([], 2) == {0, 1, 2, 3}
    s = build_cycle(4)
    assert len(complementary_hypergraph(s.light_edges, s.num_lights)) == 81


def test_complementary_hypergraph_brute_force():
    edges = [0b0111, 0b1100, 0b1001]
    brute = {a for a in range(16) if all(bin(a & e).count('1') <= 1 for e in edges)}
    assert complementary_hypergraph(edges, 4) == brute


def test_complementary_hypergraph_downward_closed():
    members = complementary_hypergraph(build_cycle(3).light_edges, 6)
    for a in members:
        for k in bits_of(a):
            assert a & ~(1 << k) in members


def test_complementary_hypergraph_cap():
    with pytest.raises(EnumerationCapError):
        complementary_hypergraph([], 10, cap=100)


def test_maximal_complementary_on_cycle():
    s = build_cycle(3)
    maximal = maximal_complementary(s.light_edges, s.num_lights)
    assert len(maximal) == 8
    assert all(bin(a).count('1') == 3 for a in maximal)


def test_lights_and_buttons_lookup():
    s = build_cycle(4)
    assert bits_of(lights_of_context(s, s.context(0))) == [0, 1, 2, 3]
    assert lights_of_context(s, ContextString(0, 4)) == 0
    assert bits_of(buttons_of_light(s, 5)) == [2]
    with pytest.raises(PreconditionError):
        buttons_of_light(s, 8)


def test_shared_light_implies_incompatible_owners():
    s = Scenario.from_lists(3, 4, [[0, 2], [1]], [[0, 1], [1, 2], [3]])
    assert validate_scenario(s).ok
    for k in range(s.num_lights):
        owners = buttons_of_light(s, k)
        for c in s.contexts:
            assert bin(owners & c).count('1') <= 1


def test_bitstring_helpers():
    assert mask_to_bitstring(mask_of([0, 2]), 4) == '1010'
    assert bitstring_to_mask('1010') == 0b0101
    with pytest.raises(PreconditionError):
        bitstring_to_mask('10x')


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
