"""b-cycle boxes, relabel/collapse wirings and contextuality-bit decompositions."""

import math

import numpy as np
import pytest

from src.behavior import Behavior, Box, is_nondisturbing, max_abs_difference, validate_behavior
from src.cycle import (
    admissible_gammas,
    all_zetas,
    binary_kl,
    build_cycle,
    contextuality_bit_decompose,
    extremal_contextual,
    extremal_noncontextual,
    extremal_points,
    format_bits,
    noisy_relative_entropy,
    parse_bits,
    random_nd_target,
    relabel_flips,
    relabel_wiring,
    uniform_box,
)
from src.errors import NotNondisturbingError, PreconditionError
from src.ncpolytope import enumerate_strategies, is_noncontextual
from src.scenario import bits_of, mask_of, validate_scenario
from src.wiring import apply_wiring


@pytest.mark.parametrize('b', [3, 4, 5, 6])
def test_cycle_shape(b):
    s = build_cycle(b)
    assert validate_scenario(s).ok
    assert s.num_lights == 2 * b
    assert s.maximal_context_indices() == list(range(b))
    for i in range(b):
        assert bits_of(s.light_edges[i]) == [2 * i, 2 * i + 1]
        assert sum((c >> i) & 1 for c in s.contexts) == 2


def test_last_context_wraps_around():
    assert bits_of(build_cycle(5).contexts[4]) == [0, 4]
    assert bits_of(build_cycle(3).contexts[2]) == [0, 2]


def test_cycle_rejects_short_length():
    with pytest.raises(PreconditionError):
        build_cycle(2)


def test_hand_expanded_triangle_table():
    print("Pinning the light convention on C_3 with gamma = 111...")
    box = extremal_contextual(3, (1, 1, 1))
    expected = [
        {mask_of([0, 3]): 0.5, mask_of([1, 2]): 0.5},
        {mask_of([2, 5]): 0.5, mask_of([3, 4]): 0.5},
        {mask_of([4, 1]): 0.5, mask_of([5, 0]): 0.5},
    ]
    assert [dict(t) for t in box.behavior.table] == expected
    print("✅ table matches the hand expansion")


def test_pr_box_table():
    box = extremal_contextual(4, (1, 0, 0, 0))
    assert box.behavior.table[0] == {mask_of([0, 3]): 0.5, mask_of([1, 2]): 0.5}
    assert box.behavior.table[1] == {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5}


def test_even_gamma_rejected():
    with pytest.raises(PreconditionError):
        extremal_contextual(4, (1, 1, 0, 0))
    with pytest.raises(PreconditionError):
        extremal_contextual(4, (1, 0, 0))


@pytest.mark.parametrize('b', [3, 4, 5, 6])
def test_count_laws(b):
    assert len(admissible_gammas(b)) == 2 ** (b - 1)
    assert len(all_zetas(b)) == 2 ** b
    assert len(extremal_points(b)) == 2 ** (b - 1) + 2 ** b


def test_zeta_boxes_match_strategies():
    s = build_cycle(4)
    zeta_tables = {tuple(tuple(sorted(t.items())) for t in extremal_noncontextual(4, z).behavior.table)
                   for z in all_zetas(4)}
    assert len(zeta_tables) == 16 == len(enumerate_strategies(s))


def test_zeta_extremes():
    box = extremal_noncontextual(3, (0, 0, 0))
    assert box.behavior.table[0] == {mask_of([0, 2]): 1.0}
    box = extremal_noncontextual(3, (1, 1, 1))
    assert box.behavior.table[0] == {mask_of([1, 3]): 1.0}


@pytest.mark.parametrize('b', [3, 4, 5, 6])
def test_extremal_classification(b):
    print(f"Classifying every extremal box on C_{b}...")
    for g in admissible_gammas(b):
        box = extremal_contextual(b, g)
        assert validate_behavior(box).ok
        nd = is_nondisturbing(box)
        assert nd.ok and nd.worst_deviation == 0.0
        assert is_noncontextual(box, 1e-8).verdict == 'contextual', format_bits(g)
    for z in all_zetas(b):
        box = extremal_noncontextual(b, z)
        assert is_nondisturbing(box).worst_deviation == 0.0
        assert is_noncontextual(box, 1e-8).noncontextual, format_bits(z)
    print(f"✅ C_{b}: {2 ** (b - 1)} contextual, {2 ** b} noncontextual")


def test_relabel_flips_prefix_parity():
    assert relabel_flips((1, 0, 0, 0), (0, 1, 0, 0)) == (0, 1, 0, 0)
    assert relabel_flips((1, 0, 0, 0), (1, 0, 0, 0)) == (0, 0, 0, 0)
    assert relabel_flips((1, 1, 1), (1, 0, 0)) == (0, 0, 1)


def test_relabel_group_action():
    rng = np.random.default_rng(42)
    target = random_nd_target(5, rng)
    g1, g2, g3 = (1, 0, 0, 0, 0), (1, 1, 1, 0, 0), (0, 1, 0, 1, 1)
    staged = apply_wiring(relabel_wiring(5, g2, g3), apply_wiring(relabel_wiring(5, g1, g2), target))
    direct = apply_wiring(relabel_wiring(5, g1, g3), target)
    assert max_abs_difference(staged, direct) <= 1e-15


def _extremal_boxes_by_key(b: int):
    return {f"{p.kind}:{format_bits(p.bits)}": p.box for p in extremal_points(b)}


def test_decompose_the_bit_itself():
    gamma = (1, 0, 0, 0)
    dec = contextuality_bit_decompose(extremal_contextual(4, gamma), gamma)
    assert dec.residual <= 1e-9
    assert dec.weights['gamma:1000'] == pytest.approx(1.0, abs=1e-9)


def test_decompose_uniform_box():
    dec = contextuality_bit_decompose(uniform_box(4), (0, 0, 1, 0))
    assert dec.residual <= 1e-9
    assert sum(dec.weights.values()) == pytest.approx(1.0)
    remixed = sum(w * _extremal_boxes_by_key(4)[k].behavior.vector() for k, w in dec.weights.items())
    assert np.max(np.abs(remixed - uniform_box(4).behavior.vector())) <= 1e-9


@pytest.mark.parametrize('b', [3, 4, 5])
def test_decompose_random_targets(b):
    rng = np.random.default_rng(1000 + b)
    gamma = admissible_gammas(b)[-1]
    for _ in range(10):
        dec = contextuality_bit_decompose(random_nd_target(b, rng), gamma)
        assert dec.residual <= 1e-9


@pytest.mark.slow
@pytest.mark.parametrize('b', [3, 4, 5])
def test_decompose_random_targets_full(b):
    rng = np.random.default_rng(7 + b)
    gamma = admissible_gammas(b)[0]
    worst = max(contextuality_bit_decompose(random_nd_target(b, rng), gamma).residual
                for _ in range(100))
    assert worst <= 1e-9


def test_decompose_rejects_disturbing_target():
    s = build_cycle(3)
    table = [
        {mask_of([0, 2]): 0.7, mask_of([1, 3]): 0.3},
        {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5},
        {mask_of([4, 0]): 0.5, mask_of([5, 1]): 0.5},
    ]
    with pytest.raises(NotNondisturbingError):
        contextuality_bit_decompose(Box(s, Behavior(s, table)), (1, 1, 1))


def test_noisy_closed_form_anchors():
    assert noisy_relative_entropy(4, 0.4) == 0.0
    assert noisy_relative_entropy(4, 1.0) == pytest.approx(math.log2(4 / 3))
    assert binary_kl(0.5, 0.5) == 0.0


def test_bit_parsing():
    assert parse_bits('10000', 5) == (1, 0, 0, 0, 0)
    assert format_bits((0, 1, 1)) == '011'
    with pytest.raises(PreconditionError):
        parse_bits('100', 4)
    with pytest.raises(PreconditionError):
        parse_bits('1020')


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
