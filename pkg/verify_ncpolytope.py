"""Noncontextual polytope: strategies, mixtures, LP membership and certificates."""

from fractions import Fraction

import numpy as np
import pytest

from src.behavior import Behavior, Box, is_nondisturbing, max_abs_difference, validate_behavior
from src.cycle import (
    bisect_threshold,
    build_cycle,
    extremal_contextual,
    extremal_noncontextual,
    noisy_extremal,
    noisy_threshold,
    uniform_box,
)
from src.errors import EnumerationCapError, PreconditionError
from src.exact_lp import feasible_convex_combination, l1_distance_exact
from src.ncpolytope import (
    DeterministicStrategy,
    NCBox,
    check_certificate,
    enumerate_strategies,
    is_noncontextual,
    is_noncontextual_exact,
    mix,
    random_nc_box,
    strategy_behavior,
    uniform_mixture,
    vertex_matrix,
)
from src.scenario import Scenario, mask_of

# Noise weight at which (1-w) uniform + w PR box leaves the polytope on C_4
W_STAR_C4 = 0.5


@pytest.mark.parametrize('b, count', [(3, 8), (4, 16), (5, 32)])
def test_strategy_count_on_cycles(b, count):
    assert len(enumerate_strategies(build_cycle(b))) == count


def test_strategy_count_single_button():
    s = Scenario.from_lists(1, 3, [[0]], [[0, 1, 2]])
    strategies = enumerate_strategies(s)
    assert [d.choice for d in strategies] == [(0,), (1,), (2,)]


def test_strategy_count_is_product_of_edge_sizes():
    s = Scenario.from_lists(3, 7, [[0, 1], [2]], [[0, 1, 2], [3, 4], [5, 6]])
    assert len(enumerate_strategies(s)) == 3 * 2 * 2


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_strategies(build_cycle(6), cap=10)


def test_strategy_validation():
    s = build_cycle(3)
    with pytest.raises(PreconditionError):
        strategy_behavior(s, DeterministicStrategy((0, 2, 5, 1)))
    with pytest.raises(PreconditionError):
        strategy_behavior(s, DeterministicStrategy((1, 2, 0)))


def test_vertex_behaviors_are_deterministic_nd_points():
    s = build_cycle(4)
    for d in enumerate_strategies(s):
        box = strategy_behavior(s, d)
        assert validate_behavior(box).ok
        report = is_nondisturbing(box)
        assert report.ok and report.worst_deviation == 0.0


def test_zero_zeta_strategy_lights_first_lights():
    box = strategy_behavior(build_cycle(4), DeterministicStrategy((0, 2, 4, 6)))
    assert max_abs_difference(box, extremal_noncontextual(4, (0, 0, 0, 0))) == 0.0


def test_uniform_mixture_is_uniform_per_context():
    box = uniform_mixture(build_cycle(4)).box()
    for t in box.behavior.table:
        assert len(t) == 4
        assert all(p == pytest.approx(0.25) for p in t.values())


def test_degenerate_and_single_mixtures():
    s = build_cycle(4)
    d1, d2 = enumerate_strategies(s)[:2]
    assert max_abs_difference(mix(s, [d1, d2], [1.0, 0.0]), strategy_behavior(s, d1)) == 0.0
    half = mix(s, [d1, d2], [0.5, 0.5])
    assert all(p in (0.5, 1.0) for t in half.behavior.table for p in t.values())


def test_mix_rejects_bad_weights():
    s = build_cycle(3)
    d = enumerate_strategies(s)[:2]
    with pytest.raises(PreconditionError):
        mix(s, d, [0.7, 0.7])
    with pytest.raises(PreconditionError):
        mix(s, [d[0], d[0]], [0.5, 0.5])


@pytest.mark.parametrize('b', [3, 4, 5])
def test_extremal_contextual_is_contextual_with_certificate(b):
    gamma = (1,) + (0,) * (b - 1)
    box = extremal_contextual(b, gamma)
    verdict = is_noncontextual(box)
    assert verdict.verdict == 'contextual'
    cert = verdict.certificate
    assert cert.kind == 'inequality' and cert.gap > 0
    assert np.max(np.abs(cert.coefficients)) == pytest.approx(1.0)
    assert check_certificate(box, cert)
    print(f"✅ C_{b} extremal box: distance {verdict.distance:.4f}, gap {cert.gap:.4f}")


def test_random_mixtures_are_noncontextual():
    print("Membership LP on seeded random mixtures...")
    rng = np.random.default_rng(2024)
    for k in range(60):
        s = build_cycle(3 + k % 4)
        ncbox = random_nc_box(s, rng)
        box = ncbox.box()
        verdict = is_noncontextual(box)
        assert verdict.noncontextual
        V = vertex_matrix(s)
        q = verdict.certificate.weights
        assert np.max(np.abs(V @ q - box.behavior.vector())) <= 1e-8
        assert check_certificate(box, verdict.certificate)
    print("✅ 60 mixtures recovered with weight certificates")


def test_certificate_soundness_against_vertex_list():
    s = build_cycle(5)
    V = vertex_matrix(s)
    for gamma in [(1, 0, 0, 0, 0), (1, 1, 1, 0, 0), (1, 1, 1, 1, 1)]:
        box = extremal_contextual(5, gamma)
        cert = is_noncontextual(box).certificate
        assert np.all(V.T @ cert.coefficients <= cert.bound + 1e-8)
        assert cert.coefficients @ box.behavior.vector() >= cert.bound + cert.gap - 1e-12


def test_distance_matches_gap():
    box = extremal_contextual(4, (1, 0, 0, 0))
    verdict = is_noncontextual(box)
    assert verdict.certificate.gap == pytest.approx(verdict.distance, abs=1e-7)


def test_disturbing_box_reported():
    s = build_cycle(3)
    table = [
        {mask_of([0, 2]): 0.7, mask_of([1, 3]): 0.3},
        {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5},
        {mask_of([4, 0]): 0.5, mask_of([5, 1]): 0.5},
    ]
    verdict = is_noncontextual(Box(s, Behavior(s, table)))
    assert verdict.verdict == 'disturbing'
    assert verdict.distance == float('inf')
    assert verdict.nd_report.witness is not None


def test_noisy_threshold_bisection_c4():
    print("Bisecting the noise threshold on C_4...")
    w = bisect_threshold(4, (1, 0, 0, 0))
    assert w == pytest.approx(W_STAR_C4, abs=1e-6)
    assert noisy_threshold(4) == W_STAR_C4
    print(f"✅ w* = {w:.8f}")


def test_noisy_threshold_grid_cross_check():
    for w in np.linspace(0.0, 1.0, 41):
        if abs(w - W_STAR_C4) < 1e-3:
            continue
        verdict = is_noncontextual(noisy_extremal(4, (1, 0, 0, 0), float(w)))
        assert verdict.noncontextual == (w < W_STAR_C4), w


@pytest.mark.parametrize('b', [3, 5])
def test_noisy_threshold_other_cycles(b):
    gamma = (1,) * b
    assert bisect_threshold(b, gamma, iterations=30) == pytest.approx(noisy_threshold(b), abs=1e-6)


def test_exact_mode_verdicts():
    verdict = is_noncontextual(uniform_box(4), exact=True)
    assert verdict.noncontextual
    weights = verdict.certificate.exact_weights
    assert sum(weights) == 1 and all(w >= 0 for w in weights)
    assert is_noncontextual(extremal_contextual(4, (1, 0, 0, 0)), exact=True).verdict == 'contextual'


def test_exact_mode_on_random_mixtures():
    print("Exact mode on float NC mixtures...")
    rng = np.random.default_rng(11)
    for k in range(20):
        box = random_nc_box(build_cycle(3 + k % 2), rng).box()
        verdict = is_noncontextual(box, exact=True)
        assert verdict.verdict == 'noncontextual', k
        assert verdict.distance <= 1e-8
        weights = verdict.certificate.exact_weights
        assert sum(weights) == 1 and all(w >= 0 for w in weights)
    print("✅ 20 mixtures accepted")


def test_exact_contextual_verdict_has_positive_gap():
    for w in (0.6, 0.9):
        verdict = is_noncontextual(noisy_extremal(4, (1, 0, 0, 0), w), exact=True)
        assert verdict.verdict == 'contextual'
        assert verdict.certificate.gap > 0
        float_verdict = is_noncontextual(noisy_extremal(4, (1, 0, 0, 0), w))
        assert verdict.distance == pytest.approx(float_verdict.distance, abs=1e-7)


def test_exact_l1_distance_absorbs_rounding():
    eps = Fraction(1, 10 ** 15)
    distance, q = l1_distance_exact([[1, 0], [0, 1]], [Fraction(3, 10), Fraction(7, 10) + eps])
    assert distance == eps
    assert sum(q) == 1
    assert feasible_convex_combination([[1, 0], [0, 1]], [Fraction(3, 10), Fraction(7, 10) + eps]) is None


def test_exact_membership_on_the_facet():
    # w = 1/2 exactly sits on the CHSH facet: inside, with zero slack
    s = build_cycle(4)
    pr = extremal_contextual(4, (1, 0, 0, 0)).behavior.vector()
    un = uniform_box(4).behavior.vector()
    half = Fraction(1, 2)
    p = [half * Fraction(a).limit_denominator(8) + half * Fraction(u).limit_denominator(8)
         for a, u in zip(pr, un)]
    assert is_noncontextual_exact(s, p) is not None
    just_outside = Fraction(1, 2) + Fraction(1, 10 ** 6)
    p_out = [just_outside * Fraction(a).limit_denominator(8)
             + (1 - just_outside) * Fraction(u).limit_denominator(8) for a, u in zip(pr, un)]
    assert is_noncontextual_exact(s, p_out) is None


def test_feasible_convex_combination_small():
    columns = [[1, 0], [0, 1]]
    assert feasible_convex_combination(columns, [Fraction(1, 3), Fraction(2, 3)]) == [
        Fraction(1, 3), Fraction(2, 3)]
    assert feasible_convex_combination(columns, [Fraction(1, 2), Fraction(1, 3)]) is None


def test_ncbox_merged_combines_repeats():
    s = build_cycle(3)
    d = enumerate_strategies(s)
    merged = NCBox(s, [d[0], d[1], d[0]], np.array([0.25, 0.5, 0.25])).merged()
    assert [x.choice for x in merged.strategies] == [d[0].choice, d[1].choice]
    assert merged.weights.tolist() == [0.5, 0.5]


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
