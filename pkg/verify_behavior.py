"""Behavior tables: validation, marginals, nondisturbance."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.behavior import (
    Behavior,
    Box,
    behaviors_close,
    is_nondisturbing,
    marginalize,
    max_abs_difference,
    validate_behavior,
)
from src.cycle import build_cycle, extremal_contextual, extremal_noncontextual, random_nd_target
from src.errors import PreconditionError, ScenarioMismatchError
from src.scenario import ContextString, Scenario, mask_of


def _disturbing_triangle() -> Box:
    # button 1 reads (0.7, 0.3) in context {0,1} and (0.5, 0.5) in {1,2}
    s = build_cycle(3)
    table = [
        {mask_of([0, 2]): 0.7, mask_of([1, 3]): 0.3},
        {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5},
        {mask_of([4, 0]): 0.5, mask_of([5, 1]): 0.5},
    ]
    return Box(s, Behavior(s, table))


def test_pr_box_is_valid():
    print("Validating PR-type box on C_4...")
    report = validate_behavior(extremal_contextual(4, (1, 0, 0, 0)))
    assert report.ok, report.to_dict()
    print("✅ PR box passes validate_behavior")


def test_support_violation():
    s = build_cycle(4)
    box = extremal_contextual(4, (1, 0, 0, 0))
    table = [dict(t) for t in box.behavior.table]
    table[0] = {mask_of([0, 1]): 0.5, mask_of([1, 2]): 0.5}
    report = validate_behavior(Behavior(s, table))
    assert 'support' in report.rules()


def test_normalization_violation():
    s = build_cycle(4)
    table = [dict(t) for t in extremal_contextual(4, (1, 0, 0, 0)).behavior.table]
    table[2] = {a: p * 0.999 for a, p in table[2].items()}
    report = validate_behavior(Behavior(s, table), eps_norm=1e-9)
    assert report.rules() == ['normalization']
    assert report.violations[0].where['context'] == 2


def test_negative_entry_rejected():
    s = Scenario.from_lists(1, 2, [[0]], [[0, 1]])
    report = validate_behavior(Behavior(s, [{1: 1.5, 2: -0.5}]))
    assert 'nonnegativity' in report.rules()


def test_marginal_of_pr_box():
    box = extremal_contextual(4, (1, 0, 0, 0))
    m = marginalize(box, ContextString.from_indices([0, 1], 4), ContextString.from_indices([0], 4))
    assert m == pytest.approx({0b01: 0.5, 0b10: 0.5})


def test_marginal_identity_and_deterministic():
    box = extremal_contextual(4, (1, 0, 0, 0))
    x = ContextString.from_indices([1, 2], 4)
    assert marginalize(box, x, x) == box.behavior.table[1]
    det = extremal_noncontextual(4, (0, 1, 1, 0))
    assert marginalize(det, x, ContextString.from_indices([2], 4)) == {1 << 5: 1.0}


def test_marginal_requires_domination():
    box = extremal_contextual(4, (1, 0, 0, 0))
    with pytest.raises(PreconditionError):
        marginalize(box, ContextString.from_indices([0], 4), ContextString.from_indices([0, 1], 4))
    with pytest.raises(PreconditionError):
        marginalize(box, ContextString.from_indices([0, 2], 4), ContextString.from_indices([0], 4))


def test_marginal_composes():
    s = Scenario.from_lists(3, 6, [[0, 1, 2]], [[0, 1], [2, 3], [4, 5]])
    rng = np.random.default_rng(3)
    outs = s.outcomes(s.contexts[0])
    w = rng.dirichlet(np.ones(len(outs)))
    B = Behavior(s, [dict(zip(outs, w))])
    full = ContextString.from_indices([0, 1, 2], 3)
    mid = ContextString.from_indices([0, 1], 3)
    low = ContextString.from_indices([1], 3)
    direct = marginalize(B, full, low)
    staged = marginalize(B, full, mid)
    via_mid = {}
    for a, p in staged.items():
        sub = a & s.lights_of_context(low.bits)
        via_mid[sub] = via_mid.get(sub, 0.0) + p
    assert direct == pytest.approx(via_mid, abs=2e-9)


@pytest.mark.parametrize('gamma', [(1, 0, 0, 0), (1, 1, 1, 0), (0, 0, 1, 0)])
def test_extremal_boxes_are_nondisturbing(gamma):
    report = is_nondisturbing(extremal_contextual(4, gamma))
    assert report.ok and report.worst_deviation == 0.0


def test_deterministic_box_is_nondisturbing():
    assert is_nondisturbing(extremal_noncontextual(5, (1, 0, 1, 1, 0))).ok


def test_disturbing_triangle_reports_witness():
    print("Checking hand-built disturbing 3-cycle table...")
    report = is_nondisturbing(_disturbing_triangle())
    assert not report.ok
    assert report.worst_deviation == pytest.approx(0.2)
    assert report.witness_class == 'closure'
    assert len(report.witness['x_sub']) == 1
    print(f"✅ worst deviation {report.worst_deviation:.3f} at {report.witness}")


def test_nd_marginals_context_independent():
    rng = np.random.default_rng(11)
    box = random_nd_target(4, rng)
    s = box.scenario
    for i in range(4):
        sub = ContextString.from_indices([i], 4)
        left = marginalize(box, s.context((i - 1) % 4), sub)
        right = marginalize(box, s.context(i), sub)
        assert left == pytest.approx(right, abs=1e-9)


def test_behaviors_close():
    a = extremal_contextual(4, (1, 0, 0, 0))
    b = extremal_contextual(4, (0, 1, 0, 0))
    assert behaviors_close(a, a, 1e-9)
    assert not behaviors_close(a, b, 1e-9)
    table = [dict(t) for t in a.behavior.table]
    key = next(iter(table[0]))
    table[0][key] += 1e-12
    assert behaviors_close(a, Behavior(a.scenario, table), 1e-9)
    with pytest.raises(ScenarioMismatchError):
        max_abs_difference(a, extremal_contextual(3, (1, 0, 0)))


@settings(derandomize=True, max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_nd_targets_are_valid_and_nondisturbing(seed):
    box = random_nd_target(3, np.random.default_rng(seed))
    assert validate_behavior(box).ok
    assert is_nondisturbing(box).ok


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
