"""Noncontextual wirings: association sets, validation, application and composition."""

import json
import logging
import os

import numpy as np
import pytest

from src.behavior import Behavior, Box, is_nondisturbing, max_abs_difference, validate_behavior
from src.cli import EXIT_OK, main
from src.cycle import (
    build_cycle,
    collapse_wiring,
    extremal_contextual,
    extremal_noncontextual,
    random_nd_target,
    relabel_wiring,
)
from src.errors import (
    IncompatibleAssociationError,
    NotNondisturbingError,
    ScenarioMismatchError,
    WiringError,
)
from src.jsonio import behavior_to_dict, wiring_to_dict, write_json
from src.ncpolytope import (
    DeterministicStrategy,
    NCBox,
    enumerate_strategies,
    is_noncontextual,
    random_nc_box,
)
from src.scenario import Scenario, bits_of, mask_of
from src.wiring import (
    PostComponent,
    PostFamily,
    Wiring,
    apply_wiring,
    association_sets,
    compose_nc_triple,
    deterministic_component,
    identity_pre,
    identity_wiring,
    post_scenario,
    random_wiring,
    validate_wiring,
)


def _spread_pre(target: Scenario) -> Scenario:
    # y0 may press x0 or x2; the other Y buttons press their own X button
    return Scenario(4, 4, target.contexts, [0b0101, 0b0010, 0b0100, 0b1000])


def test_identity_association_sets():
    w = identity_wiring(build_cycle(4))
    for j in range(8):
        assoc = association_sets(w, j)
        assert bits_of(assoc.z) == [j]
        assert bits_of(assoc.x) == [j // 2]
        assert bits_of(assoc.y) == [j // 2]


def test_relabel_association_sets():
    w = relabel_wiring(4, (1, 0, 0, 0), (0, 1, 0, 0))
    for j in range(8):
        i = j // 2
        assoc = association_sets(w, j)
        assert bits_of(assoc.z) == [2 * i, 2 * i + 1]
        assert bits_of(assoc.x) == [i]
        assert bits_of(assoc.y) == [i]


def test_compatible_association_rejected():
    print("Post light fed by lights of compatible buttons...")
    target = build_cycle(4)
    # C-light 0 is shared by Z buttons 0 and 2, owned by compatible buttons 0 and 1
    c_edges = [1 << 0, 1 << 1, 1 << 0, 1 << 2, 1 << 3, 1 << 4, 1 << 5, 1 << 6]
    post_s = post_scenario(target, c_edges, 7)
    w = Wiring(identity_pre(target), PostFamily(post_s, []), target)
    with pytest.raises(IncompatibleAssociationError) as info:
        association_sets(w, 0)
    assert info.value.kind == 'X'
    assert not validate_wiring(w).ok
    print("✅ rejected:", info.value)


def test_identity_wiring_is_valid_and_trivial():
    target = build_cycle(4)
    w = identity_wiring(target)
    report = validate_wiring(w)
    assert report.ok, report.to_dict()
    box = random_nd_target(4, np.random.default_rng(1))
    out = apply_wiring(w, box)
    assert out.scenario == target
    assert max_abs_difference(out, box) <= 1e-15


def test_interface_violation_for_incompatible_pre_output():
    target = build_cycle(4)
    # Y context {0, 1} presses x0 and x2 together, which no context of C_4 allows
    pre_s = Scenario(4, 4, [0b0011, 0b0100, 0b1000], [1 << 0, 1 << 2, 1 << 1, 1 << 3])
    pre = NCBox(pre_s, enumerate_strategies(pre_s), np.array([1.0]))
    post_s = post_scenario(target, [1 << a for a in range(8)], 8)
    comp = deterministic_component(target, pre_s, post_s, lambda a, x, y: a)
    report = validate_wiring(Wiring(pre, PostFamily(post_s, [comp]), target))
    assert 'interface.pre' in report.rules()


def test_idle_light_violation():
    w = identity_wiring(build_cycle(3))
    w.post.components[0].responses[2][(-1, 0, 0)] = 1
    assert 'post.idle-light' in validate_wiring(w).rules()


def test_restricted_dependence_violation():
    w = identity_wiring(build_cycle(3))
    # light 0 may only read button 0 of the pre output
    w.post.components[0].responses[0][(0, 0b11, 0b01)] = 1
    assert 'post.restricted-dependence' in validate_wiring(w).rules()


def test_component_weights_must_sum_to_one():
    target = build_cycle(3)
    w = identity_wiring(target)
    comp = w.post.components[0]
    w.post.components = [PostComponent(0.6, comp.responses), PostComponent(0.6, comp.responses)]
    assert 'post.weights' in validate_wiring(w).rules()


def test_apply_rejects_scenario_mismatch():
    w = identity_wiring(build_cycle(4))
    with pytest.raises(ScenarioMismatchError):
        apply_wiring(w, extremal_contextual(3, (1, 0, 0)))


def test_apply_rejects_invalid_wiring():
    w = identity_wiring(build_cycle(3))
    w.post.components[0].responses[2][(-1, 0, 0)] = 1
    with pytest.raises(WiringError):
        apply_wiring(w, extremal_contextual(3, (1, 1, 1)))


@pytest.mark.parametrize('b, g_from, g_to', [
    (4, (1, 0, 0, 0), (0, 1, 0, 0)),
    (4, (1, 0, 0, 0), (1, 1, 1, 0)),
    (5, (1, 1, 1, 0, 0), (0, 0, 0, 0, 1)),
    (3, (1, 0, 0), (1, 1, 1)),
])
def test_relabel_maps_extremal_boxes(b, g_from, g_to):
    w = relabel_wiring(b, g_from, g_to)
    assert validate_wiring(w).ok
    out = apply_wiring(w, extremal_contextual(b, g_from))
    assert max_abs_difference(out, extremal_contextual(b, g_to)) <= 1e-15


def test_relabel_same_gamma_is_identity():
    box = extremal_contextual(4, (0, 0, 1, 0))
    out = apply_wiring(relabel_wiring(4, (0, 0, 1, 0), (0, 0, 1, 0)), box)
    assert max_abs_difference(out, box) == 0.0


def test_collapse_maps_to_zeta_box():
    w = collapse_wiring(3, (1, 1, 1), (0, 1, 0))
    out = apply_wiring(w, extremal_contextual(3, (1, 1, 1)))
    assert max_abs_difference(out, extremal_noncontextual(3, (0, 1, 0))) == 0.0


def test_compose_deterministic_triple_gives_one_strategy():
    target = build_cycle(4)
    w = identity_wiring(target)
    mid = NCBox(target, [enumerate_strategies(target)[5]], np.array([1.0]))
    nc = compose_nc_triple(w.pre, mid, w.post)
    assert len(nc.strategies) == 1
    assert nc.strategies[0] == mid.strategies[0]


def test_compose_two_pre_strategies():
    target = build_cycle(4)
    pre_s = _spread_pre(target)
    strategies = enumerate_strategies(pre_s)
    assert len(strategies) == 2
    pre = NCBox(pre_s, strategies, np.array([0.5, 0.5]))
    post_s = post_scenario(target, [1 << a for a in range(8)], 8)
    comp = deterministic_component(target, pre_s, post_s, lambda a, x, y: a)
    w = Wiring(pre, PostFamily(post_s, [comp]), target)
    assert validate_wiring(w).ok, validate_wiring(w).to_dict()
    mid = NCBox(target, [enumerate_strategies(target)[0]], np.array([1.0]))
    nc = compose_nc_triple(pre, mid, w.post)
    assert len(nc.strategies) == 2
    assert max_abs_difference(nc.box(), apply_wiring(w, mid.box())) <= 1e-12


def test_compose_matches_apply_on_random_triples():
    print("compose_nc_triple vs apply_wiring on seeded triples...")
    rng = np.random.default_rng(314)
    for k in range(25):
        target = build_cycle(3 + k % 3)
        mid = random_nc_box(target, rng)
        w = random_wiring(target, rng, max_strategies=512)
        nc = compose_nc_triple(w.pre, mid, w.post)
        assert max_abs_difference(nc.box(), apply_wiring(w, mid.box())) <= 1e-12
    print("✅ 25 triples agree")


def test_random_wirings_preserve_nd_and_nc():
    rng = np.random.default_rng(2718)
    for k in range(20):
        target = build_cycle(3 + k % 4)
        w = random_wiring(target, rng, max_strategies=1024)
        assert validate_wiring(w).ok
        nd_out = apply_wiring(w, random_nd_target(target.num_buttons, rng))
        assert validate_behavior(nd_out).ok
        assert is_nondisturbing(nd_out).worst_deviation <= 1e-9
        nc_out = apply_wiring(w, random_nc_box(target, rng).box())
        assert is_noncontextual(nc_out).noncontextual


def test_output_scenario_edges():
    target = build_cycle(4)
    pre_s = _spread_pre(target)
    pre = NCBox(pre_s, enumerate_strategies(pre_s), np.array([0.5, 0.5]))
    post_s = post_scenario(target, [1 << a for a in range(8)], 8)
    out_s = Wiring(pre, PostFamily(post_s, []), target).output_scenario()
    assert out_s.light_edges[0] == mask_of([0, 1, 4, 5])
    assert out_s.contexts == target.contexts


def _singleton_pre_wiring() -> Wiring:
    # Every Y context presses a single X button, a proper sub-context of C_3
    target = build_cycle(3)
    pre_s = Scenario.from_lists(3, 3, [[0], [1], [2]], [[0], [1], [2]])
    pre = NCBox(pre_s, [DeterministicStrategy((0, 1, 2))], np.array([1.0]))
    post_s = post_scenario(target, [1 << a for a in range(6)], 6)
    comp = deterministic_component(target, pre_s, post_s, lambda a, x, y: a)
    return Wiring(pre, PostFamily(post_s, [comp]), target)


def test_sub_context_pre_outputs_are_marginalized():
    print("Pre-box pressing single buttons of C_3...")
    w = _singleton_pre_wiring()
    report = validate_wiring(w)
    assert report.ok, report.to_dict()
    assert len(report.warnings) == 3
    assert all('closure of I_X but not a stored context' in m for m in report.warnings)
    out = apply_wiring(w, extremal_contextual(3, (1, 1, 1)))
    for i, dist in enumerate(out.behavior.table):
        assert dist == {1 << (2 * i): 0.5, 1 << (2 * i + 1): 0.5}
    print("✅ marginals are 1/2 on every output context")


def test_sub_context_pre_outputs_need_a_nondisturbing_box():
    s = build_cycle(3)
    table = [
        {mask_of([0, 2]): 0.7, mask_of([1, 3]): 0.3},
        {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5},
        {mask_of([4, 0]): 0.5, mask_of([5, 1]): 0.5},
    ]
    with pytest.raises(NotNondisturbingError):
        apply_wiring(_singleton_pre_wiring(), Box(s, Behavior(s, table)))


def test_wire_command_logs_the_closure_warning(tmp_path, caplog, capsys):
    w_path = os.path.join(str(tmp_path), 'w.json')
    box_path = os.path.join(str(tmp_path), 'box.json')
    write_json(wiring_to_dict(_singleton_pre_wiring()), w_path)
    write_json(behavior_to_dict(extremal_contextual(3, (1, 1, 1))), box_path)
    with caplog.at_level(logging.WARNING):
        assert main(['wire', '--wiring', w_path, '--box', box_path]) == EXIT_OK
    assert any('not a stored context' in r.getMessage() for r in caplog.records)
    out = json.loads(capsys.readouterr().out)
    assert all(o['p'] == 0.5 for t in out['table'] for o in t['outcomes'])


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
