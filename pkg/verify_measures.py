"""Relative entropies, the R_C solver and monotonicity under wirings."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import rel_entr

from src.behavior import Behavior, Box, max_abs_difference
from src.cycle import (
    all_zetas,
    build_cycle,
    collapse_wiring,
    extremal_contextual,
    extremal_noncontextual,
    noisy_extremal,
    noisy_relative_entropy,
    random_nd_target,
    uniform_box,
)
from src.errors import NotNondisturbingError, PreconditionError
from src.measures import (
    RcObjective,
    behavior_relative_entropy,
    check_monotonicity,
    kl_divergence,
    relative_entropy_of_contextuality,
)
from src.ncpolytope import enumerate_strategies, mix, random_nc_box, uniform_mixture
from src.prop_suite import PR_BOX_RC
from src.scenario import Scenario, mask_of
from src.wiring import apply_wiring, identity_wiring, random_wiring

LN2 = math.log(2.0)


def test_kl_examples():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)
    value = kl_divergence([0.5, 0.0, 0.0, 0.5], [3 / 8, 1 / 8, 1 / 8, 3 / 8])
    assert value == pytest.approx(0.415037, abs=1e-6)
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_rejects_unnormalized():
    with pytest.raises(PreconditionError):
        kl_divergence([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(PreconditionError):
        kl_divergence([0.5, 0.5], [0.5, 0.25, 0.25])


def test_behavior_relative_entropy():
    pr = extremal_contextual(4, (1, 0, 0, 0))
    assert behavior_relative_entropy(pr, pr).value == 0.0
    zeta = extremal_noncontextual(4, (0, 1, 1, 0))
    uni = uniform_mixture(build_cycle(4)).box()
    assert behavior_relative_entropy(zeta, uni).value == pytest.approx(2.0)
    assert behavior_relative_entropy(pr, extremal_noncontextual(4, (0, 0, 0, 0))).value == math.inf


def test_relative_entropy_ignores_sub_contexts():
    # {0} and {2} are stored alongside the maximal contexts that contain them
    s = Scenario.from_lists(3, 7, [[0], [0, 1], [1, 2], [2]], [[0, 1], [2, 3, 4], [5, 6]])
    maximal = s.maximal_context_indices()
    assert maximal == [1, 2]
    rng = np.random.default_rng(17)
    for _ in range(25):
        P = random_nc_box(s, rng).box()
        strategies = enumerate_strategies(s)
        P_star = mix(s, strategies, rng.dirichlet(np.ones(len(strategies))))
        res = behavior_relative_entropy(P, P_star)
        best = max(_context_kl(P, P_star, j) for j in maximal)
        assert res.value == pytest.approx(best, rel=1e-12, abs=1e-12)


def _context_kl(P: Box, P_star: Box, j: int) -> float:
    p, q = P.behavior.table[j], P_star.behavior.table[j]
    keys = sorted(set(p) | set(q))
    return kl_divergence([p.get(a, 0.0) for a in keys], [q.get(a, 0.0) for a in keys])


def test_rc_of_nc_boxes_is_zero():
    print("R_C on seeded NC mixtures...")
    rng = np.random.default_rng(5)
    for b in (3, 4, 5):
        box = random_nc_box(build_cycle(b), rng).box()
        res = relative_entropy_of_contextuality(box, tol=1e-6, max_iter=20000)
        assert res.value <= 1e-6
        assert max_abs_difference(res.argmin.box(), box) <= 1e-3
    assert relative_entropy_of_contextuality(uniform_box(4)).value <= 1e-6
    print("✅ zero on NC boxes")


def test_rc_pr_box_anchor():
    res = relative_entropy_of_contextuality(extremal_contextual(4, (1, 0, 0, 0)))
    assert res.value == pytest.approx(PR_BOX_RC, abs=1e-4)
    assert res.gap_estimate <= 1e-6 or not res.converged
    assert res.value - res.gap_estimate <= PR_BOX_RC + 1e-9
    print(f"✅ R_C(PR) = {res.value:.9f} bits, gap {res.gap_estimate:.2e}")


def _symmetric_ansatz_minimum(steps: int = 50) -> float:
    """
    Grid search on C_4 over mixtures of the uniform box and two averages of
    deterministic boxes: those violating exactly one PR edge with zeta_0 = 0,
    and their global flips. Neither corner is the minimiser; their midpoint is.
    """
    gamma = (1, 0, 0, 0)
    pr = extremal_contextual(4, gamma).behavior.vector()
    halves = [[], []]
    for zeta in all_zetas(4):
        violated = sum((zeta[i] ^ zeta[(i + 1) % 4]) != gamma[i] for i in range(4))
        if violated == 1:
            halves[zeta[0]].append(extremal_noncontextual(4, zeta).behavior.vector())
    corners = np.column_stack([np.mean(halves[0], axis=0), np.mean(halves[1], axis=0),
                               uniform_box(4).behavior.vector()])
    best = math.inf
    starts = np.arange(0, 16, 4)
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            t = np.array([i, j, steps - i - j]) / steps
            q = corners @ t
            per = np.add.reduceat(rel_entr(pr, q), starts) / LN2
            best = min(best, float(np.max(per)))
    return best


def test_rc_pr_box_matches_grid_oracle():
    oracle = _symmetric_ansatz_minimum()
    assert oracle == pytest.approx(PR_BOX_RC, abs=1e-4)
    assert PR_BOX_RC == pytest.approx(math.log2(4 / 3), abs=1e-15)


@pytest.mark.parametrize('b, w', [(3, 0.8), (4, 0.9), (5, 0.75)])
def test_rc_noisy_closed_form(b, w):
    gamma = (1,) * b if b % 2 else (1,) + (0,) * (b - 1)
    res = relative_entropy_of_contextuality(noisy_extremal(b, gamma, w))
    assert res.value == pytest.approx(noisy_relative_entropy(b, w), abs=1e-4)


def _lattice_oracle(obj: RcObjective, rng: np.random.Generator, resolution: int = 200) -> float:
    """Best point of a random lattice sample, then random-direction descent"""
    n = obj.n
    raw = rng.dirichlet(np.ones(n), size=20000)
    lattice = np.floor(raw * resolution) / resolution
    lattice[:, -1] = 1.0 - lattice[:, :-1].sum(axis=1)
    lattice = lattice[lattice[:, -1] >= 0]
    values = np.array([obj.value(q) for q in lattice])
    q = lattice[int(np.argmin(values))]
    f = float(values.min())
    step = 1.0 / resolution
    while step > 1e-6:
        improved = False
        for _ in range(200):
            d = rng.dirichlet(np.ones(n)) - rng.dirichlet(np.ones(n))
            trial = q + step * d / np.max(np.abs(d))
            if np.any(trial < 0):
                continue
            ft = obj.value(trial)
            if ft < f:
                q, f, improved = trial, ft, True
        if not improved:
            step /= 2.0
    return f


def test_rc_matches_lattice_oracle_on_triangle():
    print("Comparing R_C solver with a lattice search on C_3...")
    rng = np.random.default_rng(17)
    box = noisy_extremal(3, (1, 1, 1), 0.8)
    obj = RcObjective(box)
    oracle = _lattice_oracle(obj, rng)
    res = relative_entropy_of_contextuality(box)
    assert res.value <= oracle + 1e-6
    assert oracle - res.value <= 1e-3
    print(f"✅ solver {res.value:.6f} vs lattice {oracle:.6f}")


@settings(derandomize=True, max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2 ** 32 - 1))
def test_objective_is_convex(alpha, seed):
    rng = np.random.default_rng(seed)
    obj = RcObjective(random_nd_target(3, rng))
    q1 = rng.dirichlet(np.ones(obj.n))
    q2 = rng.dirichlet(np.ones(obj.n))
    mid = obj.value(alpha * q1 + (1 - alpha) * q2)
    assert mid <= alpha * obj.value(q1) + (1 - alpha) * obj.value(q2) + 1e-12


def test_lower_bound_never_exceeds_value():
    rng = np.random.default_rng(8)
    obj = RcObjective(extremal_contextual(5, (1, 0, 0, 0, 0)))
    for _ in range(5):
        q = rng.dirichlet(np.ones(obj.n))
        assert obj.lower_bound(q) <= obj.value(q) + 1e-12
        assert obj.lower_bound(q) <= math.log2(5 / 4) + 1e-9


def test_rc_rejects_disturbing_box():
    s = build_cycle(3)
    table = [
        {mask_of([0, 2]): 0.7, mask_of([1, 3]): 0.3},
        {mask_of([2, 4]): 0.5, mask_of([3, 5]): 0.5},
        {mask_of([4, 0]): 0.5, mask_of([5, 1]): 0.5},
    ]
    with pytest.raises(NotNondisturbingError):
        relative_entropy_of_contextuality(Box(s, Behavior(s, table)))


def test_monotonicity_identity_and_collapse():
    box = extremal_contextual(4, (1, 0, 0, 0))
    same = check_monotonicity(box, identity_wiring(box.scenario))
    assert same.ok and abs(same.lhs - same.rhs) <= 2e-6
    collapsed = check_monotonicity(box, collapse_wiring(4, (1, 0, 0, 0), (0, 1, 0, 1)))
    assert collapsed.ok and collapsed.lhs <= 1e-6


def test_monotonicity_random_wirings():
    print("Monotonicity on seeded random wirings...")
    rng = np.random.default_rng(99)
    for k in range(6):
        b = 3 + k % 3
        box = random_nd_target(b, rng)
        wiring = random_wiring(box.scenario, rng, max_strategies=256)
        res = check_monotonicity(box, wiring, tol=1e-6, max_iter=20000, seed=k)
        assert res.ok, (res.lhs, res.rhs)
    print("✅ R_C(W(B)) <= R_C(B) on all instances")


def test_monotonicity_solves_the_wired_box_cold():
    rng = np.random.default_rng(31)
    box = random_nd_target(4, rng)
    wiring = random_wiring(box.scenario, rng, max_strategies=256)
    cold = check_monotonicity(box, wiring, tol=1e-6, max_iter=20000, seed=3)
    direct = relative_entropy_of_contextuality(apply_wiring(wiring, box), 1e-6, 20000, 3)
    assert cold.lhs == direct.value
    both = check_monotonicity(box, wiring, tol=1e-6, max_iter=20000, seed=3, warm=True)
    assert both.lhs <= cold.lhs
    assert cold.ok and both.ok


def test_rc_result_dict_shape():
    res = relative_entropy_of_contextuality(uniform_box(3))
    d = res.to_dict()
    assert set(d) >= {'value_bits', 'converged', 'iterations', 'worst_context'}


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
