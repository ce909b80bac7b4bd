"""Seeded property sweeps at reduced scale, plus determinism of the reports."""

from fractions import Fraction

import numpy as np
import pytest

from src.behavior import is_nondisturbing, validate_behavior
from src.cycle import build_cycle, extremal_contextual, noisy_threshold
from src.ncpolytope import is_noncontextual_exact
from src.prop_suite import (
    DEFAULT_SUITES,
    SUITES,
    SuiteSettings,
    exact_cycle_mixture,
    near_facet_weights,
    off_cycle_scenario,
    random_off_cycle_target,
    run_suites,
)

SMALL = 0.02


def _settings(**kw) -> SuiteSettings:
    base = dict(seed=0, scale=SMALL, threads=2)
    base.update(kw)
    return SuiteSettings(**base)


def test_instance_counts_scale():
    assert _settings(scale=0.5).count(500) == 250
    assert _settings(scale=0.0001).count(100) == 1
    assert _settings(scale=1.0).count(200) == 200


@pytest.mark.parametrize('name', DEFAULT_SUITES)
def test_default_suites_pass_small(name):
    print(f"Running {name} at scale {SMALL}...")
    report = run_suites([name], _settings())
    suite = report['suites'][0]
    assert suite['passed'], suite['first_failure']
    assert suite['worst'] <= suite['threshold']
    print(f"✅ {name}: {suite['instances']} instances, worst {suite['worst']:.3e}")


def test_extremal_classification_suite():
    report = run_suites(['extremal-classification'], _settings())
    assert report['passed']
    assert report['suites'][0]['instances'] == 4


def test_off_cycle_targets_are_nondisturbing():
    rng = np.random.default_rng(12)
    s = off_cycle_scenario()
    assert s != build_cycle(4)
    assert s.maximal_context_indices() == [0, 1, 2, 3]
    for _ in range(10):
        box = random_off_cycle_target(rng)
        assert validate_behavior(box).ok
        assert is_nondisturbing(box).ok


def test_wiring_suites_include_the_off_cycle_scenario():
    report = run_suites(['nd-preservation', 'nc-preservation', 'rc-monotonicity'], _settings())
    counts = [suite['instances'] for suite in report['suites']]
    assert counts == [10 + 1, 10 + 1, 4 + 1]
    assert report['passed']


def test_rc_anchor_suite_small():
    report = run_suites(['rc-anchors'], _settings())
    assert report['passed'], report['suites'][0]['first_failure']


def test_near_facet_weights_straddle_threshold():
    weights = near_facet_weights(3)
    assert len(weights) == 50
    w_star = Fraction(1, 3)
    assert float(w_star) == pytest.approx(noisy_threshold(3))
    assert sum(w < w_star for w in weights) == 25
    assert min(abs(w - w_star) for w in weights) == Fraction(1, 2 ** 26)


def test_exact_cycle_mixture_is_normalized():
    rng = np.random.default_rng(3)
    for _ in range(5):
        exact, vec = exact_cycle_mixture(3, rng)
        assert sum(exact) == 3
        assert all(v >= 0 for v in exact)
        assert np.max(np.abs(vec - np.array([float(v) for v in exact]))) == 0.0


def test_exact_oracle_on_the_threshold():
    s = build_cycle(3)
    pr = [Fraction(v).limit_denominator(2) for v in extremal_contextual(3, (1, 1, 1)).behavior.vector()]
    for w, inside in [(Fraction(1, 3), True), (Fraction(1, 3) + Fraction(1, 1000), False)]:
        p = [w * a + (1 - w) * Fraction(1, 4) for a in pr]
        assert (is_noncontextual_exact(s, p) is not None) == inside


def test_reports_ignore_thread_count():
    print("Same seed, different worker counts...")
    names = ['nd-preservation', 'bit-decomposition']
    one = run_suites(names, _settings(threads=1))
    many = run_suites(names, _settings(threads=4))
    assert one == many
    print("✅ identical reports")


def test_unknown_suite_rejected():
    with pytest.raises(KeyError):
        run_suites(['nope'], _settings())


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(SUITES))
def test_full_scale_suites(name):
    report = run_suites([name], SuiteSettings(seed=0))
    assert report['passed'], report['suites'][0]['first_failure']


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
