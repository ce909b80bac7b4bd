"""
Seeded property sweeps: ND preservation, NC preservation, monotonicity of
R_C, contextuality-bit completeness, plus the extremal classification,
R_C anchors and exact-oracle agreement checks.

Every instance draws from its own SeedSequence child and results are
collected in submission order, so reports do not depend on thread count.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src import config
from src.behavior import Behavior, Box, is_nondisturbing, max_abs_difference, validate_behavior
from src.cycle import (
    admissible_gammas,
    all_zetas,
    build_cycle,
    contextuality_bit_decompose,
    extremal_contextual,
    extremal_noncontextual,
    extremal_points,
    noisy_extremal,
    noisy_relative_entropy,
    random_nd_target,
)
from src.measures import check_monotonicity, relative_entropy_of_contextuality
from src.ncpolytope import is_noncontextual, is_noncontextual_exact, random_nc_box
from src.scenario import Scenario
from src.wiring import apply_wiring, compose_nc_triple, random_wiring

log = logging.getLogger(__name__)

# Frozen regression value: R_C of the 4-cycle PR box, log2(4/3)
PR_BOX_RC = 0.41503749927884376


@dataclass
class Outcome:
    passed: bool
    deviation: float
    detail: str = ''


@dataclass
class SuiteResult:
    name: str
    metric: str
    threshold: float
    instances: int = 0
    failures: int = 0
    worst: float = 0.0
    first_failure: Optional[str] = None
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> Dict[str, object]:
        return {
            'suite': self.name,
            'passed': self.passed,
            'instances': self.instances,
            'failures': self.failures,
            'metric': self.metric,
            'worst': self.worst,
            'threshold': self.threshold,
            'first_failure': self.first_failure,
        }


@dataclass
class SuiteSettings:
    seed: int = config.DEFAULT_SEED
    scale: float = 1.0
    eps_lp: float = config.EPS_LP
    rc_tol: float = config.RC_TOL
    max_iter: int = config.RC_MAX_ITER
    threads: int = field(default_factory=config.worker_count)

    def count(self, full: int) -> int:
        return max(1, int(math.ceil(full * self.scale)))


def _run_instances(name: str, settings: SuiteSettings, suite_index: int,
                   tasks: Sequence[Tuple], fn: Callable[..., Outcome],
                   metric: str, threshold: float) -> SuiteResult:
    root = np.random.SeedSequence([settings.seed, suite_index])
    children = root.spawn(len(tasks))

    def run(job):
        task, child = job
        try:
            return fn(np.random.default_rng(child), *task)
        except Exception as e:
            log.exception(f"❌ {name}: instance {task} raised")
            return Outcome(False, math.inf, f"{type(e).__name__}: {e}")

    result = SuiteResult(name, metric, threshold)
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        outcomes = list(pool.map(run, zip(tasks, children)))
    result.elapsed = time.perf_counter() - start
    for k, out in enumerate(outcomes):
        result.instances += 1
        if out.deviation > result.worst:
            result.worst = out.deviation
        if not out.passed:
            result.failures += 1
            if result.first_failure is None:
                result.first_failure = f"instance {k} {tasks[k]}: {out.detail}"
    marker = '✅' if result.passed else '❌'
    log.info(f"{marker} {name}: {result.instances - result.failures}/{result.instances} passed, "
             f"worst {metric} {result.worst:.3e} ({result.elapsed:.1f}s)")
    return result


# --- instance checks ------------------------------------------------------

# Task tag for the non-cycle scenario below
OFF_CYCLE = 'off-cycle'


def off_cycle_scenario() -> Scenario:
    """C_4 with a three-light last button and the sub-context {0} also stored"""
    return Scenario.from_lists(4, 9, [[0, 1], [1, 2], [2, 3], [3, 0], [0]],
                               [[0, 1], [2, 3], [4, 5], [6, 7, 8]])


def random_off_cycle_target(rng: np.random.Generator) -> Box:
    """Random mixture of an embedded C_4 PR box and an NC box on off_cycle_scenario()"""
    s = off_cycle_scenario()
    gammas = admissible_gammas(4)
    pr = extremal_contextual(4, gammas[int(rng.integers(len(gammas)))]).behavior.table
    pr = [dict(t) for t in pr] + [{1 << 0: 0.5, 1 << 1: 0.5}]
    nc = random_nc_box(s, rng).box().behavior.table
    t = float(rng.random())
    table = []
    for p, q in zip(pr, nc):
        table.append({a: t * p.get(a, 0.0) + (1 - t) * q.get(a, 0.0) for a in sorted(set(p) | set(q))})
    return Box(s, Behavior(s, table))


def _instance_scenario(b) -> Scenario:
    return off_cycle_scenario() if b == OFF_CYCLE else build_cycle(b)


def _instance_target(rng, b) -> Box:
    return random_off_cycle_target(rng) if b == OFF_CYCLE else random_nd_target(b, rng)


def _nd_preservation(rng, b) -> Outcome:
    s = _instance_scenario(b)
    box = _instance_target(rng, b)
    w = random_wiring(s, rng)
    out = apply_wiring(w, box)
    report = validate_behavior(out)
    if not report.ok:
        return Outcome(False, math.inf, report.violations[0].message)
    nd = is_nondisturbing(out, 1e-9)
    return Outcome(nd.ok, nd.worst_deviation, f"witness {nd.witness}")


def _nc_preservation(rng, b, eps_lp: float) -> Outcome:
    s = _instance_scenario(b)
    mid = random_nc_box(s, rng)
    w = random_wiring(s, rng)
    out = apply_wiring(w, mid.box())
    verdict = is_noncontextual(out, eps_lp)
    composed = compose_nc_triple(w.pre, mid, w.post).box()
    diff = max_abs_difference(composed.behavior, out.behavior)
    passed = verdict.noncontextual and diff <= 1e-12
    return Outcome(passed, max(verdict.distance, diff),
                   f"verdict {verdict.verdict}, distance {verdict.distance:.3e}, compose diff {diff:.3e}")


def _monotonicity(rng, b, tol: float, max_iter: int) -> Outcome:
    s = _instance_scenario(b)
    box = _instance_target(rng, b)
    w = random_wiring(s, rng, max_strategies=256)
    res = check_monotonicity(box, w, tol, max_iter, seed=int(rng.integers(2 ** 32)))
    excess = max(0.0, res.lhs - res.rhs)
    return Outcome(res.ok, excess, f"lhs {res.lhs:.9f} rhs {res.rhs:.9f}")


def _bit_decomposition(rng, b: int) -> Outcome:
    target = random_nd_target(b, rng)
    gammas = admissible_gammas(b)
    gamma_from = gammas[int(rng.integers(len(gammas)))]
    dec = contextuality_bit_decompose(target, gamma_from)
    return Outcome(dec.residual <= 1e-9, dec.residual, f"gamma' {gamma_from}")


def _extremal(rng, b: int, eps_lp: float) -> Outcome:
    bad = []
    for g in admissible_gammas(b):
        if is_noncontextual(extremal_contextual(b, g), eps_lp).verdict != 'contextual':
            bad.append(f"gamma {g}")
    for z in all_zetas(b):
        if not is_noncontextual(extremal_noncontextual(b, z), eps_lp).noncontextual:
            bad.append(f"zeta {z}")
    return Outcome(not bad, float(len(bad)), ', '.join(bad[:3]))


def _rc_zero(rng, b: int, tol: float, max_iter: int) -> Outcome:
    box = random_nc_box(build_cycle(b), rng).box()
    res = relative_entropy_of_contextuality(box, tol, max_iter, seed=int(rng.integers(2 ** 32)))
    return Outcome(res.value <= tol, res.value, f"value {res.value:.3e}")


def _rc_pr_box(rng, tol: float, max_iter: int) -> Outcome:
    res = relative_entropy_of_contextuality(extremal_contextual(4, (1, 0, 0, 0)), tol, max_iter)
    dev = abs(res.value - PR_BOX_RC)
    return Outcome(dev <= 1e-4, dev, f"value {res.value:.9f}")


def _rc_noisy(rng, b: int, tol: float, max_iter: int) -> Outcome:
    gammas = admissible_gammas(b)
    gamma = gammas[int(rng.integers(len(gammas)))]
    w = float(rng.uniform(0.0, 1.0))
    res = relative_entropy_of_contextuality(noisy_extremal(b, gamma, w), tol, max_iter)
    dev = abs(res.value - noisy_relative_entropy(b, w))
    return Outcome(dev <= 1e-4, dev, f"w {w:.6f} value {res.value:.9f}")


def exact_cycle_mixture(b: int, rng: np.random.Generator) -> Tuple[List[Fraction], np.ndarray]:
    """Rational mixture of a random subset of extremal points, exact and as floats"""
    points = extremal_points(b)
    k = int(rng.integers(1, len(points) + 1))
    picked = sorted(int(i) for i in rng.choice(len(points), size=k, replace=False))
    raw = [int(v) for v in rng.integers(1, 1000, size=k)]
    total = sum(raw)
    exact = None
    for i, r in zip(picked, raw):
        vec = [Fraction(v).limit_denominator(2) for v in points[i].box.behavior.vector()]
        term = [Fraction(r, total) * v for v in vec]
        exact = term if exact is None else [a + t for a, t in zip(exact, term)]
    return exact, np.array([float(v) for v in exact])


def _oracle_mixture(rng, eps_lp: float) -> Outcome:
    s = build_cycle(3)
    exact, vec = exact_cycle_mixture(3, rng)
    float_nc = is_noncontextual(Box(s, Behavior.from_vector(s, vec)), eps_lp).noncontextual
    exact_nc = is_noncontextual_exact(s, exact) is not None
    return Outcome(float_nc == exact_nc, float(float_nc != exact_nc),
                   f"float {float_nc} exact {exact_nc}")


def near_facet_weights(b: int, steps: int = 25) -> List[Fraction]:
    """Noise weights closing in on the threshold (b-2)/b from both sides"""
    w_star = Fraction(b - 2, b)
    out = []
    for k in range(2, 2 + steps):
        out.append(w_star - Fraction(1, 2 ** k))
        out.append(w_star + Fraction(1, 2 ** k))
    return out


def _oracle_near_facet(rng, w: Fraction, eps_lp: float) -> Outcome:
    s = build_cycle(3)
    gamma = (1, 1, 1)
    pr = [Fraction(v).limit_denominator(2) for v in extremal_contextual(3, gamma).behavior.vector()]
    exact = [w * a + (1 - w) * Fraction(1, 4) for a in pr]
    float_nc = is_noncontextual(noisy_extremal(3, gamma, float(w)), eps_lp).noncontextual
    exact_nc = is_noncontextual_exact(s, exact) is not None
    return Outcome(float_nc == exact_nc, float(float_nc != exact_nc),
                   f"w {float(w):.12f} float {float_nc} exact {exact_nc}")


# --- suites ---------------------------------------------------------------

def suite_nd_preservation(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(500)
    tasks = [(3 + k % 4,) for k in range(n)]
    tasks += [(OFF_CYCLE,) for _ in range(settings.count(50))]
    return _run_instances('nd-preservation', settings, 1, tasks, _nd_preservation,
                          'nd deviation', 1e-9)


def suite_nc_preservation(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(500)
    tasks = [(3 + k % 4, settings.eps_lp) for k in range(n)]
    tasks += [(OFF_CYCLE, settings.eps_lp) for _ in range(settings.count(50))]
    return _run_instances('nc-preservation', settings, 2, tasks, _nc_preservation,
                          'distance / compose diff', settings.eps_lp)


def suite_monotonicity(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(200)
    tasks = [(3 + k % 3, settings.rc_tol, settings.max_iter) for k in range(n)]
    tasks += [(OFF_CYCLE, settings.rc_tol, settings.max_iter) for _ in range(settings.count(20))]
    return _run_instances('rc-monotonicity', settings, 3, tasks, _monotonicity,
                          'R_C excess', 2 * settings.rc_tol)


def suite_bit_decomposition(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(100)
    tasks = [(b,) for b in (3, 4, 5) for _ in range(n)]
    return _run_instances('bit-decomposition', settings, 4, tasks, _bit_decomposition,
                          'residual', 1e-9)


def suite_extremal(settings: SuiteSettings) -> SuiteResult:
    tasks = [(b, settings.eps_lp) for b in (3, 4, 5, 6)]
    return _run_instances('extremal-classification', settings, 5, tasks, _extremal,
                          'misclassified', 0.0)


def suite_rc_anchors(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(100)
    tol, it = settings.rc_tol, settings.max_iter

    def dispatch(rng, kind, *args):
        if kind == 'nc':
            return _rc_zero(rng, *args)
        if kind == 'noisy':
            return _rc_noisy(rng, *args)
        return _rc_pr_box(rng, *args)

    tasks = [('pr', tol, it)]
    tasks += [('nc', 3 + k % 3, tol, it) for k in range(n)]
    tasks += [('noisy', 3 + k % 2, tol, it) for k in range(settings.count(10))]
    return _run_instances('rc-anchors', settings, 6, tasks, dispatch, 'deviation', 1e-4)


def suite_oracle(settings: SuiteSettings) -> SuiteResult:
    n = settings.count(1000)

    def dispatch(rng, kind, *args):
        if kind == 'mixture':
            return _oracle_mixture(rng, *args)
        return _oracle_near_facet(rng, *args)

    tasks = [('mixture', settings.eps_lp) for _ in range(n)]
    tasks += [('near-facet', w, settings.eps_lp) for w in near_facet_weights(3)]
    return _run_instances('exact-oracle', settings, 7, tasks, dispatch, 'disagreements', 0.0)


SUITES: Dict[str, Callable[[SuiteSettings], SuiteResult]] = {
    'nd-preservation': suite_nd_preservation,
    'nc-preservation': suite_nc_preservation,
    'rc-monotonicity': suite_monotonicity,
    'bit-decomposition': suite_bit_decomposition,
    'extremal-classification': suite_extremal,
    'rc-anchors': suite_rc_anchors,
    'exact-oracle': suite_oracle,
}

DEFAULT_SUITES = ('nd-preservation', 'nc-preservation', 'rc-monotonicity', 'bit-decomposition')


def run_suites(names: Sequence[str], settings: SuiteSettings) -> Dict[str, object]:
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(name)
        log.info(f"🔄 running {name} (seed {settings.seed}, scale {settings.scale})")
        results.append(SUITES[name](settings))

    frame = pd.DataFrame([r.to_dict() for r in results],
                         columns=['suite', 'passed', 'instances', 'failures', 'worst', 'threshold'])
    log.info("pass/fail matrix:\n" + frame.to_string(index=False))
    return {
        'seed': settings.seed,
        'scale': settings.scale,
        'passed': all(r.passed for r in results),
        'suites': [r.to_dict() for r in results],
    }
