"""
b-cycle scenarios and their extremal boxes.

Button i (0-based) owns lights 2i and 2i+1 and shares context i with button
i+1 mod b. The textbook formulas number buttons and lights from 1; the
conversion happens once, in _marker_light and _zeta_light.

Reading of the contextual family used here: in context {i, i+1} the box
puts 1/2 on each outcome where light m_i = 2i+1-gamma_i and light
2(i+1)+1 are both on or both off. Writing s_i for "button i lit its second
light", that is s_i XOR s_{i+1} = gamma_i on edge i, so the box is
contextual exactly when gamma has odd weight.
"""

import functools
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from src import config
from src.behavior import Behavior, Box, is_nondisturbing, max_abs_difference
from src.errors import NotNondisturbingError, PreconditionError, SolverError
from src.ncpolytope import (
    HIGHS_OPTIONS,
    DeterministicStrategy,
    is_noncontextual,
    polish_weights,
    strategy_behavior,
)
from src.scenario import Scenario, bitstring_to_mask
from src.wiring import (
    PostFamily,
    Wiring,
    apply_wiring,
    deterministic_component,
    identity_pre,
    post_scenario,
)

log = logging.getLogger(__name__)


def parse_bits(text: str, b: Optional[int] = None) -> Tuple[int, ...]:
    """'10000' -> (1, 0, 0, 0, 0)"""
    text = text.strip()
    bitstring_to_mask(text)
    if b is not None and len(text) != b:
        raise PreconditionError(f"bit string {text!r} has length {len(text)}, expected {b}")
    return tuple(int(ch) for ch in text)


def format_bits(bits: Sequence[int]) -> str:
    return ''.join(str(int(v)) for v in bits)


def _check_b(b: int) -> None:
    if b < 3:
        raise PreconditionError(f"cycle length must be at least 3, got {b}")


def _check_string(bits: Sequence[int], b: int, name: str) -> None:
    if len(bits) != b or any(v not in (0, 1) for v in bits):
        raise PreconditionError(f"{name} must be a length-{b} bit string, got {tuple(bits)}")


def _check_gamma(gamma: Sequence[int], b: int) -> None:
    _check_string(gamma, b, 'gamma')
    if sum(gamma) % 2 != 1:
        raise PreconditionError(f"gamma {format_bits(gamma)} has even Hamming weight")


def _marker_light(i: int, gamma_i: int) -> int:
    # 1-based light 2i - gamma_i of button i
    return 2 * i + 1 - gamma_i


def _zeta_light(i: int, zeta_i: int) -> int:
    # 1-based light 2i - 1 + zeta_i of button i
    return 2 * i + zeta_i


@functools.lru_cache(maxsize=None)
def build_cycle(b: int) -> Scenario:
    _check_b(b)
    contexts = [(1 << i) | (1 << ((i + 1) % b)) for i in range(b)]
    edges = [0b11 << (2 * i) for i in range(b)]
    return Scenario(b, 2 * b, contexts, edges)


def admissible_gammas(b: int) -> List[Tuple[int, ...]]:
    return [g for g in itertools.product((0, 1), repeat=b) if sum(g) % 2 == 1]


def all_zetas(b: int) -> List[Tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=b))


def extremal_contextual(b: int, gamma: Sequence[int]) -> Box:
    _check_b(b)
    gamma = tuple(int(v) for v in gamma)
    _check_gamma(gamma, b)
    s = build_cycle(b)
    table = []
    for i in range(b):
        nxt = (i + 1) % b
        marker = _marker_light(i, gamma[i])
        partner = 2 * nxt + 1
        dist = {}
        for u in (2 * i, 2 * i + 1):
            for v in (2 * nxt, 2 * nxt + 1):
                a = (1 << u) | (1 << v)
                if ((a >> marker) & 1) == ((a >> partner) & 1):
                    dist[a] = 0.5
        table.append(dist)
    return Box(s, Behavior(s, table))


def zeta_strategy(b: int, zeta: Sequence[int]) -> DeterministicStrategy:
    _check_string(zeta, b, 'zeta')
    return DeterministicStrategy(tuple(_zeta_light(i, int(zeta[i])) for i in range(b)))


def extremal_noncontextual(b: int, zeta: Sequence[int]) -> Box:
    _check_b(b)
    return strategy_behavior(build_cycle(b), zeta_strategy(b, zeta))


def uniform_box(b: int) -> Box:
    s = build_cycle(b)
    table = []
    for c in s.contexts:
        outs = s.outcomes(c)
        table.append({a: 1.0 / len(outs) for a in outs})
    return Box(s, Behavior(s, table))


def noisy_extremal(b: int, gamma: Sequence[int], w: float) -> Box:
    """w P^gamma + (1 - w) uniform"""
    if not 0.0 <= w <= 1.0:
        raise PreconditionError(f"noise weight must lie in [0, 1], got {w}")
    pr = extremal_contextual(b, gamma).behavior
    un = uniform_box(b).behavior
    table = []
    for t1, t2 in zip(pr.table, un.table):
        table.append({a: w * t1.get(a, 0.0) + (1.0 - w) * t2[a] for a in t2})
    return Box(pr.scenario, Behavior(pr.scenario, table))


def noisy_threshold(b: int) -> float:
    """Largest w for which the noisy extremal box stays noncontextual"""
    _check_b(b)
    return (b - 2) / b


def binary_kl(x: float, y: float) -> float:
    """d(x || y) in bits for Bernoulli distributions"""
    total = 0.0
    for p, q in ((x, y), (1.0 - x, 1.0 - y)):
        if p > 0:
            total += p * np.log2(p / q)
    return float(total)


def noisy_relative_entropy(b: int, w: float) -> float:
    """R_C of the noisy extremal box"""
    if w <= noisy_threshold(b):
        return 0.0
    return binary_kl((1.0 + w) / 2.0, (b - 1) / b)


# --- wirings ---------------------------------------------------------------

def _pair_post_scenario(s: Scenario) -> Scenario:
    # C_(a) is the light pair of the button owning a
    c_edges = [0b11 << (2 * (a // 2)) for a in range(s.num_lights)]
    return post_scenario(s, c_edges, s.num_lights)


def relabel_flips(gamma_from: Sequence[int], gamma_to: Sequence[int]) -> Tuple[int, ...]:
    """Buttons whose light pair is swapped: f_0 = 0, f_{i+1} = f_i ^ gamma_i ^ gamma'_i"""
    flips = [0]
    for i in range(len(gamma_from) - 1):
        flips.append(flips[-1] ^ int(gamma_from[i]) ^ int(gamma_to[i]))
    return tuple(flips)


def _single_component_wiring(b: int, pick) -> Wiring:
    s = build_cycle(b)
    pre = identity_pre(s)
    post_s = _pair_post_scenario(s)
    comp = deterministic_component(s, pre.scenario, post_s, pick)
    return Wiring(pre, PostFamily(post_s, [comp]), s)


def relabel_wiring(b: int, gamma_from: Sequence[int], gamma_to: Sequence[int]) -> Wiring:
    """Maps P^gamma_from to P^gamma_to by swapping light pairs"""
    _check_b(b)
    _check_gamma(gamma_from, b)
    _check_gamma(gamma_to, b)
    flips = relabel_flips(gamma_from, gamma_to)
    return _single_component_wiring(b, lambda a, x, y: a ^ flips[x])


def collapse_wiring(b: int, gamma_from: Sequence[int], zeta: Sequence[int]) -> Wiring:
    """Maps any box on the cycle to the deterministic zeta box"""
    _check_b(b)
    _check_gamma(gamma_from, b)
    _check_string(zeta, b, 'zeta')
    return _single_component_wiring(b, lambda a, x, y: _zeta_light(x, int(zeta[x])))


# --- contextuality bits ----------------------------------------------------

@dataclass
class ExtremalPoint:
    kind: str
    bits: Tuple[int, ...]
    box: Box


def extremal_points(b: int) -> List[ExtremalPoint]:
    """All 2^(b-1) contextual and 2^b noncontextual extremal boxes"""
    points = [ExtremalPoint('gamma', g, extremal_contextual(b, g)) for g in admissible_gammas(b)]
    points += [ExtremalPoint('zeta', z, extremal_noncontextual(b, z)) for z in all_zetas(b)]
    return points


def random_nd_target(b: int, rng: np.random.Generator) -> Box:
    """Dirichlet mixture of every extremal point, ND by construction"""
    points = extremal_points(b)
    weights = rng.dirichlet(np.ones(len(points)))
    s = build_cycle(b)
    vec = sum(w * p.box.behavior.vector() for w, p in zip(weights, points))
    return Box(s, Behavior.from_vector(s, vec))


@dataclass
class Decomposition:
    wiring: Wiring
    residual: float
    weights: Dict[str, float]
    distance: float


def contextuality_bit_decompose(target: Box, gamma_from: Sequence[int],
                                eps_nd: Optional[float] = None) -> Decomposition:
    """
    Express target as a mixture of extremal points and turn that into one
    wiring acting on P^gamma_from: relabel components for the contextual
    points, collapse components for the deterministic ones.
    """
    s = target.scenario
    b = s.num_buttons
    if s != build_cycle(b):
        raise PreconditionError("target is not a box on a b-cycle")
    _check_gamma(tuple(gamma_from), b)

    points = extremal_points(b)
    E = np.column_stack([p.box.behavior.vector() for p in points])
    t = target.behavior.vector()
    m, n = E.shape
    I = np.eye(m)
    A_eq = np.vstack([np.hstack([E, I, -I]), np.hstack([np.ones((1, n)), np.zeros((1, 2 * m))])])
    res = linprog(np.concatenate([np.zeros(n), np.ones(2 * m)]), A_eq=A_eq,
                  b_eq=np.concatenate([t, [1.0]]), bounds=(0, None), method='highs',
                  options=HIGHS_OPTIONS)
    if not res.success:
        raise SolverError(f"decomposition LP failed: {res.message}")
    distance = float(res.fun)
    if distance > config.EPS_LP:
        nd = is_nondisturbing(target, eps_nd)
        if not nd.ok:
            raise NotNondisturbingError(nd)
        raise SolverError(f"target is ND but the decomposition LP left distance {distance:.3e}")
    q = np.clip(res.x[:n], 0.0, None)
    q = polish_weights(E, t, q / q.sum())

    pre = identity_pre(s)
    post_s = _pair_post_scenario(s)
    components = []
    weights = {}
    for p, w in zip(points, q):
        if w <= 0.0:
            continue
        if p.kind == 'gamma':
            flips = relabel_flips(gamma_from, p.bits)
            pick = (lambda f: (lambda a, x, y: a ^ f[x]))(flips)
        else:
            pick = (lambda z: (lambda a, x, y: _zeta_light(x, z[x])))(p.bits)
        components.append(deterministic_component(s, pre.scenario, post_s, pick, float(w)))
        weights[f"{p.kind}:{format_bits(p.bits)}"] = float(w)
    wiring = Wiring(pre, PostFamily(post_s, components), s)
    wired = apply_wiring(wiring, extremal_contextual(b, gamma_from))
    residual = max_abs_difference(wired.behavior, target.behavior)
    log.debug(f"decomposition on C_{b}: {len(components)} components, residual {residual:.3e}")
    return Decomposition(wiring, residual, weights, distance)


def bisect_threshold(b: int, gamma: Sequence[int], eps_lp: Optional[float] = None,
                     iterations: int = 40) -> float:
    """
    Largest noise weight w at which noisy_extremal(b, gamma, w) still passes
    the membership LP, located by bisection on [0, 1].
    """
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        if is_noncontextual(noisy_extremal(b, gamma, mid), eps_lp).noncontextual:
            lo = mid
        else:
            hi = mid
    log.debug(f"threshold on C_{b} for gamma {format_bits(gamma)}: [{lo:.12f}, {hi:.12f}]")
    return (lo + hi) / 2.0
