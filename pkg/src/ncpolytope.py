"""
The noncontextual set: deterministic strategies, their mixtures, and LP
membership with a certificate either way.

Membership is tested on maximal contexts only. The primal LP minimises the
L1 distance from p to the convex hull of the vertex behaviors; when that
distance exceeds eps_lp its dual supplies a separating inequality.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from src import config
from src.behavior import Behavior, Box, NDReport, _as_behavior, is_nondisturbing, outcome_layout
from src.errors import EnumerationCapError, PreconditionError, SolverError
from src.exact_lp import feasible_convex_combination, l1_distance_exact, to_fraction
from src.scenario import Scenario, bits_of

log = logging.getLogger(__name__)

HIGHS_OPTIONS = {
    'primal_feasibility_tolerance': 1e-10,
    'dual_feasibility_tolerance': 1e-10,
}


@dataclass(frozen=True)
class DeterministicStrategy:
    """choice[i] is the light that turns on when button i is pressed"""
    choice: Tuple[int, ...]

    def validate(self, s: Scenario) -> None:
        if len(self.choice) != s.num_buttons:
            raise PreconditionError(
                f"strategy has {len(self.choice)} entries, scenario has {s.num_buttons} buttons")
        for i, k in enumerate(self.choice):
            if k < 0 or not (s.light_edges[i] >> k) & 1:
                raise PreconditionError(f"strategy lights {k} for button {i}, "
                                        f"which is not in A_({i}) = {bits_of(s.light_edges[i])}")

    def outcome(self, x: int) -> int:
        out = 0
        for i in bits_of(x):
            out |= 1 << self.choice[i]
        return out


@dataclass
class NCBox:
    scenario: Scenario
    strategies: List[DeterministicStrategy]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)

    def validate(self, eps_norm: Optional[float] = None) -> None:
        eps_norm = config.EPS_NORM if eps_norm is None else eps_norm
        if len(self.strategies) != len(self.weights):
            raise PreconditionError(
                f"{len(self.strategies)} strategies but {len(self.weights)} weights")
        if len(self.strategies) == 0:
            raise PreconditionError("NC box has no strategies")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise PreconditionError("weights must be finite and nonnegative")
        if abs(float(np.sum(self.weights)) - 1.0) > eps_norm:
            raise PreconditionError(f"weights sum to {float(np.sum(self.weights))!r}")
        if len(set(self.strategies)) != len(self.strategies):
            raise PreconditionError("strategies are not distinct")
        for d in self.strategies:
            d.validate(self.scenario)

    def box(self) -> Box:
        return mix(self.scenario, self.strategies, self.weights)

    def merged(self, drop_below: float = 0.0) -> 'NCBox':
        """Merge repeated strategies and drop weights at or below drop_below"""
        acc: Dict[DeterministicStrategy, float] = {}
        for d, w in zip(self.strategies, self.weights):
            acc[d] = acc.get(d, 0.0) + float(w)
        kept = [(d, w) for d, w in acc.items() if w > drop_below]
        if not kept:
            raise PreconditionError("every weight was dropped")
        total = sum(w for _, w in kept)
        return NCBox(self.scenario, [d for d, _ in kept], np.array([w / total for _, w in kept]))


@dataclass
class NCCertificate:
    """
    kind == 'weights': `weights` over `strategies` reproduce the behavior.
    kind == 'inequality': <c, p> - bound >= gap > 0 while <c, v> <= bound on
    every vertex; c is indexed by the maximal-context layout.
    """
    kind: str
    strategies: List[DeterministicStrategy] = field(default_factory=list)
    weights: Optional[np.ndarray] = None
    coefficients: Optional[np.ndarray] = None
    bound: Optional[float] = None
    gap: Optional[float] = None
    residual: Optional[float] = None
    exact_weights: Optional[List[Fraction]] = None


@dataclass
class NCVerdict:
    verdict: str
    distance: float
    certificate: Optional[NCCertificate] = None
    nd_report: Optional[NDReport] = None

    @property
    def noncontextual(self) -> bool:
        return self.verdict == 'noncontextual'


def enumerate_strategies(s: Scenario, cap: Optional[int] = None) -> List[DeterministicStrategy]:
    cap = config.ENUM_CAP if cap is None else cap
    count = s.num_strategies()
    if count > cap:
        raise EnumerationCapError('deterministic strategies', count, cap)

    def build():
        choices = [bits_of(e) for e in s.light_edges]
        return [DeterministicStrategy(tuple(c)) for c in itertools.product(*choices)]
    return s.cached('strategies', build)


def strategy_behavior(s: Scenario, d: DeterministicStrategy) -> Box:
    d.validate(s)
    table = [{d.outcome(c): 1.0} for c in s.contexts]
    return Box(s, Behavior(s, table))


def mix(s: Scenario, strategies: Sequence[DeterministicStrategy], weights,
        eps_norm: Optional[float] = None) -> Box:
    ncbox = NCBox(s, list(strategies), np.asarray(weights, dtype=float))
    ncbox.validate(eps_norm)
    table: List[Dict[int, float]] = []
    for c in s.contexts:
        acc: Dict[int, float] = {}
        for d, w in zip(ncbox.strategies, ncbox.weights):
            if w == 0.0:
                continue
            a = d.outcome(c)
            acc[a] = acc.get(a, 0.0) + float(w)
        table.append(acc)
    return Box(s, Behavior(s, table))


def uniform_mixture(s: Scenario) -> NCBox:
    strategies = enumerate_strategies(s)
    return NCBox(s, list(strategies), np.full(len(strategies), 1.0 / len(strategies)))


def random_nc_box(s: Scenario, rng: np.random.Generator,
                  max_support: Optional[int] = None) -> NCBox:
    """
    Dirichlet(1, ..., 1) weights over a uniformly chosen subset of the
    vertices. The subset size is uniform on 1..min(n, max_support).
    """
    strategies = enumerate_strategies(s)
    n = len(strategies)
    top = n if max_support is None else min(n, max_support)
    k = int(rng.integers(1, top + 1))
    picked = np.sort(rng.choice(n, size=k, replace=False))
    weights = rng.dirichlet(np.ones(k))
    return NCBox(s, [strategies[i] for i in picked], weights)


def vertex_matrix(s: Scenario) -> np.ndarray:
    """Columns are the vertex behaviors restricted to maximal contexts"""
    def build():
        strategies = enumerate_strategies(s)
        rows, size = outcome_layout(s, s.maximal_context_indices())
        V = np.zeros((size, len(strategies)))
        index = []
        for j, outs, offset in rows:
            index.append(({a: k for k, a in enumerate(outs)}, s.contexts[j], offset))
        for col, d in enumerate(strategies):
            for pos, c, offset in index:
                V[offset + pos[d.outcome(c)], col] = 1.0
        log.debug(f"vertex matrix {V.shape} for {s!r}")
        return V
    return s.cached('vertex_matrix', build)


def l1_distance_lp(V: np.ndarray, p: np.ndarray) -> Tuple[float, np.ndarray]:
    """min ||V q - p||_1 over the simplex; returns (distance, q)"""
    m, n = V.shape
    I = np.eye(m)
    A_eq = np.vstack([
        np.hstack([V, I, -I]),
        np.hstack([np.ones((1, n)), np.zeros((1, 2 * m))]),
    ])
    b_eq = np.concatenate([p, [1.0]])
    cost = np.concatenate([np.zeros(n), np.ones(2 * m)])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method='highs',
                  options=HIGHS_OPTIONS)
    if not res.success:
        raise SolverError(f"membership LP failed: {res.message}")
    q = np.clip(res.x[:n], 0.0, None)
    q = q / q.sum()
    return float(max(res.fun, 0.0)), q


def polish_weights(V: np.ndarray, p: np.ndarray, q: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Least-squares refit on the support of q, kept only if it lowers the residual"""
    support = np.flatnonzero(q > floor)
    if support.size == 0:
        return q
    A = np.vstack([V[:, support], np.ones((1, support.size))])
    rhs = np.concatenate([p, [1.0]])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.any(sol < 0):
        return q
    polished = np.zeros_like(q)
    polished[support] = sol / sol.sum()
    if np.max(np.abs(V @ polished - p)) < np.max(np.abs(V @ q - p)):
        return polished
    return q


def separating_inequality(V: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """max <c,p> - beta s.t. V^T c <= beta, |c| <= 1; normalised to ||c||_inf = 1"""
    m, n = V.shape
    cost = np.concatenate([-p, [1.0]])
    A_ub = np.hstack([V.T, -np.ones((n, 1))])
    b_ub = np.zeros(n)
    bounds = [(-1.0, 1.0)] * m + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method='highs',
                  options=HIGHS_OPTIONS)
    if not res.success:
        raise SolverError(f"separation LP failed: {res.message}")
    c = res.x[:m]
    scale = float(np.max(np.abs(c)))
    if scale <= 0.0:
        raise SolverError("separation LP returned a zero inequality")
    c = c / scale
    # Tightest bound valid on every vertex
    beta = float(np.max(V.T @ c))
    gap = float(c @ p - beta)
    return c, beta, gap


def is_noncontextual(B, eps_lp: Optional[float] = None, exact: bool = False,
                     eps_nd: Optional[float] = None) -> NCVerdict:
    behavior = _as_behavior(B)
    s = behavior.scenario
    eps_lp = config.EPS_LP if eps_lp is None else eps_lp

    nd = is_nondisturbing(behavior, eps_nd)
    if not nd.ok:
        log.debug(f"box is disturbing ({nd.worst_deviation:.3e}); skipping polytope LP")
        return NCVerdict('disturbing', float('inf'), None, nd)

    strategies = enumerate_strategies(s)
    V = vertex_matrix(s)
    p = behavior.vector()
    if exact:
        return _exact_verdict(V, p, strategies, eps_lp, nd)

    distance, q = l1_distance_lp(V, p)
    log.debug(f"membership LP: {V.shape[0]} rows, {V.shape[1]} vertices, distance {distance:.3e}")

    if distance <= eps_lp:
        q = polish_weights(V, p, q)
        residual = float(np.max(np.abs(V @ q - p)))
        cert = NCCertificate('weights', list(strategies), weights=q, residual=residual)
        return NCVerdict('noncontextual', distance, cert, nd)

    c, beta, gap = separating_inequality(V, p)
    cert = NCCertificate('inequality', coefficients=c, bound=beta, gap=gap)
    return NCVerdict('contextual', distance, cert, nd)


def _exact_verdict(V: np.ndarray, p: np.ndarray, strategies, eps_lp: float,
                   nd: NDReport) -> NCVerdict:
    """Decide on the exact L1 distance; the rational target need not be exactly normalised"""
    columns = [[int(v) for v in V[:, k]] for k in range(V.shape[1])]
    target = [to_fraction(v) for v in p]
    distance, weights = l1_distance_exact(columns, target)
    if distance <= Fraction(eps_lp):
        qf = np.array([float(w) for w in weights])
        cert = NCCertificate('weights', list(strategies), weights=qf,
                             residual=float(np.max(np.abs(V @ qf - p))),
                             exact_weights=weights)
        return NCVerdict('noncontextual', float(distance), cert, nd)
    c, beta, gap = separating_inequality(V, p)
    if gap <= 0:
        raise SolverError(f"exact distance {float(distance):.3e} exceeds eps_lp "
                          f"but the separation gap is {gap:.3e}")
    cert = NCCertificate('inequality', coefficients=c, bound=beta, gap=gap)
    return NCVerdict('contextual', float(distance), cert, nd)


def is_noncontextual_exact(s: Scenario, p: Sequence[Fraction]) -> Optional[List[Fraction]]:
    """
    Exact membership for a behavior given as rationals over the
    maximal-context layout; returns the vertex weights or None.
    """
    V = vertex_matrix(s)
    columns = [[int(v) for v in V[:, k]] for k in range(V.shape[1])]
    return feasible_convex_combination(columns, p)


def check_certificate(B, cert: NCCertificate, eps_lp: Optional[float] = None) -> bool:
    """Re-evaluate a certificate against the vertex list"""
    behavior = _as_behavior(B)
    s = behavior.scenario
    eps_lp = config.EPS_LP if eps_lp is None else eps_lp
    V = vertex_matrix(s)
    p = behavior.vector()
    if cert.kind == 'weights':
        q = np.asarray(cert.weights, dtype=float)
        if q.shape != (V.shape[1],) or np.any(q < -eps_lp):
            return False
        return abs(q.sum() - 1.0) <= eps_lp and float(np.max(np.abs(V @ q - p))) <= eps_lp
    if cert.kind == 'inequality':
        c = np.asarray(cert.coefficients, dtype=float)
        if c.shape != (V.shape[0],):
            return False
        vertices_ok = bool(np.all(V.T @ c <= cert.bound + eps_lp))
        violated = float(c @ p) >= cert.bound + cert.gap - eps_lp and cert.gap > 0
        return vertices_ok and violated
    return False


def strategy_index(s: Scenario) -> Dict[Tuple[int, ...], int]:
    def build():
        return {d.choice: k for k, d in enumerate(enumerate_strategies(s))}
    return s.cached('strategy_index', build)


def ncbox_weights_on_vertices(ncbox: NCBox) -> np.ndarray:
    """Weights of an NCBox spread over the full vertex list"""
    index = strategy_index(ncbox.scenario)
    q = np.zeros(len(index))
    for d, w in zip(ncbox.strategies, ncbox.weights):
        q[index[d.choice]] += w
    return q
