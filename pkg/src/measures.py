"""
Relative entropies between behaviors and the relative entropy of
contextuality R_C, all in bits.

R_C(B) = min over NC boxes B* of max over maximal contexts of
KL(p(.|x) || p*(.|x)). Parameterising B* by vertex weights q makes this a
convex program over the simplex. It is solved by exponentiated-gradient
steps on a softmax-smoothed max, refined with SLSQP on the epigraph form,
and the reported gap comes from a linearisation lower bound, so
value - gap is a certified lower bound on the optimum.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import rel_entr

from src import config
from src.behavior import Box, _as_behavior, is_nondisturbing, outcome_layout
from src.errors import NotNondisturbingError, PreconditionError, ScenarioMismatchError, SolverError
from src.ncpolytope import HIGHS_OPTIONS, NCBox, enumerate_strategies, ncbox_weights_on_vertices, vertex_matrix
from src.wiring import Wiring, apply_wiring, compose_nc_triple

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
SUPPORT_FLOOR = 1e-12
SLSQP_MAX_VARS = 512


def kl_divergence(P: Sequence[float], Q: Sequence[float], eps_norm: Optional[float] = None) -> float:
    """sum p log2(p/q); 0 log 0 = 0; +inf when p > 0 meets q = 0"""
    eps_norm = config.EPS_NORM if eps_norm is None else eps_norm
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise PreconditionError(f"distributions have shapes {P.shape} and {Q.shape}")
    for name, d in (('P', P), ('Q', Q)):
        if np.any(d < 0) or abs(float(d.sum()) - 1.0) > eps_norm:
            raise PreconditionError(f"{name} is not a normalized distribution (sum {float(d.sum())!r})")
    return float(np.sum(rel_entr(P, Q)) / LN2)


@dataclass
class RelativeEntropy:
    value: float
    context: int


def behavior_relative_entropy(P, P_star, eps_norm: Optional[float] = None) -> RelativeEntropy:
    """Max over stored contexts of KL(P(.|x) || P*(.|x))"""
    P, P_star = _as_behavior(P), _as_behavior(P_star)
    if P.scenario != P_star.scenario:
        raise ScenarioMismatchError("behaviors live on different scenarios")
    best = RelativeEntropy(-1.0, -1)
    for j in range(len(P.scenario.contexts)):
        keys = sorted(set(P.table[j]) | set(P_star.table[j]))
        d = kl_divergence([P.table[j].get(a, 0.0) for a in keys],
                          [P_star.table[j].get(a, 0.0) for a in keys], eps_norm)
        if d > best.value:
            best = RelativeEntropy(d, j)
    return best


class RcObjective:
    """F(q) = max_x KL(p_x || (V q)_x) over maximal contexts, with gradients"""

    def __init__(self, B):
        behavior = _as_behavior(B)
        s = behavior.scenario
        self.scenario = s
        self.contexts = s.maximal_context_indices()
        rows, size = outcome_layout(s, self.contexts)
        self.V = vertex_matrix(s)
        self.p = behavior.vector(self.contexts)
        self.starts = np.array([offset for _, _, offset in rows], dtype=int)
        self.block = np.zeros((len(rows), size))
        for k, (_, outs, offset) in enumerate(rows):
            self.block[k, offset:offset + len(outs)] = 1.0
        self.mask = self.p > 0
        self.n = self.V.shape[1]

    def terms(self, q: np.ndarray, floor: float = 0.0) -> np.ndarray:
        r = np.maximum(self.V @ q, floor)
        per = rel_entr(self.p, r) / LN2
        return np.add.reduceat(per, self.starts)

    def value(self, q: np.ndarray) -> float:
        return float(np.max(self.terms(q)))

    def gradients(self, q: np.ndarray) -> np.ndarray:
        """Row x is the gradient of KL_x with respect to q"""
        r = np.maximum(self.V @ q, 1e-300)
        ratio = np.where(self.mask, self.p / r, 0.0)
        return -(self.block * ratio) @ self.V / LN2

    def lower_bound(self, q: np.ndarray) -> float:
        """
        max over context weights pi of min over the simplex of the
        linearisation of sum_x pi_x KL_x at q; a valid lower bound on min F.
        """
        k = self.terms(q)
        if not np.all(np.isfinite(k)):
            return 0.0
        G = self.gradients(q)
        K = len(k)
        const = k - G @ q
        cost = np.concatenate([-const, [-1.0]])
        A_ub = np.hstack([-G.T, np.ones((self.n, 1))])
        b_ub = np.zeros(self.n)
        A_eq = np.concatenate([np.ones(K), [0.0]])[None, :]
        bounds = [(0.0, None)] * K + [(None, None)]
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                      bounds=bounds, method='highs', options=HIGHS_OPTIONS)
        if not res.success:
            raise SolverError(f"R_C duality LP failed: {res.message}")
        return max(0.0, -float(res.fun))

    def gap(self, q: np.ndarray) -> float:
        return max(0.0, self.value(q) - self.lower_bound(q))


@dataclass
class RcResult:
    value: float
    argmin: NCBox
    worst_context: int
    iterations: int
    gap_estimate: float
    converged: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            'value_bits': self.value,
            'converged': self.converged,
            'iterations': self.iterations,
            'worst_context': self.worst_context,
            'gap_estimate': self.gap_estimate,
        }


def _exponentiated_gradient(obj: RcObjective, q: np.ndarray, iterations: int,
                            t0: int = 0) -> np.ndarray:
    """Mirror descent on the softmax-smoothed max; temperature and step shrink as 1/sqrt(t)"""
    best_q, best_f = q, obj.value(q)
    for step in range(1, iterations + 1):
        t = t0 + step
        k = obj.terms(q)
        f = float(np.max(k))
        if f < best_f:
            best_q, best_f = q, f
        tau = 1.0 / math.sqrt(t)
        pi = np.exp((k - f) / tau)
        pi /= pi.sum()
        g = pi @ obj.gradients(q)
        span = float(g.max() - g.min())
        if span <= 0.0:
            break
        a = 1.0 / (math.sqrt(t) * span)
        y = q * np.exp(-a * (g - g.min()))
        q = y / y.sum()
        if step % 1000 == 0:
            log.trace(f"EG t={t} F={f:.10f} best={best_f:.10f}")
    if obj.value(q) < best_f:
        best_q = q
    return best_q


def _slsqp_refine(obj: RcObjective, q: np.ndarray, max_iter: int) -> np.ndarray:
    n = obj.n
    if n > SLSQP_MAX_VARS:
        log.debug(f"skipping SLSQP refinement for {n} vertices")
        return q
    start = np.concatenate([q, [obj.value(q)]])

    def kl_slack(z):
        return z[n] - obj.terms(np.maximum(z[:n], 0.0), floor=1e-300)

    def kl_slack_jac(z):
        G = obj.gradients(np.maximum(z[:n], 0.0))
        return np.hstack([-G, np.ones((G.shape[0], 1))])

    constraints = [
        {'type': 'ineq', 'fun': kl_slack, 'jac': kl_slack_jac},
        {'type': 'eq', 'fun': lambda z: np.sum(z[:n]) - 1.0,
         'jac': lambda z: np.concatenate([np.ones(n), [0.0]])},
    ]
    bounds = [(0.0, 1.0)] * n + [(0.0, None)]
    with np.errstate(divide='ignore', invalid='ignore'):
        res = minimize(lambda z: z[n], start, jac=lambda z: np.concatenate([np.zeros(n), [1.0]]),
                       method='SLSQP', bounds=bounds, constraints=constraints,
                       options={'maxiter': max_iter, 'ftol': 1e-15})
    cand = np.clip(res.x[:n], 0.0, None)
    if cand.sum() <= 0:
        return q
    cand /= cand.sum()
    if np.isfinite(obj.value(cand)) and obj.value(cand) < obj.value(q):
        return cand
    return q


def _truncate(obj: RcObjective, q: np.ndarray, tol: float) -> np.ndarray:
    cut = np.where(q < SUPPORT_FLOOR, 0.0, q)
    cut /= cut.sum()
    if obj.value(cut) <= obj.value(q) + tol / 10:
        return cut
    return q


def relative_entropy_of_contextuality(B, tol: Optional[float] = None, max_iter: Optional[int] = None,
                                      seed: Optional[int] = None,
                                      warm_start: Optional[NCBox] = None,
                                      eps_nd: Optional[float] = None) -> RcResult:
    behavior = _as_behavior(B)
    tol = config.RC_TOL if tol is None else tol
    max_iter = config.RC_MAX_ITER if max_iter is None else max_iter
    seed = config.DEFAULT_SEED if seed is None else seed

    nd = is_nondisturbing(behavior, eps_nd)
    if not nd.ok:
        raise NotNondisturbingError(nd)

    obj = RcObjective(behavior)
    n = obj.n
    uniform = np.full(n, 1.0 / n)
    if warm_start is not None:
        if warm_start.scenario != behavior.scenario:
            raise ScenarioMismatchError("warm start lives on a different scenario")
        q = ncbox_weights_on_vertices(warm_start)
        q = (1.0 - 1e-9) * q / q.sum() + 1e-9 * uniform
    else:
        q = uniform

    rng = np.random.default_rng(seed)
    block = min(2000, max_iter)
    iterations = 0
    best = q
    gap = float('inf')
    restarts = 0
    previous = obj.value(best)
    while iterations < max_iter:
        steps = min(block, max_iter - iterations)
        cand = _exponentiated_gradient(obj, best, steps, t0=iterations)
        iterations += steps
        cand = _slsqp_refine(obj, cand, max_iter=500)
        if obj.value(cand) <= obj.value(best):
            best = cand
        gap = obj.gap(best)
        current = obj.value(best)
        log.debug(f"R_C after {iterations} iterations: F={current:.12f} gap={gap:.3e}")
        if gap <= tol:
            break
        if restarts >= 2 and previous - current <= tol * 1e-3:
            break
        previous = current
        if restarts < 2 and iterations < max_iter:
            # Random restart; kept only if it beats the incumbent
            restarts += 1
            trial = _slsqp_refine(obj, rng.dirichlet(np.ones(n)) * 0.5 + 0.5 * uniform, max_iter=500)
            if obj.value(trial) < obj.value(best):
                best = trial

    best = _truncate(obj, best, tol)
    value = obj.value(best)
    gap = obj.gap(best)
    converged = gap <= tol
    if not converged:
        log.warning(f"⚠️ R_C not converged after {iterations} iterations (gap {gap:.3e} > tol {tol:.1e})")

    strategies = enumerate_strategies(behavior.scenario)
    support = np.flatnonzero(best > 0)
    argmin = NCBox(behavior.scenario, [strategies[k] for k in support], best[support] / best[support].sum())
    worst = int(obj.contexts[int(np.argmax(obj.terms(best)))])
    return RcResult(max(value, 0.0), argmin, worst, iterations, gap, converged)


@dataclass
class MonotonicityResult:
    lhs: float
    rhs: float
    ok: bool
    slack: float
    lhs_result: Optional[RcResult] = None
    rhs_result: Optional[RcResult] = None


def check_monotonicity(B: Box, W: Wiring, tol: Optional[float] = None,
                       max_iter: Optional[int] = None, seed: Optional[int] = None,
                       warm: bool = False) -> MonotonicityResult:
    """
    R_C(W(B)) <= R_C(B) + 2 tol, with W(B) solved from a cold start. With
    warm=True a second solve starts from W(B*), B* the minimiser found for
    B, and the smaller of the two values is kept.
    """
    tol = config.RC_TOL if tol is None else tol
    rhs = relative_entropy_of_contextuality(B, tol, max_iter, seed)
    wired = apply_wiring(W, B)
    lhs = relative_entropy_of_contextuality(wired, tol, max_iter, seed)
    if warm:
        start = compose_nc_triple(W.pre, rhs.argmin, W.post).merged()
        warmed = relative_entropy_of_contextuality(wired, tol, max_iter, seed, warm_start=start)
        log.debug(f"monotonicity lhs: cold {lhs.value:.9f}, warm {warmed.value:.9f}")
        if warmed.value < lhs.value:
            lhs = warmed
    slack = 2.0 * tol
    ok = lhs.value <= rhs.value + slack
    if not ok:
        log.error(f"❌ monotonicity violated: {lhs.value:.9f} > {rhs.value:.9f} + {slack:.1e}")
    return MonotonicityResult(lhs.value, rhs.value, ok, slack, lhs, rhs)
