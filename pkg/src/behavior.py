"""
Behaviors p(a|x) over the stored contexts of a scenario, and the Box pairing.

Tables are sparse: one dict per stored context mapping a light bitset to its
probability. Marginals on sub-contexts are computed, never stored.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src import config
from src.errors import PreconditionError, ScenarioMismatchError, ValidationReport
from src.scenario import ContextString, Scenario, bits_of

log = logging.getLogger(__name__)


def _bits(x) -> int:
    return x.bits if isinstance(x, ContextString) else int(x)


def outcome_layout(s: Scenario, context_indices: Sequence[int]) -> Tuple[List[Tuple[int, List[int], int]], int]:
    """
    Dense layout over the given stored contexts: a list of
    (context index, allowed outcomes, offset) plus the total length.
    """
    key = ('layout', tuple(context_indices))

    def build():
        rows = []
        offset = 0
        for j in context_indices:
            outs = s.outcomes(s.contexts[j])
            rows.append((j, outs, offset))
            offset += len(outs)
        return rows, offset
    return s.cached(key, build)


class Behavior:
    def __init__(self, scenario: Scenario, table: Sequence[Dict[int, float]]):
        if len(table) != len(scenario.contexts):
            raise PreconditionError(
                f"table has {len(table)} contexts, scenario has {len(scenario.contexts)}")
        self.scenario = scenario
        self.table: Tuple[Dict[int, float], ...] = tuple(
            {int(a): float(p) for a, p in t.items()} for t in table)

    def __repr__(self) -> str:
        return f"Behavior({self.scenario!r})"

    def distribution(self, x) -> Dict[int, float]:
        """p(·|x) for a stored context or any member of the closure"""
        bits = _bits(x)
        j = self.scenario.context_index(bits)
        if j is not None:
            return dict(self.table[j])
        dom = self.scenario.dominating_context(bits)
        if dom is None:
            raise PreconditionError(f"context {bits_of(bits)} is outside the closure of I_X")
        return _marginal(self.table[dom], self.scenario.lights_of_context(bits))

    def vector(self, context_indices: Optional[Sequence[int]] = None) -> np.ndarray:
        if context_indices is None:
            context_indices = self.scenario.maximal_context_indices()
        rows, size = outcome_layout(self.scenario, context_indices)
        vec = np.zeros(size)
        for j, outs, offset in rows:
            t = self.table[j]
            for k, a in enumerate(outs):
                vec[offset + k] = t.get(a, 0.0)
        return vec

    @classmethod
    def from_vector(cls, scenario: Scenario, vec: np.ndarray,
                    context_indices: Optional[Sequence[int]] = None) -> 'Behavior':
        """
        Inverse of vector(). Stored contexts not covered by context_indices
        are filled by marginalizing a dominating covered context.
        """
        if context_indices is None:
            context_indices = scenario.maximal_context_indices()
        rows, size = outcome_layout(scenario, context_indices)
        if len(vec) != size:
            raise PreconditionError(f"vector length {len(vec)} does not match layout size {size}")
        table: List[Optional[Dict[int, float]]] = [None] * len(scenario.contexts)
        for j, outs, offset in rows:
            table[j] = {a: float(vec[offset + k]) for k, a in enumerate(outs) if vec[offset + k] != 0.0}
        for j, t in enumerate(table):
            if t is not None:
                continue
            c = scenario.contexts[j]
            src_j = next((jj for jj in context_indices
                          if (c & ~scenario.contexts[jj]) == 0), None)
            if src_j is None:
                raise PreconditionError(f"context {j} is not dominated by any covered context")
            table[j] = _marginal(table[src_j], scenario.lights_of_context(c))
        return cls(scenario, table)


def _marginal(dist: Dict[int, float], keep_lights: int) -> Dict[int, float]:
    out: Dict[int, float] = {}
    for a in sorted(dist):
        sub = a & keep_lights
        out[sub] = out.get(sub, 0.0) + dist[a]
    return out


@dataclass(frozen=True)
class Box:
    scenario: Scenario
    behavior: Behavior

    def __post_init__(self):
        if self.behavior.scenario != self.scenario:
            raise ScenarioMismatchError("behavior belongs to a different scenario")

    @classmethod
    def of(cls, behavior: Behavior) -> 'Box':
        return cls(behavior.scenario, behavior)


def _as_behavior(b) -> Behavior:
    return b.behavior if isinstance(b, Box) else b


def validate_behavior(B, eps_norm: Optional[float] = None) -> ValidationReport:
    B = _as_behavior(B)
    eps_norm = config.EPS_NORM if eps_norm is None else eps_norm
    s = B.scenario
    report = ValidationReport()
    for j, c in enumerate(s.contexts):
        allowed = set(s.outcomes(c))
        total = 0.0
        for a in sorted(B.table[j]):
            p = B.table[j][a]
            if not np.isfinite(p) or p < 0.0:
                report.add('nonnegativity', f"context {j}: p = {p} for outcome {bits_of(a)}",
                           context=j, outcome=bits_of(a))
                continue
            total += p
            if p > 0.0 and a not in allowed:
                report.add('support', f"context {j}: outcome {bits_of(a)} has p = {p} "
                           f"but does not light exactly one light per pressed button",
                           context=j, outcome=bits_of(a))
        if abs(total - 1.0) > eps_norm:
            report.add('normalization', f"context {j} sums to {total!r}",
                       context=j, total=total)
    return report


def marginalize(B, x, x_sub) -> Dict[int, float]:
    """
    Sum p(a|x) over the lights not associated with x_sub. Keys of the
    result are light bitsets inside A_(x_sub).
    """
    B = _as_behavior(B)
    s = B.scenario
    xb, sb = _bits(x), _bits(x_sub)
    if isinstance(x, ContextString) and isinstance(x_sub, ContextString) and x.length != x_sub.length:
        raise PreconditionError(f"context lengths differ: {x.length} vs {x_sub.length}")
    if sb & ~xb:
        raise PreconditionError(f"{bits_of(xb)} does not dominate {bits_of(sb)}")
    if not s.in_closure(xb):
        raise PreconditionError(f"context {bits_of(xb)} is outside the closure of I_X")
    return _marginal(B.distribution(xb), s.lights_of_context(sb))


@dataclass
class NDReport:
    ok: bool
    worst_deviation: float
    witness: Optional[Dict[str, object]] = None
    witness_class: Optional[str] = None
    pairs_checked: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            'ok': self.ok,
            'worst_deviation': self.worst_deviation,
            'witness': self.witness,
            'witness_class': self.witness_class,
            'pairs_checked': self.pairs_checked,
        }


def is_nondisturbing(B, eps: Optional[float] = None) -> NDReport:
    """
    Compare marginals on the common buttons of every pair of stored contexts.
    Any closure member dominated by two contexts lies inside their
    intersection, so agreement there covers the whole closure.
    """
    B = _as_behavior(B)
    eps = config.EPS_ND if eps is None else eps
    s = B.scenario
    worst = 0.0
    witness = None
    witness_class = None
    pairs = 0
    for j in range(len(s.contexts)):
        for k in range(j + 1, len(s.contexts)):
            common = s.contexts[j] & s.contexts[k]
            if not common:
                continue
            pairs += 1
            lights = s.lights_of_context(common)
            mj = _marginal(B.table[j], lights)
            mk = _marginal(B.table[k], lights)
            for a in sorted(set(mj) | set(mk)):
                dev = abs(mj.get(a, 0.0) - mk.get(a, 0.0))
                if dev > worst:
                    worst = dev
                    witness = {
                        'contexts': [j, k],
                        'x': bits_of(s.contexts[j]),
                        'x_other': bits_of(s.contexts[k]),
                        'x_sub': bits_of(common),
                        'outcome': bits_of(a),
                        'p': mj.get(a, 0.0),
                        'p_other': mk.get(a, 0.0),
                    }
                    witness_class = 'stored' if s.context_index(common) is not None else 'closure'
    ok = worst <= eps
    if not ok:
        log.debug(f"disturbance {worst:.3e} at {witness} ({witness_class})")
    return NDReport(ok, worst, witness if not ok else None,
                    witness_class if not ok else None, pairs)


def behaviors_close(B1, B2, eps: float) -> bool:
    B1, B2 = _as_behavior(B1), _as_behavior(B2)
    if B1.scenario != B2.scenario:
        raise ScenarioMismatchError("behaviors live on different scenarios")
    return max_abs_difference(B1, B2) <= eps


def max_abs_difference(B1, B2) -> float:
    B1, B2 = _as_behavior(B1), _as_behavior(B2)
    if B1.scenario != B2.scenario:
        raise ScenarioMismatchError("behaviors live on different scenarios")
    worst = 0.0
    for t1, t2 in zip(B1.table, B2.table):
        for a in set(t1) | set(t2):
            worst = max(worst, abs(t1.get(a, 0.0) - t2.get(a, 0.0)))
    return worst
