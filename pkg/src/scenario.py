"""
Measurement scenarios: buttons, lights, contexts and exclusivity edges.

Button and light subsets are Python ints used as bitsets (bit i set means
index i is a member), so they have no width limit. Indices are 0-based.
"""

import itertools
import logging
import threading
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from src import config
from src.errors import EnumerationCapError, PreconditionError, ValidationReport

log = logging.getLogger(__name__)


def bits_of(mask: int) -> List[int]:
    """Indices of the set bits, ascending"""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def mask_of(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def popcount(mask: int) -> int:
    return bin(mask).count('1')


def mask_to_bitstring(mask: int, length: int) -> str:
    """Little-endian ASCII rendering: character i is bit i"""
    return ''.join('1' if (mask >> i) & 1 else '0' for i in range(length))


def bitstring_to_mask(text: str) -> int:
    if any(ch not in '01' for ch in text):
        raise PreconditionError(f"not a bitstring: {text!r}")
    return sum(1 << i for i, ch in enumerate(text) if ch == '1')


class ContextString(NamedTuple):
    """A set of pressed buttons together with the number of buttons"""
    bits: int
    length: int

    @classmethod
    def from_indices(cls, indices: Iterable[int], length: int) -> 'ContextString':
        indices = list(indices)
        if any(i < 0 or i >= length for i in indices):
            raise PreconditionError(f"button index out of range 0..{length - 1}: {indices}")
        return cls(mask_of(indices), length)

    @classmethod
    def from_bitstring(cls, text: str) -> 'ContextString':
        return cls(bitstring_to_mask(text), len(text))

    def indices(self) -> List[int]:
        return bits_of(self.bits)

    def weight(self) -> int:
        return popcount(self.bits)

    def __str__(self) -> str:
        return mask_to_bitstring(self.bits, self.length)


def dominates(x: ContextString, x_sub: ContextString) -> bool:
    """x ⪰ x_sub: every button unpressed in x is unpressed in x_sub"""
    if x.length != x_sub.length:
        raise PreconditionError(f"context lengths differ: {x.length} vs {x_sub.length}")
    return (x_sub.bits & ~x.bits) == 0


def _dominates_mask(x: int, x_sub: int) -> bool:
    return (x_sub & ~x) == 0


class Scenario:
    """
    A scenario (I_X, O_A). `contexts` are button bitsets, `light_edges[i]` is
    the light bitset A_(i) of button i. Instances are immutable; derived
    structure is memoized behind a lock so they can be shared across threads.
    """

    def __init__(self, num_buttons: int, num_lights: int,
                 contexts: Sequence[int], light_edges: Sequence[int]):
        self.num_buttons = int(num_buttons)
        self.num_lights = int(num_lights)
        self.contexts: Tuple[int, ...] = tuple(int(c) for c in contexts)
        self.light_edges: Tuple[int, ...] = tuple(int(e) for e in light_edges)
        self._lock = threading.Lock()
        self._memo: Dict[object, object] = {}

    @classmethod
    def from_lists(cls, num_buttons: int, num_lights: int,
                   contexts: Sequence[Sequence[int]],
                   light_edges: Sequence[Sequence[int]]) -> 'Scenario':
        return cls(num_buttons, num_lights,
                   [mask_of(c) for c in contexts],
                   [mask_of(e) for e in light_edges])

    def _key(self):
        return (self.num_buttons, self.num_lights, self.contexts, self.light_edges)

    def __eq__(self, other) -> bool:
        return isinstance(other, Scenario) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        ctx = [bits_of(c) for c in self.contexts]
        return f"Scenario(b={self.num_buttons}, l={self.num_lights}, contexts={ctx})"

    def cached(self, key, factory: Callable[[], object]):
        """Memoize a derived value; factory runs outside the lock"""
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        value = factory()
        with self._lock:
            return self._memo.setdefault(key, value)

    # --- associations -------------------------------------------------

    def context(self, j: int) -> ContextString:
        return ContextString(self.contexts[j], self.num_buttons)

    def lights_of_context(self, x) -> int:
        """A_(x): union of the light edges of the pressed buttons"""
        bits = x.bits if isinstance(x, ContextString) else int(x)
        if bits >> self.num_buttons:
            raise PreconditionError(f"context {bits:b} has buttons beyond {self.num_buttons}")
        lights = 0
        for i in bits_of(bits):
            lights |= self.light_edges[i]
        return lights

    def buttons_of_light(self, k: int) -> int:
        """X_(k): buttons whose edge contains light k"""
        if k < 0 or k >= self.num_lights:
            raise PreconditionError(f"light {k} out of range 0..{self.num_lights - 1}")
        return mask_of(i for i, e in enumerate(self.light_edges) if (e >> k) & 1)

    # --- derived structure -------------------------------------------

    def maximal_context_indices(self) -> List[int]:
        def build():
            out = []
            for j, c in enumerate(self.contexts):
                if not any(c2 != c and _dominates_mask(c2, c) for c2 in self.contexts):
                    out.append(j)
            return out
        return self.cached('maximal', build)

    def closure(self) -> frozenset:
        """Downward closure of I_X (nonempty members only)"""
        def build():
            members = set()
            for c in self.contexts:
                pressed = bits_of(c)
                for r in range(1, len(pressed) + 1):
                    for sub in itertools.combinations(pressed, r):
                        members.add(mask_of(sub))
            return frozenset(members)
        return self.cached('closure', build)

    def in_closure(self, x: int) -> bool:
        return x in self.closure()

    def context_index(self, x: int) -> Optional[int]:
        try:
            return self.contexts.index(x)
        except ValueError:
            return None

    def dominating_context(self, x: int) -> Optional[int]:
        """First stored context that dominates x"""
        for j, c in enumerate(self.contexts):
            if _dominates_mask(c, x):
                return j
        return None

    def outcomes(self, x: int) -> List[int]:
        """
        Allowed outcomes for pressed buttons x: one light per pressed button,
        enumerated in (button, light) lexicographic order. Buttons of a valid
        context never share lights, so the product has no collisions.
        """
        def build():
            choices = [bits_of(self.light_edges[i]) for i in bits_of(x)]
            return [mask_of(combo) for combo in itertools.product(*choices)]
        return self.cached(('outcomes', x), build)

    def num_strategies(self) -> int:
        n = 1
        for e in self.light_edges:
            n *= popcount(e)
        return n


def validate_scenario(s: Scenario) -> ValidationReport:
    report = ValidationReport()
    b, l = s.num_buttons, s.num_lights
    if b <= 0:
        report.add('buttons', f"num_buttons must be positive, got {b}")
    if l <= 0:
        report.add('lights', f"num_lights must be positive, got {l}")
    if len(s.light_edges) != b:
        report.add('light_edges.length', f"expected {b} light edges, got {len(s.light_edges)}")
    if report.violations:
        return report

    covered_buttons = 0
    seen = {}
    for j, c in enumerate(s.contexts):
        if c == 0:
            report.add('context.empty', f"context {j} is empty", context=j)
        if c >> b:
            report.add('context.range', f"context {j} has buttons beyond {b - 1}", context=j)
        if c in seen:
            report.add('context.duplicate', f"context {j} duplicates context {seen[c]}",
                       context=j, first=seen[c])
        else:
            seen[c] = j
        covered_buttons |= c
    for i in range(b):
        if not (covered_buttons >> i) & 1:
            report.add('button.uncovered', f"button {i} is in no context", button=i)

    covered_lights = 0
    for i, e in enumerate(s.light_edges):
        if e == 0:
            report.add('light_edge.empty', f"button {i} has no lights", button=i)
        if e >> l:
            report.add('light_edge.range', f"button {i} has lights beyond {l - 1}", button=i)
        covered_lights |= e
    for k in range(l):
        if not (covered_lights >> k) & 1:
            report.add('light.uncovered', f"light {k} belongs to no button", light=k)

    for i in range(b):
        for i2 in range(i + 1, b):
            shared = s.light_edges[i] & s.light_edges[i2]
            if not shared:
                continue
            pair = (1 << i) | (1 << i2)
            for j, c in enumerate(s.contexts):
                if c & pair == pair:
                    report.add('shared-light rule',
                               f"buttons {i} and {i2} share lights {bits_of(shared)} "
                               f"but appear together in context {j}",
                               buttons=[i, i2], lights=bits_of(shared), context=j)
    return report


def maximal_contexts(s: Scenario) -> List[ContextString]:
    return [s.context(j) for j in s.maximal_context_indices()]


def lights_of_context(s: Scenario, x: ContextString) -> int:
    return s.lights_of_context(x)


def buttons_of_light(s: Scenario, k: int) -> int:
    return s.buttons_of_light(k)


def complementary_hypergraph(edges: Sequence[int], num_lights: int,
                             cap: Optional[int] = None) -> frozenset:
    """
    Ō: every light string with at most one lit light per edge. Enumerated by
    extending strings light by light and pruning as soon as an edge holds two.
    """
    cap = config.ENUM_CAP if cap is None else cap
    edges = [int(e) for e in edges]
    for e in edges:
        if e >> num_lights:
            raise PreconditionError(f"edge {bits_of(e)} has lights beyond {num_lights - 1}")

    found = [0]
    for k in range(num_lights):
        touching = [e for e in edges if (e >> k) & 1]
        extended = []
        for a in found:
            extended.append(a)
            lit = a | (1 << k)
            if all(popcount(lit & e) <= 1 for e in touching):
                extended.append(lit)
        if len(extended) > cap:
            log.warning(f"⚠️ complementary hypergraph on {num_lights} lights exceeds cap {cap}")
            raise EnumerationCapError('complementary hypergraph', len(extended), cap)
        found = extended
    return frozenset(found)


def maximal_complementary(edges: Sequence[int], num_lights: int,
                          cap: Optional[int] = None) -> List[int]:
    """Maximal members of Ō, ascending"""
    members = complementary_hypergraph(edges, num_lights, cap)
    out = []
    for a in sorted(members):
        if all(((a >> k) & 1) or (a | (1 << k)) not in members for k in range(num_lights)):
            out.append(a)
    return out
