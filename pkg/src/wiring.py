"""
Noncontextual wirings: an NC pre-box Y -> B, the middle box X -> A and an
NC post family Z -> C whose lights may only look at the buttons and
outputs they are associated with.

Naming: the pre-box scenario has buttons Y and lights B (one light per
button of the middle box); the post scenario has buttons Z (one per light
of the middle box) and lights C. The wired box lives on (I_Y, C).

A post component stores, per C-light j, the entries of its response table
that switch the light on. Keys are (z, b, y) where z is the pressed button
of Z_(j) (-1 when none), b is the pre output restricted to X_[j] and y is
the input restricted to Y_[j], both as bitsets.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src import config
from src.behavior import Behavior, Box, is_nondisturbing
from src.errors import (
    EnumerationCapError,
    IncompatibleAssociationError,
    NotNondisturbingError,
    PreconditionError,
    ScenarioMismatchError,
    SupportMismatchError,
    ValidationReport,
    WiringError,
)
from src.ncpolytope import DeterministicStrategy, NCBox, mix, random_nc_box
from src.scenario import Scenario, bits_of, mask_of, maximal_complementary, popcount, validate_scenario

log = logging.getLogger(__name__)

ResponseTable = Dict[Tuple[int, int, int], int]


@dataclass
class PostComponent:
    weight: float
    responses: List[ResponseTable]


@dataclass
class PostFamily:
    scenario_in: Scenario
    components: List[PostComponent] = field(default_factory=list)


class AssociationSets(NamedTuple):
    z: int
    x: int
    y: int


@dataclass
class Wiring:
    pre: NCBox
    post: PostFamily
    target: Scenario

    def output_scenario(self) -> Scenario:
        """(I_Y, O_C): edge(y) collects every C-light reachable from button y"""
        pre_s, post_s = self.pre.scenario, self.post.scenario_in
        edges = []
        for y in range(pre_s.num_buttons):
            lights = 0
            for x in bits_of(pre_s.light_edges[y]):
                for a in bits_of(self.target.light_edges[x]):
                    lights |= post_s.light_edges[a]
            edges.append(lights)
        return Scenario(pre_s.num_buttons, post_s.num_lights, pre_s.contexts, edges)


def _check_shapes(w: Wiring) -> None:
    if w.pre.scenario.num_lights != w.target.num_buttons:
        raise ScenarioMismatchError(
            f"pre-box has {w.pre.scenario.num_lights} lights, target has "
            f"{w.target.num_buttons} buttons")
    if w.post.scenario_in.num_buttons != w.target.num_lights:
        raise ScenarioMismatchError(
            f"post family has {w.post.scenario_in.num_buttons} buttons, target has "
            f"{w.target.num_lights} lights")


def _incompatible_pair(s: Scenario, members: int) -> Optional[Tuple[List[int], int]]:
    for j, c in enumerate(s.contexts):
        both = c & members
        if popcount(both) > 1:
            return bits_of(both), j
    return None


def association_sets(w: Wiring, j: int) -> AssociationSets:
    """Z_(j), X_[j] and Y_[j] for post light j, with the incompatibility checks"""
    _check_shapes(w)
    z = w.post.scenario_in.buttons_of_light(j)
    x = 0
    for a in bits_of(z):
        x |= w.target.buttons_of_light(a)
    y = 0
    for k in bits_of(x):
        y |= w.pre.scenario.buttons_of_light(k)
    clash = _incompatible_pair(w.target, x)
    if clash:
        raise IncompatibleAssociationError(j, 'X', clash[0], clash[1])
    clash = _incompatible_pair(w.pre.scenario, y)
    if clash:
        raise IncompatibleAssociationError(j, 'Y', clash[0], clash[1])
    return AssociationSets(z, x, y)


def _all_associations(w: Wiring) -> List[AssociationSets]:
    return [association_sets(w, j) for j in range(w.post.scenario_in.num_lights)]


def _post_output(component: PostComponent, assocs: Sequence[AssociationSets],
                 alpha: int, beta: int, y: int) -> int:
    c = 0
    for j, (table, assoc) in enumerate(zip(component.responses, assocs)):
        pressed = assoc.z & alpha
        if not pressed:
            continue
        if pressed & (pressed - 1):
            raise WiringError(f"post light {j}: two associated Z buttons pressed in {bits_of(alpha)}")
        z = pressed.bit_length() - 1
        if table.get((z, beta & assoc.x, y & assoc.y), 0):
            c |= 1 << j
    return c


def _pre_table(w: Wiring) -> Behavior:
    return mix(w.pre.scenario, w.pre.strategies, w.pre.weights).behavior


def validate_wiring(w: Wiring) -> ValidationReport:
    report = ValidationReport()
    try:
        w.pre.validate()
    except PreconditionError as e:
        report.add('pre', str(e))
        return report
    try:
        _check_shapes(w)
    except ScenarioMismatchError as e:
        report.add('shape', str(e))
        return report

    report.extend(validate_scenario(w.target), 'target')
    report.extend(validate_scenario(w.pre.scenario), 'pre.scenario')
    report.extend(validate_scenario(w.post.scenario_in), 'post.scenario')
    if not report.ok:
        return report
    out_s = w.output_scenario()
    report.extend(validate_scenario(out_s), 'output.scenario')

    post_s = w.post.scenario_in
    nc = post_s.num_lights
    weights = [c.weight for c in w.post.components]
    if not weights:
        report.add('post.components', "post family has no components")
        return report
    if any(x < 0 for x in weights) or abs(sum(weights) - 1.0) > config.EPS_NORM:
        report.add('post.weights', f"component weights {weights} are not a probability vector")

    assocs = []
    for j in range(nc):
        try:
            assocs.append(association_sets(w, j))
        except IncompatibleAssociationError as e:
            report.add('association', str(e), light=j, kind=e.kind, buttons=e.buttons)
    if len(assocs) != nc:
        return report

    for k, comp in enumerate(w.post.components):
        if len(comp.responses) != nc:
            report.add('post.responses', f"component {k} has {len(comp.responses)} tables, "
                       f"post scenario has {nc} lights", component=k)
            continue
        for j, table in enumerate(comp.responses):
            for (z, b, y), out in table.items():
                if out not in (0, 1):
                    report.add('post.output', f"component {k}, light {j}: output {out} is not 0/1",
                               component=k, light=j)
                if z == -1 and out:
                    report.add('post.idle-light',
                               f"component {k}: light {j} on with no pressed button",
                               component=k, light=j)
                elif z != -1 and not (assocs[j].z >> z) & 1:
                    report.add('post.association',
                               f"component {k}: light {j} keyed on Z button {z} outside Z_({j})",
                               component=k, light=j, z=z)
                if b & ~assocs[j].x or y & ~assocs[j].y:
                    report.add('post.restricted-dependence',
                               f"component {k}: light {j} reads inputs outside X_[{j}] / Y_[{j}]",
                               component=k, light=j)
    if not report.ok:
        return report

    # Interface: Ō_B inside the closure of I_X, Ō_A inside the closure of I_Z
    pre_s = w.pre.scenario
    literal_differs = set()
    reachable: List[List[int]] = []
    for jy, yc in enumerate(pre_s.contexts):
        betas = sorted({d.outcome(yc) for d, q in zip(w.pre.strategies, w.pre.weights) if q > 0})
        for beta in betas:
            if not w.target.in_closure(beta):
                report.add('interface.pre', f"pre output {bits_of(beta)} for Y context {jy} "
                           f"is outside the closure of I_X", context=jy, beta=bits_of(beta))
            elif w.target.context_index(beta) is None:
                literal_differs.add(beta)
        reachable.append(betas)
    for beta in sorted(literal_differs):
        report.warn(f"pre output {bits_of(beta)} is in the closure of I_X but not a stored context")
    for jx, xc in enumerate(w.target.contexts):
        for alpha in w.target.outcomes(xc):
            if not post_s.in_closure(alpha):
                report.add('interface.post', f"middle output {bits_of(alpha)} is not a Z context",
                           alpha=bits_of(alpha))
    if not report.ok:
        return report

    for jy, yc in enumerate(pre_s.contexts):
        for beta in reachable[jy]:
            for alpha in w.target.outcomes(beta):
                for k, comp in enumerate(w.post.components):
                    try:
                        c = _post_output(comp, assocs, alpha, beta, yc)
                    except WiringError as e:
                        report.add('post.consistency', str(e), component=k)
                        continue
                    for a in bits_of(alpha):
                        lit = popcount(c & post_s.light_edges[a])
                        if lit != 1:
                            report.add('post.consistency',
                                       f"component {k}: Z button {a} lights {lit} lights "
                                       f"(y={bits_of(yc)}, b={bits_of(beta)}, a={bits_of(alpha)})",
                                       component=k, z=a, context=jy)
    return report


def apply_wiring(w: Wiring, B: Box, check: bool = True, eps_nd: Optional[float] = None) -> Box:
    """p(c|y) = sum over b, a, phi of p_post(c|a; b, y, phi) p_B(a|b) p_pre(b|y)"""
    if B.scenario != w.target:
        raise ScenarioMismatchError("box scenario does not match the wiring target")
    if check:
        report = validate_wiring(w)
        if not report.ok:
            raise WiringError(f"invalid wiring: {report.violations[0].message}")
    assocs = _all_associations(w)
    out_s = w.output_scenario()
    pre = _pre_table(w)
    mid = B.behavior
    nd_checked = False

    table = []
    for jy, yc in enumerate(out_s.contexts):
        acc: Dict[int, float] = {}
        for beta in sorted(pre.table[jy]):
            p_beta = pre.table[jy][beta]
            if p_beta == 0.0:
                continue
            if not w.target.in_closure(beta):
                raise SupportMismatchError(
                    f"pre output {bits_of(beta)} has no entry in the middle box")
            if w.target.context_index(beta) is None and not nd_checked:
                nd = is_nondisturbing(mid, eps_nd)
                if not nd.ok:
                    raise NotNondisturbingError(nd)
                nd_checked = True
            dist = mid.distribution(beta)
            for alpha in sorted(dist):
                p_alpha = dist[alpha]
                if p_alpha == 0.0:
                    continue
                for comp in w.post.components:
                    if comp.weight == 0.0:
                        continue
                    c = _post_output(comp, assocs, alpha, beta, yc)
                    acc[c] = acc.get(c, 0.0) + comp.weight * p_alpha * p_beta
        table.append(acc)
    return Box(out_s, Behavior(out_s, table))


def compose_nc_triple(pre: NCBox, mid: NCBox, post: PostFamily,
                      cap: Optional[int] = None) -> NCBox:
    """
    The wired box as an explicit mixture over (pre strategy, middle strategy,
    post component). Button y presses x = pre[y], which lights a = mid[x],
    which turns on the unique C-light whose table fires on (a, x, y).
    """
    cap = config.ENUM_CAP if cap is None else cap
    w = Wiring(pre, post, mid.scenario)
    _check_shapes(w)
    size = len(pre.strategies) * len(mid.strategies) * len(post.components)
    if size > cap:
        raise EnumerationCapError('composed hidden variables', size, cap)
    assocs = _all_associations(w)
    out_s = w.output_scenario()
    post_s = post.scenario_in
    ny = pre.scenario.num_buttons

    fired: Dict[Tuple[int, int, int, int], int] = {}

    def light_for(k: int, y: int, x: int, a: int) -> int:
        key = (k, y, x, a)
        if key not in fired:
            hits = []
            for j in bits_of(post_s.light_edges[a]):
                assoc = assocs[j]
                table = post.components[k].responses[j]
                if table.get((a, (1 << x) & assoc.x, (1 << y) & assoc.y), 0):
                    hits.append(j)
            if len(hits) != 1:
                raise WiringError(f"component {k}: Z button {a} lights {hits} for x={x}, y={y}")
            fired[key] = hits[0]
        return fired[key]

    acc: Dict[DeterministicStrategy, float] = {}
    for gamma, wg in zip(pre.strategies, pre.weights):
        if wg == 0.0:
            continue
        for lam, wl in zip(mid.strategies, mid.weights):
            if wl == 0.0:
                continue
            for k, comp in enumerate(post.components):
                if comp.weight == 0.0:
                    continue
                choice = []
                for y in range(ny):
                    x = gamma.choice[y]
                    a = lam.choice[x]
                    choice.append(light_for(k, y, x, a))
                d = DeterministicStrategy(tuple(choice))
                acc[d] = acc.get(d, 0.0) + float(wg) * float(wl) * comp.weight
    strategies = list(acc)
    return NCBox(out_s, strategies, np.array([acc[d] for d in strategies]))


# --- builders -------------------------------------------------------------

def post_scenario(target: Scenario, c_edges: Sequence[int], num_c: int) -> Scenario:
    """Z scenario: one button per target light, contexts = maximal members of Ō_A"""
    if len(c_edges) != target.num_lights:
        raise PreconditionError(f"need {target.num_lights} C edges, got {len(c_edges)}")
    contexts = maximal_complementary(target.light_edges, target.num_lights)
    return Scenario(target.num_lights, num_c, contexts, c_edges)


def identity_pre(target: Scenario) -> NCBox:
    """Y = X, each button presses itself"""
    s = Scenario(target.num_buttons, target.num_buttons, target.contexts,
                 [1 << x for x in range(target.num_buttons)])
    return NCBox(s, [DeterministicStrategy(tuple(range(target.num_buttons)))], np.array([1.0]))


def deterministic_component(target: Scenario, pre_s: Scenario, post_s: Scenario,
                            pick: Callable[[int, int, int], int], weight: float = 1.0) -> PostComponent:
    """Component in which Z button a fed by (x, y) lights pick(a, x, y)"""
    responses: List[ResponseTable] = [dict() for _ in range(post_s.num_lights)]
    for a in range(target.num_lights):
        for x in bits_of(target.buttons_of_light(a)):
            for y in bits_of(pre_s.buttons_of_light(x)):
                j = pick(a, x, y)
                if not (post_s.light_edges[a] >> j) & 1:
                    raise PreconditionError(f"light {j} is not in C_({a})")
                responses[j][(a, 1 << x, 1 << y)] = 1
    return PostComponent(weight, responses)


def identity_wiring(target: Scenario) -> Wiring:
    pre = identity_pre(target)
    post_s = post_scenario(target, [1 << a for a in range(target.num_lights)], target.num_lights)
    comp = deterministic_component(target, pre.scenario, post_s, lambda a, x, y: a)
    return Wiring(pre, PostFamily(post_s, [comp]), target)


def _selections_in_closure(target: Scenario, edges: Sequence[int]) -> bool:
    """Every choice of one B-light per button presses a member of closure(I_X)"""
    chosen = [0]
    for e in edges:
        chosen = [c | (1 << x) for c in chosen for x in bits_of(e)]
    return all(target.in_closure(c) for c in chosen)


def _grow_contexts(target: Scenario, b_edges: Sequence[int], rng: np.random.Generator) -> List[int]:
    ny = len(b_edges)
    found: List[int] = []
    for seed in range(ny):
        members = [seed]
        used = b_edges[seed]
        for y in rng.permutation(ny):
            y = int(y)
            if y in members or b_edges[y] & used:
                continue
            trial = members + [y]
            if _selections_in_closure(target, [b_edges[t] for t in trial]):
                members = trial
                used |= b_edges[y]
        ctx = mask_of(members)
        if ctx not in found:
            found.append(ctx)
    return [c for c in found if not any(o != c and (c & ~o) == 0 for o in found)]


def random_wiring(target: Scenario, rng: np.random.Generator,
                  max_strategies: int = 4096, max_extra: int = 2,
                  max_components: int = 3, max_attempts: int = 50) -> Wiring:
    """
    Seeded random valid wiring into `target`. The pre scenario has one
    identity button per middle button plus up to `max_extra` buttons with
    two-light B edges; the post family gives every middle button a group of
    one or two C-lights and picks, per (z, x, y) cell, a random light of
    C_(z). Retries with smaller groups until the wired scenario has at most
    `max_strategies` deterministic strategies.
    """
    nx = target.num_buttons
    two_prob = 0.5
    for attempt in range(max_attempts):
        b_edges = [1 << x for x in range(nx)]
        n_extra = int(rng.integers(0, max_extra + 1)) if nx >= 2 else 0
        extras = set()
        for _ in range(n_extra):
            pair = tuple(sorted(int(v) for v in rng.choice(nx, size=2, replace=False)))
            extras.add(pair)
        for pair in sorted(extras):
            b_edges.append(mask_of(pair))

        group_sizes = [2 if rng.random() < two_prob else 1 for _ in range(nx)]
        offsets = np.concatenate([[0], np.cumsum(group_sizes)]).astype(int)
        groups = [mask_of(range(int(offsets[x]), int(offsets[x + 1]))) for x in range(nx)]
        count = 1
        for e in b_edges:
            lights = 0
            for x in bits_of(e):
                lights |= groups[x]
            count *= popcount(lights)
        if count <= max_strategies:
            break
        two_prob *= 0.7
        log.trace(f"random wiring attempt {attempt}: {count} strategies > {max_strategies}")
    else:
        b_edges = [1 << x for x in range(nx)]
        groups = [1 << x for x in range(nx)]
        offsets = np.arange(nx + 1)

    contexts = _grow_contexts(target, b_edges, rng)
    pre_s = Scenario(len(b_edges), nx, contexts, b_edges)
    pre = random_nc_box(pre_s, rng, max_support=4)

    num_c = int(offsets[-1])
    c_edges = []
    for a in range(target.num_lights):
        lights = 0
        for x in bits_of(target.buttons_of_light(a)):
            lights |= groups[x]
        c_edges.append(lights)
    post_s = post_scenario(target, c_edges, num_c)

    n_comp = int(rng.integers(1, max_components + 1))
    comp_weights = rng.dirichlet(np.ones(n_comp))
    components = []
    for k in range(n_comp):
        picks: Dict[Tuple[int, int, int], int] = {}
        for a in range(target.num_lights):
            options = bits_of(c_edges[a])
            for x in bits_of(target.buttons_of_light(a)):
                for y in bits_of(pre_s.buttons_of_light(x)):
                    picks[(a, x, y)] = int(options[int(rng.integers(len(options)))])
        components.append(deterministic_component(
            target, pre_s, post_s, lambda a, x, y: picks[(a, x, y)], float(comp_weights[k])))
    return Wiring(pre, PostFamily(post_s, components), target)
