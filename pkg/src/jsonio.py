"""
JSON codecs for scenarios, behaviors, NC boxes, certificates and wirings.

Floats are written with 17 significant digits so values survive a round
trip bit for bit; +inf is written as the string "inf". Parse errors raise
SchemaError carrying the JSON path of the offending node.
"""

import json
import math
import os
from typing import Any, Dict, List, Optional

import numpy as np

from src.behavior import Behavior, Box
from src.errors import SchemaError
from src.ncpolytope import DeterministicStrategy, NCBox, NCCertificate
from src.scenario import Scenario, bits_of, bitstring_to_mask, mask_of, mask_to_bitstring
from src.wiring import PostComponent, PostFamily, Wiring

_FLOAT_TOKEN = '@@ctxkit-float-{}@@'


def format_float(x: float) -> Any:
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    if math.isnan(x):
        return 'nan'
    return format(x, '.17g')


def _prepare(obj, floats: List[str]):
    if isinstance(obj, dict):
        return {str(k): _prepare(v, floats) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v, floats) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_prepare(v, floats) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        text = format_float(float(obj))
        if text in ('inf', '-inf', 'nan'):
            return text
        floats.append(text)
        return _FLOAT_TOKEN.format(len(floats) - 1)
    return obj


def dumps(obj) -> str:
    floats: List[str] = []
    text = json.dumps(_prepare(obj, floats), indent=2)
    for k, f in enumerate(floats):
        text = text.replace(f'"{_FLOAT_TOKEN.format(k)}"', f, 1)
    return text


def write_json(obj, path: Optional[str]) -> str:
    text = dumps(obj)
    if path:
        with open(path, 'w') as fh:
            fh.write(text + '\n')
    return text


def load_json(path: str) -> Dict[str, Any]:
    with open(path) as fh:
        raw = fh.read()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise SchemaError('$', f"malformed JSON in {path}: {e.msg} at line {e.lineno}")


def detect_kind(doc: Dict[str, Any]) -> str:
    if not isinstance(doc, dict):
        raise SchemaError('$', "top level must be an object")
    if 'pre' in doc and 'post' in doc:
        return 'wiring'
    if 'strategies' in doc:
        return 'ncbox'
    if 'table' in doc:
        return 'behavior'
    if 'buttons' in doc:
        return 'scenario'
    raise SchemaError('$', "cannot tell scenario, behavior, NC box or wiring apart")


# --- helpers ---------------------------------------------------------------

def _get(doc, key: str, path: str, kind=None):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing")
    value = doc[key]
    wrong_type = kind is not None and not isinstance(value, kind)
    if wrong_type or (isinstance(value, bool) and kind in (int, float)):
        raise SchemaError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def _int_list(values, path: str, upper: int) -> List[int]:
    if not isinstance(values, list):
        raise SchemaError(path, "expected a list of indices")
    out = []
    for k, v in enumerate(values):
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaError(f"{path}[{k}]", "expected an integer index")
        if v < 0 or v >= upper:
            raise SchemaError(f"{path}[{k}]", f"index {v} out of range 0..{upper - 1}")
        out.append(v)
    if len(set(out)) != len(out):
        raise SchemaError(path, "duplicate index")
    return out


def _number(value, path: str) -> float:
    if value == 'inf':
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "expected a number")
    return float(value)


def _bits(text, path: str, length: int) -> int:
    if not isinstance(text, str) or len(text) != length or any(ch not in '01' for ch in text):
        raise SchemaError(path, f"expected a length-{length} string of 0/1")
    return bitstring_to_mask(text)


# --- scenario --------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    return {
        'buttons': s.num_buttons,
        'lights': s.num_lights,
        'contexts': [bits_of(c) for c in s.contexts],
        'light_edges': [bits_of(e) for e in s.light_edges],
    }


def scenario_from_dict(doc, path: str = '$', base_dir: str = '.') -> Scenario:
    if isinstance(doc, str):
        ref = doc if os.path.isabs(doc) else os.path.join(base_dir, doc)
        try:
            doc = load_json(ref)
        except OSError as e:
            raise SchemaError(path, f"cannot read scenario file {ref}: {e.strerror}")
        path = f"{path}<{ref}>"
    b = _get(doc, 'buttons', path, int)
    l = _get(doc, 'lights', path, int)
    if b <= 0 or l <= 0:
        raise SchemaError(path, "buttons and lights must be positive")
    contexts = _get(doc, 'contexts', path, list)
    edges = _get(doc, 'light_edges', path, list)
    if len(edges) != b:
        raise SchemaError(f"{path}.light_edges", f"expected exactly {b} entries")
    ctx_masks = []
    for j, c in enumerate(contexts):
        mask = mask_of(_int_list(c, f"{path}.contexts[{j}]", b))
        if mask in ctx_masks:
            raise SchemaError(f"{path}.contexts[{j}]", "duplicate context")
        ctx_masks.append(mask)
    edge_masks = [mask_of(_int_list(e, f"{path}.light_edges[{i}]", l)) for i, e in enumerate(edges)]
    return Scenario(b, l, ctx_masks, edge_masks)


# --- behavior --------------------------------------------------------------

def behavior_to_dict(B, scenario_ref=None) -> Dict[str, Any]:
    behavior = B.behavior if isinstance(B, Box) else B
    s = behavior.scenario
    table = []
    for j, t in enumerate(behavior.table):
        outcomes = [{'on': bits_of(a), 'p': t[a]} for a in sorted(t, key=lambda a: bits_of(a))]
        table.append({'context': j, 'outcomes': outcomes})
    return {
        'scenario': scenario_ref if scenario_ref is not None else scenario_to_dict(s),
        'table': table,
    }


def behavior_from_dict(doc, path: str = '$', base_dir: str = '.') -> Box:
    s = scenario_from_dict(_get(doc, 'scenario', path), f"{path}.scenario", base_dir)
    entries = _get(doc, 'table', path, list)
    table: List[Dict[int, float]] = [dict() for _ in s.contexts]
    seen = set()
    for k, entry in enumerate(entries):
        epath = f"{path}.table[{k}]"
        j = _get(entry, 'context', epath, int)
        if j < 0 or j >= len(s.contexts):
            raise SchemaError(f"{epath}.context", f"context {j} out of range")
        if j in seen:
            raise SchemaError(f"{epath}.context", f"context {j} listed twice")
        seen.add(j)
        for m, out in enumerate(_get(entry, 'outcomes', epath, list)):
            opath = f"{epath}.outcomes[{m}]"
            a = mask_of(_int_list(_get(out, 'on', opath, list), f"{opath}.on", s.num_lights))
            if a in table[j]:
                raise SchemaError(opath, "outcome listed twice")
            table[j][a] = _number(_get(out, 'p', opath), f"{opath}.p")
    return Box(s, Behavior(s, table))


# --- NC boxes and certificates -------------------------------------------

def ncbox_to_dict(ncbox: NCBox) -> Dict[str, Any]:
    return {
        'scenario': scenario_to_dict(ncbox.scenario),
        'strategies': [list(d.choice) for d in ncbox.strategies],
        'weights': [float(w) for w in ncbox.weights],
    }


def ncbox_from_dict(doc, path: str = '$', base_dir: str = '.') -> NCBox:
    s = scenario_from_dict(_get(doc, 'scenario', path), f"{path}.scenario", base_dir)
    strategies = []
    for k, choice in enumerate(_get(doc, 'strategies', path, list)):
        spath = f"{path}.strategies[{k}]"
        if not isinstance(choice, list) or len(choice) != s.num_buttons:
            raise SchemaError(spath, f"expected {s.num_buttons} light indices")
        for i, light in enumerate(choice):
            if isinstance(light, bool) or not isinstance(light, int) or light < 0 \
                    or not (s.light_edges[i] >> light) & 1:
                raise SchemaError(f"{spath}[{i}]", f"light {light} is not in A_({i})")
        strategies.append(DeterministicStrategy(tuple(choice)))
    weights = [_number(w, f"{path}.weights[{k}]") for k, w in enumerate(_get(doc, 'weights', path, list))]
    if len(weights) != len(strategies):
        raise SchemaError(f"{path}.weights", "length differs from strategies")
    return NCBox(s, strategies, np.array(weights))


def certificate_to_dict(cert: Optional[NCCertificate]) -> Optional[Dict[str, Any]]:
    if cert is None:
        return None
    if cert.kind == 'weights':
        support = [k for k, w in enumerate(cert.weights) if w > 0]
        out = {
            'kind': 'weights',
            'strategies': [list(cert.strategies[k].choice) for k in support],
            'weights': [float(cert.weights[k]) for k in support],
            'residual': cert.residual,
        }
        if cert.exact_weights is not None:
            out['exact_weights'] = [str(cert.exact_weights[k]) for k in support]
        return out
    return {
        'kind': 'inequality',
        'coefficients': [float(c) for c in cert.coefficients],
        'bound': cert.bound,
        'gap': cert.gap,
    }


# --- wirings ---------------------------------------------------------------

def wiring_to_dict(w: Wiring) -> Dict[str, Any]:
    nx = w.target.num_buttons
    ny = w.pre.scenario.num_buttons
    components = []
    for comp in w.post.components:
        responses = []
        for j, table in enumerate(comp.responses):
            rows = [{'z': z, 'b': mask_to_bitstring(b, nx), 'y': mask_to_bitstring(y, ny), 'out': out}
                    for (z, b, y), out in sorted(table.items())]
            responses.append({'light': j, 'table': rows})
        components.append({'w': comp.weight, 'responses': responses})
    return {
        'pre': ncbox_to_dict(w.pre),
        'post': {'scenario_in': scenario_to_dict(w.post.scenario_in), 'components': components},
        'target': scenario_to_dict(w.target),
    }


def wiring_from_dict(doc, path: str = '$', base_dir: str = '.') -> Wiring:
    pre = ncbox_from_dict(_get(doc, 'pre', path), f"{path}.pre", base_dir)
    target = scenario_from_dict(_get(doc, 'target', path), f"{path}.target", base_dir)
    post_doc = _get(doc, 'post', path, dict)
    post_s = scenario_from_dict(_get(post_doc, 'scenario_in', f"{path}.post"),
                                f"{path}.post.scenario_in", base_dir)
    nx, ny, nc = target.num_buttons, pre.scenario.num_buttons, post_s.num_lights
    components = []
    for k, comp in enumerate(_get(post_doc, 'components', f"{path}.post", list)):
        cpath = f"{path}.post.components[{k}]"
        weight = _number(_get(comp, 'w', cpath), f"{cpath}.w")
        responses = [dict() for _ in range(nc)]
        for m, resp in enumerate(_get(comp, 'responses', cpath, list)):
            rpath = f"{cpath}.responses[{m}]"
            j = _get(resp, 'light', rpath, int)
            if j < 0 or j >= nc:
                raise SchemaError(f"{rpath}.light", f"light {j} out of range 0..{nc - 1}")
            for r, row in enumerate(_get(resp, 'table', rpath, list)):
                tpath = f"{rpath}.table[{r}]"
                z = _get(row, 'z', tpath, int)
                if z < -1 or z >= post_s.num_buttons:
                    raise SchemaError(f"{tpath}.z", f"button {z} out of range")
                b = _bits(_get(row, 'b', tpath), f"{tpath}.b", nx)
                y = _bits(_get(row, 'y', tpath), f"{tpath}.y", ny)
                out = _get(row, 'out', tpath, int)
                responses[j][(z, b, y)] = out
        components.append(PostComponent(weight, responses))
    return Wiring(pre, PostFamily(post_s, components), target)
