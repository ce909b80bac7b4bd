"""
ctxkit command line.

    python ctxkit.py validate FILE
    python ctxkit.py check-nd FILE
    python ctxkit.py check-nc FILE [--exact]
    python ctxkit.py wire --wiring FILE --box FILE [--out FILE]
    python ctxkit.py rc FILE [--argmin-out FILE]
    python ctxkit.py cycle gen --b 5 --gamma 10000
    python ctxkit.py cycle bit-demo --b 4 --seed 7
    python ctxkit.py prop-suite [--suites ...] [--scale 0.1]

Reports are JSON on stdout (or --out). Exit codes: 0 verdict computed,
1 validation or property failure, 2 I/O or schema error.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from src import config
from src.behavior import Box, is_nondisturbing, validate_behavior
from src.cycle import (
    admissible_gammas,
    build_cycle,
    contextuality_bit_decompose,
    extremal_contextual,
    extremal_noncontextual,
    format_bits,
    noisy_extremal,
    parse_bits,
    random_nd_target,
)
from src.errors import CtxkitError, PreconditionError, SchemaError, ValidationReport
from src.jsonio import (
    behavior_from_dict,
    behavior_to_dict,
    certificate_to_dict,
    detect_kind,
    load_json,
    ncbox_from_dict,
    ncbox_to_dict,
    scenario_from_dict,
    wiring_from_dict,
    write_json,
)
from src.logging_config import configure_logging
from src.measures import relative_entropy_of_contextuality
from src.ncpolytope import is_noncontextual
from src.prop_suite import DEFAULT_SUITES, SUITES, SuiteSettings, run_suites
from src.scenario import validate_scenario
from src.wiring import apply_wiring, validate_wiring

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_IO = 2

SUBCOMMANDS = ('validate', 'check-nd', 'check-nc', 'wire', 'rc',
               'cycle-gen', 'cycle-bit-demo', 'prop-suite')


class ValidationFailed(CtxkitError):
    def __init__(self, report: Dict[str, Any]):
        self.report = report
        super().__init__("validation failed")


@dataclass
class RunConfig:
    subcommand: str
    inputs: Dict[str, str] = field(default_factory=dict)
    eps_norm: float = config.EPS_NORM
    eps_nd: float = config.EPS_ND
    eps_lp: float = config.EPS_LP
    rc_tol: float = config.RC_TOL
    max_iter: int = config.RC_MAX_ITER
    seed: int = config.DEFAULT_SEED
    out: Optional[str] = None
    options: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise PreconditionError(f"unknown subcommand {self.subcommand!r}")
        for name in ('eps_norm', 'eps_nd', 'eps_lp', 'rc_tol'):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iter <= 0:
            raise PreconditionError(f"max_iter must be positive, got {self.max_iter}")
        if not 0 <= self.seed < 2 ** 64:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def _base_dir(path: str) -> str:
    return os.path.dirname(os.path.abspath(path))


def _load_box(path: str) -> Box:
    doc = load_json(path)
    if detect_kind(doc) != 'behavior':
        raise SchemaError('$', f"{path} is not a behavior file")
    return behavior_from_dict(doc, base_dir=_base_dir(path))


def _require_valid_box(box: Box, cfg: RunConfig) -> None:
    report = ValidationReport()
    report.extend(validate_scenario(box.scenario), 'scenario')
    if report.ok:
        report.extend(validate_behavior(box, cfg.eps_norm), 'behavior')
    if not report.ok:
        raise ValidationFailed({'kind': 'behavior', **report.to_dict()})


# --- subcommands ----------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> Dict[str, Any]:
    path = cfg.inputs['file']
    doc = load_json(path)
    kind = detect_kind(doc)
    base = _base_dir(path)
    report = ValidationReport()
    if kind == 'scenario':
        report.extend(validate_scenario(scenario_from_dict(doc, base_dir=base)))
    elif kind == 'behavior':
        box = behavior_from_dict(doc, base_dir=base)
        report.extend(validate_scenario(box.scenario), 'scenario')
        if report.ok:
            report.extend(validate_behavior(box, cfg.eps_norm), 'behavior')
    elif kind == 'ncbox':
        ncbox = ncbox_from_dict(doc, base_dir=base)
        report.extend(validate_scenario(ncbox.scenario), 'scenario')
        try:
            ncbox.validate(cfg.eps_norm)
        except PreconditionError as e:
            report.add('ncbox', str(e))
    else:
        report.extend(validate_wiring(wiring_from_dict(doc, base_dir=base)))
    result = {'kind': kind, **report.to_dict()}
    if not report.ok:
        raise ValidationFailed(result)
    return result


def cmd_check_nd(cfg: RunConfig) -> Dict[str, Any]:
    box = _load_box(cfg.inputs['file'])
    _require_valid_box(box, cfg)
    return {'nondisturbing': is_nondisturbing(box, cfg.eps_nd).to_dict()}


def cmd_check_nc(cfg: RunConfig) -> Dict[str, Any]:
    box = _load_box(cfg.inputs['file'])
    _require_valid_box(box, cfg)
    verdict = is_noncontextual(box, cfg.eps_lp, exact=cfg.options.get('exact', False),
                               eps_nd=cfg.eps_nd)
    return {
        'verdict': verdict.verdict,
        'distance': verdict.distance,
        'certificate': certificate_to_dict(verdict.certificate),
        'nondisturbing': verdict.nd_report.to_dict() if verdict.nd_report else None,
    }


def cmd_wire(cfg: RunConfig) -> Dict[str, Any]:
    wpath = cfg.inputs['wiring']
    wiring = wiring_from_dict(load_json(wpath), base_dir=_base_dir(wpath))
    report = validate_wiring(wiring)
    if not report.ok:
        raise ValidationFailed({'kind': 'wiring', **report.to_dict()})
    for warning in report.warnings:
        log.warning(f"⚠️ {warning}")
    box = _load_box(cfg.inputs['box'])
    _require_valid_box(box, cfg)
    out = apply_wiring(wiring, box, check=False, eps_nd=cfg.eps_nd)
    return behavior_to_dict(out)


def cmd_rc(cfg: RunConfig) -> Dict[str, Any]:
    box = _load_box(cfg.inputs['file'])
    _require_valid_box(box, cfg)
    res = relative_entropy_of_contextuality(box, cfg.rc_tol, cfg.max_iter, cfg.seed, eps_nd=cfg.eps_nd)
    argmin_out = cfg.options.get('argmin_out')
    if argmin_out:
        write_json(ncbox_to_dict(res.argmin), argmin_out)
        log.info(f"💾 argmin written to {argmin_out}")
    return res.to_dict()


def cmd_cycle_gen(cfg: RunConfig) -> Dict[str, Any]:
    b = cfg.options['b']
    gamma, zeta = cfg.options.get('gamma'), cfg.options.get('zeta')
    noise = cfg.options.get('noise')
    if (gamma is None) == (zeta is None):
        raise PreconditionError("give exactly one of --gamma or --zeta")
    if zeta is not None and noise is not None:
        raise PreconditionError("--noise mixes a gamma box; it cannot be used with --zeta")
    if zeta is not None:
        box = extremal_noncontextual(b, parse_bits(zeta, b))
    elif noise is not None:
        box = noisy_extremal(b, parse_bits(gamma, b), noise)
    else:
        box = extremal_contextual(b, parse_bits(gamma, b))
    return behavior_to_dict(box)


def cmd_cycle_bit_demo(cfg: RunConfig) -> Dict[str, Any]:
    b = cfg.options['b']
    count = cfg.options.get('targets', 10)
    rng = np.random.default_rng(cfg.seed)
    gammas = admissible_gammas(b)
    gamma_from = parse_bits(cfg.options['gamma'], b) if cfg.options.get('gamma') else gammas[0]
    build_cycle(b)
    rows = []
    for k in range(count):
        target = random_nd_target(b, rng)
        dec = contextuality_bit_decompose(target, gamma_from, cfg.eps_nd)
        rows.append({'target': k, 'residual': dec.residual, 'components': len(dec.weights)})
        log.info(f"{'✅' if dec.residual <= 1e-9 else '❌'} target {k}: residual {dec.residual:.3e}")
    worst = max(r['residual'] for r in rows)
    result = {'b': b, 'gamma_from': format_bits(gamma_from), 'seed': cfg.seed,
              'targets': rows, 'worst_residual': worst, 'passed': worst <= 1e-9}
    if not result['passed']:
        raise ValidationFailed(result)
    return result


def cmd_prop_suite(cfg: RunConfig) -> Dict[str, Any]:
    names = cfg.options.get('suites') or list(DEFAULT_SUITES)
    if names == ['all']:
        names = list(SUITES)
    for name in names:
        if name not in SUITES:
            raise PreconditionError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    settings = SuiteSettings(seed=cfg.seed, scale=cfg.options.get('scale', 1.0),
                             eps_lp=cfg.eps_lp, rc_tol=cfg.rc_tol, max_iter=cfg.max_iter)
    report = run_suites(names, settings)
    if not report['passed']:
        raise ValidationFailed(report)
    return report


COMMANDS = {
    'validate': cmd_validate,
    'check-nd': cmd_check_nd,
    'check-nc': cmd_check_nc,
    'wire': cmd_wire,
    'rc': cmd_rc,
    'cycle-gen': cmd_cycle_gen,
    'cycle-bit-demo': cmd_cycle_bit_demo,
    'prop-suite': cmd_prop_suite,
}


def _emit(payload: Dict[str, Any], cfg: RunConfig) -> None:
    text = write_json(payload, cfg.out)
    if cfg.out:
        log.info(f"💾 report written to {cfg.out}")
    else:
        sys.stdout.write(text + '\n')


def run(cfg: RunConfig) -> int:
    """Execute one subcommand; returns the process exit code"""
    try:
        cfg.validate()
        payload = COMMANDS[cfg.subcommand](cfg)
    except ValidationFailed as e:
        log.error(f"❌ {cfg.subcommand}: validation or property failure")
        _emit(e.report, cfg)
        return EXIT_FAILED
    except SchemaError as e:
        log.error(f"❌ schema error at {e.path}: {e}")
        _emit({'error': 'schema', 'path': e.path, 'message': str(e)}, cfg)
        return EXIT_IO
    except OSError as e:
        log.error(f"❌ I/O error: {e}")
        _emit({'error': 'io', 'message': str(e)}, cfg)
        return EXIT_IO
    except CtxkitError as e:
        log.error(f"❌ {cfg.subcommand}: {e}")
        _emit({'error': type(e).__name__, 'message': str(e)}, cfg)
        return EXIT_FAILED
    _emit(payload, cfg)
    log.info(f"✅ {cfg.subcommand} done")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--eps-norm', type=float, default=config.EPS_NORM)
    common.add_argument('--eps-nd', type=float, default=config.EPS_ND)
    common.add_argument('--eps-lp', type=float, default=config.EPS_LP)
    common.add_argument('--rc-tol', type=float, default=config.RC_TOL)
    common.add_argument('--max-iter', type=int, default=config.RC_MAX_ITER)
    common.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    common.add_argument('--out', default=None, help='write the JSON report here instead of stdout')
    common.add_argument('--log-level', default=None, help='overrides LOG_LEVEL')

    parser = argparse.ArgumentParser(prog='ctxkit', description='Contextuality resource-theory toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('validate', parents=[common], help='validate a scenario, behavior, NC box or wiring')
    p.add_argument('file')
    p = sub.add_parser('check-nd', parents=[common], help='nondisturbance test')
    p.add_argument('file')
    p = sub.add_parser('check-nc', parents=[common], help='noncontextuality LP with certificate')
    p.add_argument('file')
    p.add_argument('--exact', action='store_true', help='decide membership in exact rational arithmetic')
    p = sub.add_parser('wire', parents=[common], help='apply a wiring to a box')
    p.add_argument('--wiring', required=True)
    p.add_argument('--box', required=True)
    p = sub.add_parser('rc', parents=[common], help='relative entropy of contextuality')
    p.add_argument('file')
    p.add_argument('--argmin-out', default=None)

    p = sub.add_parser('cycle', help='b-cycle constructions')
    cyc = p.add_subparsers(dest='cycle_command', required=True)
    g = cyc.add_parser('gen', parents=[common], help='emit an extremal cycle box')
    g.add_argument('--b', type=int, required=True)
    g.add_argument('--gamma', default=None, help='odd-weight bit string, e.g. 10000')
    g.add_argument('--zeta', default=None, help='bit string for a deterministic box')
    g.add_argument('--noise', type=float, default=None, help='mix gamma box with uniform: weight w')
    d = cyc.add_parser('bit-demo', parents=[common], help='rebuild random ND targets from a contextuality bit')
    d.add_argument('--b', type=int, required=True)
    d.add_argument('--gamma', default=None)
    d.add_argument('--targets', type=int, default=10)

    p = sub.add_parser('prop-suite', parents=[common], help='seeded property sweeps')
    p.add_argument('--suites', nargs='*', default=None,
                   help=f"subset of {sorted(SUITES)} or 'all' (default: {' '.join(DEFAULT_SUITES)})")
    p.add_argument('--scale', type=float, default=1.0, help='multiply instance counts')
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == 'cycle':
        subcommand = f"cycle-{args.cycle_command}"
    else:
        subcommand = args.command
    cfg = RunConfig(subcommand=subcommand, eps_norm=args.eps_norm, eps_nd=args.eps_nd,
                    eps_lp=args.eps_lp, rc_tol=args.rc_tol, max_iter=args.max_iter,
                    seed=args.seed, out=args.out)
    for key in ('file', 'wiring', 'box'):
        if getattr(args, key, None):
            cfg.inputs[key] = getattr(args, key)
    for key in ('exact', 'argmin_out', 'b', 'gamma', 'zeta', 'noise', 'targets', 'suites', 'scale'):
        if hasattr(args, key):
            cfg.options[key] = getattr(args, key)
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return run(config_from_args(args))


if __name__ == '__main__':
    sys.exit(main())
