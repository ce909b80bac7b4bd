"""JSON codecs and the command line: schemas, exit codes, reproducible reports."""

import json
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

from src.behavior import max_abs_difference
from src.cli import EXIT_FAILED, EXIT_IO, EXIT_OK, RunConfig, main, run
from src.cycle import build_cycle, extremal_contextual, extremal_noncontextual, uniform_box
from src.errors import SchemaError
from src.jsonio import (
    behavior_from_dict,
    behavior_to_dict,
    detect_kind,
    dumps,
    format_float,
    load_json,
    ncbox_from_dict,
    scenario_from_dict,
    scenario_to_dict,
    wiring_from_dict,
    wiring_to_dict,
    write_json,
)
from src.ncpolytope import random_nc_box
from src.wiring import identity_wiring, validate_wiring


def _write(tmp_path, name, obj) -> str:
    path = os.path.join(str(tmp_path), name)
    write_json(obj, path)
    return path


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_float_formatting():
    assert format_float(0.1) == '0.10000000000000001'
    assert format_float(float('inf')) == 'inf'
    text = dumps({'p': 1 / 3, 'd': float('inf'), 'n': 2})
    assert '0.33333333333333331' in text
    assert '"inf"' in text
    assert json.loads(text)['n'] == 2


def test_behavior_file_keeps_every_bit():
    box = random_nc_box(build_cycle(4), np.random.default_rng(6)).box()
    back = behavior_from_dict(json.loads(dumps(behavior_to_dict(box))))
    assert max_abs_difference(back, box) == 0.0


def test_scenario_by_file_reference(tmp_path):
    _write(tmp_path, 'c4.json', scenario_to_dict(build_cycle(4)))
    doc = behavior_to_dict(extremal_contextual(4, (1, 0, 0, 0)), scenario_ref='c4.json')
    box = behavior_from_dict(doc, base_dir=str(tmp_path))
    assert box.scenario == build_cycle(4)


@pytest.mark.parametrize('mutate, path', [
    (lambda d: d['table'][0]['outcomes'][0].update(p='half'), '$.table[0].outcomes[0].p'),
    (lambda d: d['table'][1]['outcomes'][0].update(on=[0, 99]), '$.table[1].outcomes[0].on[1]'),
    (lambda d: d['scenario'].pop('lights'), '$.scenario.lights'),
    (lambda d: d['table'][2].update(context=0), '$.table[2].context'),
])
def test_schema_errors_name_the_path(mutate, path):
    doc = json.loads(dumps(behavior_to_dict(extremal_contextual(4, (1, 0, 0, 0)))))
    mutate(doc)
    with pytest.raises(SchemaError) as info:
        behavior_from_dict(doc)
    assert info.value.path == path


SAMPLES = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'help', 'samples')


def test_chained_four_light_sample(capsys):
    path = os.path.join(SAMPLES, 'chained_pr_box.json')
    assert main(['validate', path]) == EXIT_OK
    assert _stdout_json(capsys)['ok']
    assert main(['check-nc', path]) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['verdict'] == 'contextual'
    assert report['nondisturbing']['worst_deviation'] == 0.0


def test_sample_scenario_is_the_four_cycle():
    doc = load_json(os.path.join(SAMPLES, 'c4.json'))
    assert scenario_from_dict(doc) == build_cycle(4)


def test_wiring_document_survives_encoding():
    w = identity_wiring(build_cycle(3))
    back = wiring_from_dict(json.loads(dumps(wiring_to_dict(w))))
    assert validate_wiring(back).ok
    assert back.post.components[0].responses == w.post.components[0].responses


def test_detect_kind():
    assert detect_kind(scenario_to_dict(build_cycle(3))) == 'scenario'
    assert detect_kind(behavior_to_dict(uniform_box(3))) == 'behavior'
    assert detect_kind(wiring_to_dict(identity_wiring(build_cycle(3)))) == 'wiring'
    with pytest.raises(SchemaError):
        detect_kind({'foo': 1})


def test_check_nc_on_pr_box(tmp_path, capsys):
    print("check-nc on the PR box file...", file=sys.stderr)
    path = _write(tmp_path, 'pr.json', behavior_to_dict(extremal_contextual(4, (1, 0, 0, 0))))
    assert main(['check-nc', path]) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['verdict'] == 'contextual'
    assert report['certificate']['kind'] == 'inequality'
    assert report['certificate']['gap'] > 0


def test_check_nc_exact_mode(tmp_path, capsys):
    path = _write(tmp_path, 'det.json', behavior_to_dict(extremal_noncontextual(4, (1, 0, 1, 0))))
    assert main(['check-nc', path, '--exact']) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['verdict'] == 'noncontextual'
    assert report['certificate']['exact_weights'] == ['1']


def test_check_nc_exact_mode_on_a_mixture(tmp_path, capsys):
    box = random_nc_box(build_cycle(4), np.random.default_rng(9)).box()
    path = _write(tmp_path, 'mix.json', behavior_to_dict(box))
    assert main(['check-nc', path, '--exact']) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['verdict'] == 'noncontextual'
    assert report['certificate']['kind'] == 'weights'
    assert sum(Fraction(w) for w in report['certificate']['exact_weights']) == 1


def test_validate_malformed_json_exits_2(tmp_path, capsys):
    path = os.path.join(str(tmp_path), 'broken.json')
    with open(path, 'w') as fh:
        fh.write('{"buttons": 3,')
    assert main(['validate', path]) == EXIT_IO
    assert _stdout_json(capsys)['error'] == 'schema'


def test_missing_file_exits_2(tmp_path, capsys):
    assert main(['check-nd', os.path.join(str(tmp_path), 'nope.json')]) == EXIT_IO
    capsys.readouterr()


def test_validate_reports_violations(tmp_path, capsys):
    doc = behavior_to_dict(extremal_contextual(3, (1, 1, 1)))
    doc['table'][0]['outcomes'][0]['p'] = 0.25
    path = _write(tmp_path, 'bad.json', doc)
    assert main(['validate', path]) == EXIT_FAILED
    report = _stdout_json(capsys)
    assert not report['ok']
    assert 'behavior.normalization' in [v['rule'] for v in report['violations']]


def test_check_nd_reports_disturbance(tmp_path, capsys):
    doc = behavior_to_dict(extremal_contextual(3, (1, 1, 1)))
    doc['table'][0]['outcomes'][0]['p'] = 0.7
    doc['table'][0]['outcomes'][1]['p'] = 0.3
    path = _write(tmp_path, 'dist.json', doc)
    assert main(['check-nd', path]) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['nondisturbing']['ok'] is False
    assert report['nondisturbing']['worst_deviation'] == pytest.approx(0.2)


def test_wire_identity_reproduces_box(tmp_path, capsys):
    box = extremal_contextual(4, (1, 0, 0, 0))
    box_path = _write(tmp_path, 'box.json', behavior_to_dict(box))
    w_path = _write(tmp_path, 'id.json', wiring_to_dict(identity_wiring(box.scenario)))
    out_path = os.path.join(str(tmp_path), 'out.json')
    assert main(['wire', '--wiring', w_path, '--box', box_path, '--out', out_path]) == EXIT_OK
    assert capsys.readouterr().out == ''
    assert load_json(out_path) == load_json(box_path)


def test_rc_writes_argmin(tmp_path, capsys):
    path = _write(tmp_path, 'pr.json', behavior_to_dict(extremal_contextual(4, (1, 0, 0, 0))))
    argmin_path = os.path.join(str(tmp_path), 'argmin.json')
    assert main(['rc', path, '--argmin-out', argmin_path]) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['value_bits'] == pytest.approx(0.41503749927884376, abs=1e-4)
    ncbox = ncbox_from_dict(load_json(argmin_path))
    ncbox.validate()


def test_cycle_gen(capsys):
    assert main(['cycle', 'gen', '--b', '5', '--gamma', '10000']) == EXIT_OK
    box = behavior_from_dict(_stdout_json(capsys))
    assert max_abs_difference(box, extremal_contextual(5, (1, 0, 0, 0, 0))) == 0.0
    assert main(['cycle', 'gen', '--b', '4', '--gamma', '1100']) == EXIT_FAILED
    capsys.readouterr()
    assert main(['cycle', 'gen', '--b', '4', '--gamma', '1000', '--zeta', '0000']) == EXIT_FAILED
    capsys.readouterr()
    assert main(['cycle', 'gen', '--b', '4', '--zeta', '0000', '--noise', '0.3']) == EXIT_FAILED
    capsys.readouterr()


def test_cycle_bit_demo(capsys):
    assert main(['cycle', 'bit-demo', '--b', '4', '--seed', '7', '--targets', '5']) == EXIT_OK
    report = _stdout_json(capsys)
    assert report['passed'] and report['worst_residual'] <= 1e-9
    assert len(report['targets']) == 5


def test_run_config_validation(capsys):
    assert run(RunConfig('rc', inputs={'file': 'x.json'}, rc_tol=0.0)) == EXIT_FAILED
    assert run(RunConfig('rc', inputs={'file': 'x.json'}, seed=2 ** 64)) == EXIT_FAILED
    capsys.readouterr()


def test_prop_suite_reports_are_byte_identical(tmp_path, capsys):
    print("Running a reduced prop-suite twice...")
    paths = [os.path.join(str(tmp_path), f'run{k}.json') for k in range(2)]
    for path in paths:
        code = main(['prop-suite', '--suites', 'extremal-classification', 'bit-decomposition',
                     'nd-preservation', '--scale', '0.02', '--seed', '0', '--out', path])
        assert code == EXIT_OK
    with open(paths[0], 'rb') as a, open(paths[1], 'rb') as b:
        assert a.read() == b.read()
    print("✅ reports identical")


def test_prop_suite_unknown_suite(capsys):
    assert main(['prop-suite', '--suites', 'nope']) == EXIT_FAILED
    capsys.readouterr()


if __name__ == '__main__':
    raise SystemExit(pytest.main([__file__, '-v']))
