#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-

import json
from pathlib import Path

import numpy as NP
from pytest import mark
from typer.testing import CliRunner

from fatoulab.cli import APP, RunConfig, record_path, run
from fatoulab.core import *

pytestmark = mark.smoke

RUNNER = CliRunner()


def invoke(*args: str):
    return RUNNER.invoke(APP, [str(a) for a in args])


def read_record(path: Path) -> dict:
    return json.loads(path.read_text())


def test_classify_l1(tmp_path: Path):
    out = tmp_path / 'l1.json'
    result = invoke('classify', '--example', 'L1', '--n', 10_000,
                    '--trials', 20, '--seed', 0, '-o', out)
    assert result.exit_code == 0
    record = read_record(out)
    assert record['status'] == 'ok'
    assert record['result']['verdict'] == 'SemiNeutral'
    assert record['config']['example'] == 'L1_linear_semineutral'
    assert record['config']['eps_abs'] == 1e-3


def test_orbit_csv_is_reproducible(tmp_path: Path):
    paths = [tmp_path / 'a.csv', tmp_path / 'b.csv']
    for path in paths:
        result = invoke('orbit', '--example', 'E2', '--z0', '0.03,0.02-0.01i',
                        '--steps', 200, '--seed', 3, '-o', path)
        assert result.exit_code == 0
    first, second = (p.read_bytes() for p in paths)
    assert first == second
    lines = first.decode().splitlines()
    assert lines[0] == 'step,re_1,im_1,re_2,im_2,norm'
    assert len(lines) == 1 + 201


def test_orbit_csv_header_without_rows():
    assert orbit_csv(None, 2) == 'step,re_1,im_1,re_2,im_2,norm\n'


def test_spectrum_from_file(tmp_path: Path):
    source = tmp_path / 'l1.json'
    source.write_text(example_file('L1'))
    out = tmp_path / 'spectrum.json'
    result = invoke('spectrum', '--ensemble', source, '--n', 500,
                    '--trials', 5, '-o', out)
    assert result.exit_code == 0
    spectrum = read_record(out)['result']
    assert len(spectrum['kappa']) == 2
    assert spectrum['alpha'] == [1, 1]
    assert abs(spectrum['kappa'][1] + NP.log(2)) < 0.1


def test_example_command(tmp_path: Path):
    out = tmp_path / 'e2.json'
    assert invoke('example', 'E2', '-o', out).exit_code == 0
    assert out.read_text() == example_file('E2')
    assert isinstance(read_ensemble(out), GermEnsemble)


def test_brjuno_command(tmp_path: Path):
    out = tmp_path / 'brjuno.json'
    result = invoke('brjuno', '--alpha', GOLDEN_MEAN, '--depth', 10, '-o', out)
    assert result.exit_code == 0
    assert read_record(out)['status'] == 'ok'


def test_config_errors(tmp_path: Path):
    assert invoke('classify').exit_code == 2
    assert invoke('classify', '--example', 'L1',
                  '--ensemble', tmp_path / 'x.json').exit_code == 2
    assert invoke('classify', '--example', 'X9').exit_code == 2
    assert invoke('orbit', '--example', 'E2').exit_code == 2
    assert invoke('lyapunov', '--ensemble', tmp_path / 'missing.json'
                  ).exit_code == 2
    bad = tmp_path / 'bad.json'
    bad.write_text('{"atoms": [{"matrix": [[[1, 0]]], "prob": 0.5}]}')
    assert invoke('lyapunov', '--ensemble', bad).exit_code == 2
    assert invoke('brjuno').exit_code == 2
    assert invoke('brjuno', '--alpha', 0.5, '--depth', 5).exit_code == 2


def test_numerical_failure_exit(tmp_path: Path):
    source = tmp_path / 'doubling.json'
    source.write_text(dump_germ_ensemble(
        GermEnsemble((Jet.linear([[2.0]]),), NP.array([1.0]))))
    result = invoke('limit-map', '--ensemble', source, '--rho', 1.0,
                    '--grid', 5)
    assert result.exit_code == 3


def test_run_record_embeds_config():
    config = RunConfig(command='lyapunov', example='L1', n=50, trials=3)
    status, record, table = run(config)
    assert status == 0
    assert table is None
    assert record['config']['threads'] >= 1
    assert record['config']['steps'] is not None
    assert record['result']['n'] == 50
    again = RunConfig.model_validate(record['config'])
    assert run(again)[1]['result'] == record['result']


def test_records_keep_full_precision():
    text = dumps_record({'x': 0.1, 'z': 1 + 2j, 'a': NP.array([1.5])})
    assert json.loads(text) == {'x': 0.1, 'z': [1.0, 2.0], 'a': [1.5]}
    assert float(json.loads(dumps_record(NP.pi))) == NP.pi
    csv = table_csv(['x'], [[1 / 3]])
    assert float(csv.splitlines()[1]) == 1 / 3


def test_csv_run_replays_without_its_ensemble_file(tmp_path: Path):
    source = tmp_path / 'e2.json'
    source.write_text(example_file('E2'))
    out = tmp_path / 'orbit.csv'
    result = invoke('orbit', '--ensemble', source, '--z0', '0.03,0.02',
                    '--steps', 100, '--seed', 5, '-o', out)
    assert result.exit_code == 0
    record = read_record(record_path(out))
    assert record['status'] == 'ok'
    assert record['ensemble_path'] == str(source)
    assert record['config']['ensemble'] is None
    assert record['config']['source'] == json.loads(source.read_text())
    source.unlink()
    again = tmp_path / 'again.csv'
    assert invoke('replay', record_path(out), '-o', again).exit_code == 0
    assert again.read_bytes() == out.read_bytes()
    replayed = read_record(record_path(again))
    assert replayed['result'] == record['result']
    assert replayed['config'] == {**record['config'], 'output': str(again)}


def test_json_run_replays_from_its_record(tmp_path: Path):
    out = tmp_path / 'fatou.json'
    result = invoke('fatou', '--example', 'L1', '--delta', 0.05,
                    '--steps', 200, '--trials', 20, '--seed', 2, '-o', out)
    assert result.exit_code == 0
    again = tmp_path / 'again.json'
    assert invoke('replay', out, '-o', again).exit_code == 0
    first, second = read_record(out), read_record(again)
    assert second['result'] == first['result']
    assert second['config'] == {**first['config'], 'output': str(again)}


def test_replay_rejects_non_records(tmp_path: Path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"status": "ok"}')
    assert invoke('replay', bad).exit_code == 2
    assert invoke('replay', tmp_path / 'missing.json').exit_code == 2


def test_spectrum_of_germ_measure_uses_linear_parts(tmp_path: Path):
    out = tmp_path / 'e2.json'
    result = invoke('spectrum', '--example', 'E2', '--n', 2000,
                    '--trials', 10, '-o', out)
    assert result.exit_code == 0
    kappa = read_record(out)['result']['kappa']
    assert len(kappa) == 2
    assert abs(kappa[0]) < 1e-6
    assert abs(kappa[1] - 0.5 * NP.log(0.5)) < 0.02
    out = tmp_path / 'e2-top.json'
    assert invoke('lyapunov', '--example', 'E2', '--n', 500, '--trials', 5,
                  '-o', out).exit_code == 0
    assert abs(read_record(out)['result']['kappa']) < 1e-6
