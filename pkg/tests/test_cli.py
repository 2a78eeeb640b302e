# -*- coding: utf-8 -*-
import json
import logging
import os

import pytest

from bundleLib import cli
from bundleLib.cli import RunConfig, parseParams, parseList, validate, run, main, DEFAULT_CONFIG
from bundleLib.utilities import ConfigError, SolverFailure, LOGGER_NAME


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if getattr(handler,'_bundleLib',False):
            logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)


def test_parse_params():
    assert parseParams('gamma=0.1, k_max=20,variant=modified') == {'gamma':0.1,'k_max':20,'variant':'modified'}
    assert parseParams('') == {}
    with pytest.raises(ConfigError):
        parseParams('gamma')


def test_parse_list():
    assert parseList('0.2, 0.4,1') == [0.2,0.4,1.0]
    with pytest.raises(ConfigError):
        parseList('0.2,heavy')


def test_default_config_passes():
    config = RunConfig.fromFile(DEFAULT_CONFIG)
    assert config.isDelamination()
    assert config.f2 == [0.2,0.4,0.6,0.8,1.0]
    assert validate(config) == []
    assert config.driverParams().q == 1e8


def test_validate_reports_each_violation(tmp_path):
    config = RunConfig.fromFile(DEFAULT_CONFIG)
    config.params['gamma'] = config.params['Gamma'] = 0.6
    config.law = str(tmp_path/'missing.json')
    config.f2 = []
    problems = validate(config)
    assert any(p.startswith('driver:') and 'Gamma' in p for p in problems)
    assert any(p.startswith('law:') and 'not found' in p for p in problems)
    assert any(p.startswith('f2:') for p in problems)


def test_validate_corpus_config():
    assert validate(RunConfig(problem='U1')) == []
    assert validate(RunConfig(problem='Z9'))


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        RunConfig.fromDict({'problem':'L1','colour':'red'})


def test_main_validate_exit_codes(tmp_path,capsys):
    assert main(['validate',DEFAULT_CONFIG]) == 0
    assert 'configuration ok' in capsys.readouterr().out
    bad = tmp_path/'bad.json'
    bad.write_text(json.dumps({'problem':'delamination','f2':[1.0],'params':{'gamma':0.6,'Gamma':0.6}}))
    assert main(['validate',str(bad)]) == 2
    assert main(['validate',str(tmp_path/'nowhere.json')]) == 2
    broken = tmp_path/'broken.json'
    broken.write_text('{"problem": ')
    assert main(['validate',str(broken)]) == 2


def test_corpus_list(capsys):
    assert main(['corpus','list']) == 0
    out = capsys.readouterr().out
    for ident in ('L1','L2','L3','U1','U2'):
        assert ident in out


def test_corpus_run_artifacts(tmp_path):
    out = str(tmp_path/'L1')
    assert main(['corpus','run','L1','--out',out,'--oracle','modified']) == 0
    for name in ('record.json','history_L1.csv','trace_L1.csv','convergence_L1.svg','solution_L1.csv'):
        assert os.path.exists(os.path.join(out,name))
    with open(os.path.join(out,'record.json')) as f:
        record = json.load(f)
    assert record['status'] == 'ok'
    entry = record['entries'][0]
    assert entry['error'] <= 1e-2
    values = [row['f'] for row in entry['rows']]
    assert all(b < a for a,b in zip(values,values[1:]))


def test_unknown_corpus_id(tmp_path):
    assert main(['corpus','run','Z9','--out',str(tmp_path)]) == 2


def test_echo_reproduces_history(tmp_path):
    first = RunConfig(problem='L2',out=str(tmp_path/'first'))
    record = run(first)
    echo = RunConfig.fromDict(dict(record.config,out=str(tmp_path/'second')))
    run(echo)
    with open(str(tmp_path/'first'/'history_L2.csv'),'rb') as a, open(str(tmp_path/'second'/'history_L2.csv'),'rb') as b:
        assert a.read() == b.read()


def test_unloaded_delamination_run(tmp_path):
    out = str(tmp_path/'sweep')
    assert main(['run',DEFAULT_CONFIG,'--f2','0','--out',out,'--jobs','2']) == 0
    with open(os.path.join(out,'record.json')) as f:
        record = json.load(f)
    entry = record['entries'][0]
    assert entry['energy_Nmm'] == 0.0
    assert entry['stop_reason'] == 'model-stationary'
    for name in ('summary.csv','energy.svg','solution_F2=0.csv','opening_F2=0.svg','mesh_F2=0.dxf'):
        assert os.path.exists(os.path.join(out,name))


def test_solver_failure_exit_code(tmp_path,monkeypatch):
    def failing(config,ident=None):
        raise SolverFailure('proximity parameter overflow')
    monkeypatch.setattr(cli,'run',failing)
    assert main(['corpus','run','L1','--out',str(tmp_path)]) == 3
