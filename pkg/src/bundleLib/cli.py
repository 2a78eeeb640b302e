# -*- coding: utf-8 -*-
"""
Created on Mon Mar 25 17:02:15 2024

@author: bundleLib developers

Command line front end:

    bundlelib run <config> [--out DIR] [--seed N] [--f2 a,b,...] [--params k=v,...] [--jobs N]
    bundlelib validate <config>
    bundlelib corpus list
    bundlelib corpus run <id> [--out DIR] [--params k=v,...] [--oracle VARIANT]

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from bundleLib import plotLib
from bundleLib.BundleLib import BundleSolver, DriverParams, driver_defaults
from bundleLib.delaminationLib import (DelaminationModel, ElasticityParams, buildMesh, layoutFromConfig, loadLaw,
                                       exportSolution, delamination_params, mesh_defaults)
from bundleLib.drawingLib import exportDrawing
from bundleLib.oracleLib import OracleConfig
from bundleLib.problemLib import loadCorpus, FIXTURE_DIR
from bundleLib.utilities import (BundleError, ConfigError, InputError, InfeasibleError, SolverFailure, setupLogging,
                                 formatFloat)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

DEFAULT_CONFIG = os.path.join(FIXTURE_DIR,'delamination.json')

# ===============================================================================
#  RUN CONFIGURATION
# ===============================================================================
class RunConfig:
    '''
    Experiment description: a corpus id or "delamination", driver and oracle
    overrides, mesh/layout/material/law for delamination runs, load levels,
    output directory, seed and number of parallel workers.
    '''
    def __init__(self,problem='delamination',params=None,oracle=None,mesh=None,layout=None,elasticity=None,
                 law=None,f2=None,out='results',seed=0,jobs=1,base_dir='.'):
        self.problem = problem
        self.params = dict(params or {})
        self.oracle = dict(oracle or {})
        self.mesh = dict(mesh_defaults if mesh is None else mesh)
        self.layout = layout
        self.elasticity = dict(elasticity or {})
        self.law = law
        self.f2 = [float(v) for v in (f2 if f2 is not None else [])]
        self.out = out
        self.seed = int(seed)
        self.jobs = int(jobs)
        self.base_dir = base_dir

    @classmethod
    def fromDict(cls,data,base_dir='.'):
        known = ('problem','params','oracle','mesh','layout','elasticity','law','f2','out','seed','jobs')
        unknown = [k for k in data if k not in known]
        if unknown:
            raise ConfigError('unknown configuration keys: '+', '.join(sorted(unknown)))
        return cls(base_dir=base_dir,**data)

    @classmethod
    def fromFile(cls,path):
        if not os.path.exists(path):
            raise FileNotFoundError('configuration file not found: '+path)
        with open(path) as f:
            try:
                data = json.load(f)
            except ValueError as error:
                raise ConfigError('cannot parse '+path+': '+str(error))
        return cls.fromDict(data,os.path.dirname(os.path.abspath(path)))

    def resolve(self,path):
        # relative paths are taken from the configuration file's directory
        if path is None or os.path.isabs(path):
            return path
        return os.path.join(self.base_dir,path)

    def lawPath(self):
        return self.resolve(self.law) if isinstance(self.law,str) else None

    def layoutSpec(self):
        if isinstance(self.layout,str):
            path = self.resolve(self.layout)
            if not os.path.exists(path):
                raise FileNotFoundError('layout file not found: '+path)
            with open(path) as f:
                return json.load(f)
        return self.layout

    def isDelamination(self):
        return self.problem == 'delamination'

    def driverParams(self):
        base = dict(delamination_params) if self.isDelamination() else {}
        base.update(self.params)
        return DriverParams(**base)

    def oracleConfig(self):
        return OracleConfig(**self.oracle)

    def asDict(self):
        # echo; feeding it back reproduces the run
        return {'problem':self.problem,'params':self.params,'oracle':self.oracle,'mesh':self.mesh,'layout':self.resolve(self.layout) if isinstance(self.layout,str) else self.layout,
                'elasticity':self.elasticity,'law':self.lawPath() if isinstance(self.law,str) else self.law,
                'f2':self.f2,'out':self.out,'seed':self.seed,'jobs':self.jobs}

def parseParams(text):
    # "k=v,k=v" -> dict with numeric values where possible
    out = {}
    if not text:
        return out
    for item in text.split(','):
        if '=' not in item:
            raise ConfigError('expected key=value, got '+repr(item))
        key,value = (s.strip() for s in item.split('=',1))
        try:
            out[key] = int(value) if value.lstrip('-').isdigit() else float(value)
        except ValueError:
            out[key] = value
    return out

def parseList(text):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ConfigError('expected a comma separated list of numbers, got '+repr(text))

# ===============================================================================
#  RUN RECORD
# ===============================================================================
class RunRecord:

    def __init__(self,config):
        self.config = config.asDict()
        self.status = 'running'
        self.entries = []
        self.artifacts = []
        self.wall_time = 0.0
        self.message = ''

    def addEntry(self,label,history,extra=None):
        entry = {'label':label,'status':history.status,'stop_reason':history.stop_reason,'f_final':history.f_final,
                 'tangent_kkt_residual':history.tangent_kkt_residual,'stationarity_residual':history.stationarity_residual,'wall_time':history.wall_time,
                 'downshift_coefficient':history.downshift_coefficient,'fallback_used':history.fallback_used,
                 'rows':[{'j':s.j,'f':s.value,'step':s.step,'inner_iterations':s.inner_iterations,
                          'tau_final':s.tau_final,'rho':s.rho} for s in history.serious],
                 'x_final':[float(v) for v in history.x_final]}
        if history.message:
            entry['message'] = history.message
        if extra:
            entry.update(extra)
        self.entries.append(entry)
        return entry

    def asDict(self):
        return {'config':self.config,'status':self.status,'message':self.message,'wall_time':self.wall_time,
                'entries':self.entries,'artifacts':self.artifacts}

    def save(self,path):
        with open(path,'w') as f:
            json.dump(self.asDict(),f,indent=1,default=_jsonDefault)
        log.info('Saved as: %s',path)
        self.artifacts.append(path)
        return path

def _jsonDefault(value):
    if isinstance(value,np.generic):
        return value.item()
    if isinstance(value,np.ndarray):
        return value.tolist()
    raise TypeError(type(value).__name__+' is not JSON serializable')

# ===============================================================================
#  VALIDATE
# ===============================================================================
def validate(config):
    '''
    Diagnostics for a configuration: parameter ordering, oracle settings,
    mesh invariants, adhesive law sampling and feasibility of the start.
    Returns a list of messages, empty when the configuration is usable.
    '''
    problems = []
    try:
        problems += ['driver: '+p for p in config.driverParams().check()]
    except ConfigError as error:
        problems.append('driver: '+str(error))
    try:
        config.oracleConfig()
    except ConfigError as error:
        problems.append('oracle: '+str(error))
    if not config.isDelamination():
        corpus = loadCorpus()
        if config.problem not in corpus:
            problems.append('problem: unknown corpus id '+str(config.problem))
        else:
            entry = corpus[config.problem]
            if not entry.constraints().isFeasible(entry.start):
                problems.append('start: corpus start point is infeasible')
        return problems
    if not config.f2:
        problems.append('f2: delamination runs need at least one load level')
    try:
        ElasticityParams(**config.elasticity)
    except ConfigError as error:
        problems.append('elasticity: '+str(error))
    try:
        mesh = buildMesh(layout=layoutFromConfig(config.layoutSpec()),**config.mesh)
        problems += ['mesh: '+p for p in mesh.check()]
    except (ConfigError,FileNotFoundError,TypeError) as error:
        problems.append('mesh: '+str(error))
    try:
        law = loadLaw(config.lawPath()) if config.law is None or isinstance(config.law,str) else _inlineLaw(config.law)
        if law.validation_range is None:
            problems.append('law: no validation_range given, continuity sampling skipped')
    except FileNotFoundError as error:
        problems.append('law: '+str(error))
    except ConfigError as error:
        problems.append('law: '+str(error))
    #zero displacement is the start and always satisfies v2 >= 0
    return problems

def _inlineLaw(spec):
    from bundleLib.delaminationLib import AdhesiveLaw
    return AdhesiveLaw.fromSpec(spec)

# ===============================================================================
#  RUN
# ===============================================================================
def _label(F2):
    return 'F2=%s' % formatFloat(F2)

def runCorpus(config,record,ident=None):
    ident = ident or config.problem
    corpus = loadCorpus()
    if ident not in corpus:
        raise ConfigError('unknown corpus id '+str(ident))
    entry = corpus[ident]
    out = config.out
    os.makedirs(out,exist_ok=True)
    solver = BundleSolver(entry.problem,entry.constraints(),config.driverParams(),config.oracleConfig())
    try:
        history = solver.solve(entry.start)
    except SolverFailure as error:
        history = error.history
        _writeHistory(out,ident,history,record)
        record.addEntry(ident,history)
        raise
    _writeHistory(out,ident,history,record)
    record.artifacts.append(plotLib.writePointCsv(os.path.join(out,'solution_%s.csv' % ident),history.x_final))
    record.addEntry(ident,history,{'f_opt':entry.f_opt,'error':history.f_final-entry.f_opt})
    return history

def _writeHistory(out,label,history,record):
    record.artifacts.append(plotLib.writeHistoryCsv(os.path.join(out,'history_%s.csv' % label),history))
    record.artifacts.append(plotLib.writeTraceCsv(os.path.join(out,'trace_%s.csv' % label),history))
    record.artifacts.append(plotLib.plotConvergence(os.path.join(out,'convergence_%s.svg' % label),history))

def _solveLoad(config,mesh,elasticity,law,F2):
    model = DelaminationModel(mesh,elasticity,law,F2)
    return model.solve(config.driverParams(),config.oracleConfig())

def runDelamination(config,record):
    if not config.f2:
        raise ConfigError('delamination runs need at least one load level')
    out = config.out
    os.makedirs(out,exist_ok=True)
    mesh = buildMesh(layout=layoutFromConfig(config.layoutSpec()),**config.mesh)
    elasticity = ElasticityParams(**config.elasticity)
    law = loadLaw(config.lawPath()) if config.law is None or isinstance(config.law,str) else _inlineLaw(config.law)
    config.driverParams().validate()

    def task(F2):
        try:
            return F2,_solveLoad(config,mesh,elasticity,law,F2),None
        except SolverFailure as error:
            return F2,None,error

    if config.jobs > 1 and len(config.f2) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(task,config.f2))
    else:
        outcomes = [task(F2) for F2 in config.f2]

    #join point: per-load artifacts, then the summary
    results = []
    failure = None
    for F2,result,error in outcomes:
        label = _label(F2)
        if error is not None:
            history = getattr(error,'history',None)
            if history is not None:
                _writeHistory(out,label,history,record)
                record.addEntry(label,history,{'F2':F2})
            failure = failure or error
            continue
        _writeHistory(out,label,result.history,record)
        record.artifacts.append(exportSolution(os.path.join(out,'solution_%s.csv' % label),result))
        record.artifacts.append(plotLib.plotOpening(os.path.join(out,'opening_%s.svg' % label),result))
        record.artifacts.append(plotLib.plotReaction(os.path.join(out,'reaction_%s.svg' % label),result))
        record.artifacts.append(exportDrawing(out,'mesh_%s' % label,result))
        record.addEntry(label,result.history,{'F2':F2,'energy_Nmm':result.energy,'energy_Nm':result.energy_Nm,
                                              'kkt_stationarity':result.kkt,'min_opening':result.min_opening,
                                              'load_point_displacement':result.load_point_displacement})
        results.append(result)
    if results:
        record.artifacts.append(plotLib.writeSummaryCsv(os.path.join(out,'summary.csv'),results))
        record.artifacts.append(plotLib.plotEnergySweep(os.path.join(out,'energy.svg'),results))
    if failure is not None:
        raise failure
    return results

def run(config,ident=None):
    '''
    Execute a configuration and write its artifacts. Returns the RunRecord;
    solver failures are recorded (status "failed") and re-raised after the
    JSON record is written.
    '''
    record = RunRecord(config)
    clock = time.perf_counter()
    os.makedirs(config.out,exist_ok=True)
    np.random.seed(config.seed)
    try:
        if config.isDelamination() and ident is None:
            runDelamination(config,record)
        else:
            runCorpus(config,record,ident)
        record.status = 'ok'
    except (SolverFailure,InfeasibleError) as error:
        record.status = 'failed'
        record.message = str(error)
        record.wall_time = time.perf_counter()-clock
        record.save(os.path.join(config.out,'record.json'))
        raise
    record.wall_time = time.perf_counter()-clock
    record.save(os.path.join(config.out,'record.json'))
    return record

# ===============================================================================
#  ARGUMENT PARSING
# ===============================================================================
def buildParser():
    parser = argparse.ArgumentParser(prog='bundlelib',description='Proximity control bundle method and delamination benchmark')
    parser.add_argument('-v','--verbose',action='count',default=0,help='-v info, -vv debug')
    sub = parser.add_subparsers(dest='command')

    def common(p):
        p.add_argument('--out',help='output directory')
        p.add_argument('--seed',type=int,help='random seed')
        p.add_argument('--params',help='driver overrides k=v,... (keys: '+', '.join(driver_defaults)+')')
        p.add_argument('--oracle',choices=('standard','downshift','modified'),help='oracle variant')

    p_run = sub.add_parser('run',help='run a configuration file')
    p_run.add_argument('config',nargs='?',default=DEFAULT_CONFIG)
    common(p_run)
    p_run.add_argument('--f2',help='comma separated load levels [N/mm2]')
    p_run.add_argument('--jobs',type=int,help='parallel load levels')

    p_val = sub.add_parser('validate',help='check a configuration file')
    p_val.add_argument('config',nargs='?',default=DEFAULT_CONFIG)

    p_corpus = sub.add_parser('corpus',help='synthetic test problems')
    corpus_sub = p_corpus.add_subparsers(dest='corpus_command')
    corpus_sub.add_parser('list',help='list corpus instances')
    p_crun = corpus_sub.add_parser('run',help='solve one corpus instance')
    p_crun.add_argument('id')
    common(p_crun)
    return parser

def applyOverrides(config,args):
    if getattr(args,'out',None):
        config.out = args.out
    if getattr(args,'seed',None) is not None:
        config.seed = args.seed
    if getattr(args,'params',None):
        config.params.update(parseParams(args.params))
    if getattr(args,'oracle',None):
        config.oracle['variant'] = args.oracle
    if getattr(args,'f2',None):
        config.f2 = parseList(args.f2)
    if getattr(args,'jobs',None):
        config.jobs = args.jobs
    return config

def main(argv=None):
    parser = buildParser()
    args = parser.parse_args(argv)
    setupLogging([logging.WARNING,logging.INFO,logging.DEBUG][min(args.verbose,2)])
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        if args.command == 'validate':
            config = RunConfig.fromFile(args.config)
            problems = validate(config)
            for p in problems:
                print('\x1b[33mError:\x1b[0m '+p)
            if problems:
                return EXIT_CONFIG
            print('configuration ok: '+args.config)
            return EXIT_OK
        if args.command == 'corpus':
            if args.corpus_command == 'list':
                for ident,entry in loadCorpus().items():
                    print('%-4s n=%d  f*=%s  %s' % (ident,entry.problem.dimension,formatFloat(entry.f_opt),entry.description))
                return EXIT_OK
            if args.corpus_command == 'run':
                config = applyOverrides(RunConfig(problem=args.id,out=os.path.join('results',args.id)),args)
                record = run(config,args.id)
                print('%s: f = %s (%s)' % (args.id,formatFloat(record.entries[-1]['f_final']),record.entries[-1]['stop_reason']))
                return EXIT_OK
            parser.print_help()
            return EXIT_CONFIG
        config = applyOverrides(RunConfig.fromFile(args.config),args)
        problems = validate(config)
        if problems:
            for p in problems:
                log.error(p)
            return EXIT_CONFIG
        record = run(config)
        for entry in record.entries:
            print('%s: f = %s (%s)' % (entry['label'],formatFloat(entry['f_final']),entry['stop_reason']))
        return EXIT_OK
    except (ConfigError,InputError,FileNotFoundError) as error:
        log.error(str(error))
        return EXIT_CONFIG
    except (SolverFailure,InfeasibleError) as error:
        log.error('solver failure: '+str(error))
        return EXIT_FAILURE
    except BundleError as error:
        log.error(str(error))
        return EXIT_FAILURE

if __name__ == '__main__':
    sys.exit(main())
