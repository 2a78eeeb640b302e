# -*- coding: utf-8 -*-
"""
Created on Mon Mar 18 09:12:44 2024

@author: bundleLib developers

Proximity control bundle driver: inner loop of null steps around a serious
point, outer loop of serious steps, proximity parameter management and
the practical two stage stopping test.
"""
import logging
import time

import numpy as np
import scipy.linalg

from bundleLib.Entities import Plane, WorkingModel
from bundleLib.oracleLib import OracleConfig, pointData, cuttingPlanes, recycle, defaultDownshift
from bundleLib.tangentLib import Polyhedron, TangentSolver, checkPositiveDefinite
from bundleLib.utilities import ConfigError, InputError, SolverFailure, mergeDefaults, relativeStep, relativeGap

log = logging.getLogger(__name__)

# ===============================================================================
#  DEFAULTS
# ===============================================================================
driver_defaults = {'gamma':0.01,            #acceptance threshold for serious steps
                   'Gamma':0.6,             #rho above this halves the memory tau
                   'gamma_tilde':0.5,       #secondary ratio above this doubles tau
                   'q':1e6,                 #curvature bound -qI <= Q <= qI
                   'T':1e8,                 #cap of the memory element
                   'tol1':1e-5,             #relative step tolerance
                   'tol2':1e-5,             #relative value tolerance
                   'k_max':50,              #inner iterations per serious step
                   'j_max':500,             #serious steps
                   'plane_budget':100,
                   'small_null_steps':5,    #consecutive small null steps that end an inner loop
                   'tau_overflow':1e30,
                   'multiplier_threshold':1e-10}

STOP_REASONS = ('small-serious-step','small-null-steps','k-max','model-stationary','j-max')

# ===============================================================================
#  PARAMETER AND STATE CLASSES
# ===============================================================================
class DriverParams:

    def __init__(self,**kwargs):
        settings = mergeDefaults(driver_defaults,kwargs,'driver')
        for key in settings:
            setattr(self,key,settings[key])
        self.k_max = int(self.k_max)
        self.j_max = int(self.j_max)
        self.plane_budget = int(self.plane_budget)
        self.small_null_steps = int(self.small_null_steps)

    def check(self):
        # list of violated ordering constraints, empty when valid
        problems = []
        if not 0 < self.gamma < self.Gamma < 1:
            problems.append('require 0 < gamma < Gamma < 1 (gamma=%g, Gamma=%g)' % (self.gamma,self.Gamma))
        if not self.gamma < self.gamma_tilde < 1:
            problems.append('require gamma < gamma_tilde < 1 (gamma=%g, gamma_tilde=%g)' % (self.gamma,self.gamma_tilde))
        if not 0 < self.q < self.T:
            problems.append('require 0 < q < T (q=%g, T=%g)' % (self.q,self.T))
        if not (self.tol1 > 0 and self.tol2 > 0):
            problems.append('stopping tolerances tol1, tol2 must be positive')
        if self.k_max < 1 or self.j_max < 1:
            problems.append('k_max and j_max must be at least 1')
        if self.plane_budget < 4:
            problems.append('plane_budget must hold the protected planes (at least 4)')
        return problems

    def validate(self):
        problems = self.check()
        if problems:
            raise ConfigError('; '.join(problems))
        return self

    def asDict(self):
        return {key:getattr(self,key) for key in driver_defaults}

class ProxState:
    '''
    Proximity parameter tau of the current inner loop and the memory element
    tau_sharp carried between serious steps.
    '''
    def __init__(self,tau,memory):
        self.tau = float(tau)
        self.memory = float(memory)

class IterationRecord:
    '''
    One trial point of the inner loop, serious or null.
    '''
    __slots__ = ('j','k','kind','tau','tau_next','rho','rho_tilde','f_x','f_y','phi_y','phi_next_y',
                 'aggregate_gap','kkt_residual','planes','branch','step')

    def __init__(self,**kwargs):
        for key in self.__slots__:
            setattr(self,key,kwargs.get(key))

    def asDict(self):
        return {key:getattr(self,key) for key in self.__slots__}

class SeriousStep:

    def __init__(self,j,point,value,step,inner_iterations,tau_final,rho,memory_raw,memory):
        self.j = j
        self.point = point
        self.value = value
        self.step = step
        self.inner_iterations = inner_iterations
        self.tau_final = tau_final
        self.rho = rho
        self.memory_raw = memory_raw    #tau_sharp before the definiteness and cap adjustments
        self.memory = memory

class RunHistory:
    '''
    Serious iterates with their inner loop statistics, the full iteration trace and the stop reason.
    '''
    def __init__(self,x_start,f_start):
        self.x_start = x_start
        self.f_start = f_start
        self.serious = []
        self.trace = []
        self.stop_reason = None
        self.status = 'running'
        self.message = ''
        self.x_final = x_start
        self.f_final = f_start
        self.tangent_kkt_residual = None     #QP residual of the last tangent program
        self.stationarity_residual = None    #dist(0, Clarke subdifferential) at x_final, when the problem provides it
        self.wall_time = 0.0
        self.downshift_coefficient = None
        self.fallback_used = False

    def values(self):
        return [self.f_start] + [s.value for s in self.serious]

    def nullSteps(self):
        return sum(1 for r in self.trace if r.kind == 'null')

    def isStrictlyDecreasing(self):
        v = self.values()
        return all(b < a for a,b in zip(v,v[1:]))

# ===============================================================================
#  RATIOS AND PROXIMITY UPDATES
# ===============================================================================
def acceptanceRatio(f_x,f_y,phi2_y):
    # rho = (f(x)-f(y)) / (f(x)-Phi(y)); a nonpositive denominator signals y = x
    denominator = f_x - phi2_y
    if not denominator > 0:
        raise ZeroDivisionError('predicted decrease %g is not positive' % denominator)
    return (f_x - f_y)/denominator

def secondaryRatio(f_x,phi2_next_y,phi2_y):
    # rho_tilde = (f(x)-Phi_{k+1}(y)) / (f(x)-Phi_k(y))
    denominator = f_x - phi2_y
    if not denominator > 0:
        raise ZeroDivisionError('predicted decrease %g is not positive' % denominator)
    return (f_x - phi2_next_y)/denominator

def updateTauInner(tau,rho_tilde,gamma_tilde):
    return 2.0*tau if rho_tilde >= gamma_tilde else tau

def minimalDefiniteShift(Q):
    # smallest tau with Q + tau I safely positive definite (0 when Q already is)
    lowest = scipy.linalg.eigvalsh(Q,subset_by_index=[0,0],check_finite=False)[0] if Q.size else 0.0
    return 1.1*max(0.0,-lowest)

def memoryBeforeSafeguard(tau_final,rho_final,params):
    return 0.5*tau_final if rho_final >= params.Gamma else tau_final

def updateMemory(tau_final,rho_final,params,Q_next):
    '''
    tau_sharp after a serious step: keep tau if gamma <= rho < Gamma, halve it
    if rho >= Gamma, raise it until Q_next + tau_sharp I > 0, cap at T.
    '''
    memory = memoryBeforeSafeguard(tau_final,rho_final,params)
    if not checkPositiveDefinite(Q_next,memory):
        memory = max(memory,minimalDefiniteShift(Q_next))
        while not checkPositiveDefinite(Q_next,memory):
            memory = 2.0*max(memory,1e-12)
    return min(memory,params.T)

def initialMemory(Q):
    # tau_sharp_1 = max(1, 1.1 max(0, -lambda_min(Q)))
    return max(1.0,minimalDefiniteShift(Q))

def clipCurvature(Q_raw,q):
    # eigenvalue clipping of a symmetric matrix to [-q, q]
    Q_raw = 0.5*(np.asarray(Q_raw,dtype=float)+np.asarray(Q_raw,dtype=float).T)
    if Q_raw.size == 0:
        return Q_raw
    eig,V = scipy.linalg.eigh(Q_raw,check_finite=False)
    if eig[0] >= -q and eig[-1] <= q:
        return Q_raw
    clipped = (V*np.clip(eig,-q,q)).dot(V.T)
    return 0.5*(clipped+clipped.T)

# ===============================================================================
#  BUNDLE SOLVER
#       master class running inner and outer loops on one problem
# ===============================================================================
class BundleSolver:

    def __init__(self,problem,constraints=None,params=None,oracle=None,callback=None):
        self.problem = problem
        self.n = problem.dimension
        self.constraints = constraints if constraints is not None else Polyhedron.empty(self.n)
        if self.constraints.n != self.n:
            raise ConfigError('constraints act on R^%d, problem lives in R^%d' % (self.constraints.n,self.n))
        self.params = (params or DriverParams()).validate()
        self.oracle = oracle or OracleConfig()
        self.callback = callback
        self.c = self.oracle.downshift_coefficient

    # ---------------------------------------------------------------------------
    def _emit(self,history,record):
        history.trace.append(record)
        if self.callback is not None:
            self.callback(record)

    def _curvature(self,x):
        return clipCurvature(self.problem.curvature(x),self.params.q)

    def _pointData(self,x,value=None):
        return pointData(self.problem,x,self.oracle.allow_fallback,value)

    def innerLoop(self,x_data,model,prox,history,j=1):
        '''
        Null steps around the serious point until a trial is accepted.

        Returns ('serious', y_data, info) or ('converged', stop_reason, info).
        '''
        params = self.params
        x = x_data.point
        f_x = x_data.value
        tau = prox.tau
        solver = TangentSolver()
        small = 0
        eps_pred = 64*np.finfo(float).eps*(1.0+abs(f_x))
        info = {'null_steps':0,'tau':tau,'rho':None}
        for k in range(1,params.k_max+1):
            if not checkPositiveDefinite(model.curvature,tau):
                raise SolverFailure('Q + tau I lost definiteness (tau = %g)' % tau)
            sol = solver.solve(model,tau,self.constraints)
            y = sol.trial_point
            phi_y = sol.model_value
            predicted = f_x - phi_y
            if predicted <= eps_pred or np.array_equal(y,x):
                self._emit(history,IterationRecord(j=j,k=k,kind='stationary',tau=tau,tau_next=tau,f_x=f_x,f_y=f_x,phi_y=phi_y,
                                                   kkt_residual=sol.kkt_residual,planes=len(model),step=0.0))
                info.update(tau=tau,kkt=sol.kkt_residual,solution=sol)
                return 'converged','model-stationary',info
            y_data = self._pointData(y)
            f_y = y_data.value
            rho = acceptanceRatio(f_x,f_y,phi_y)
            step = float(np.linalg.norm(y-x))
            if rho >= params.gamma:
                self._emit(history,IterationRecord(j=j,k=k,kind='serious',tau=tau,tau_next=tau,rho=rho,f_x=f_x,f_y=f_y,phi_y=phi_y,
                                                   kkt_residual=sol.kkt_residual,planes=len(model),step=step))
                info.update(tau=tau,rho=rho,kkt=sol.kkt_residual,solution=sol)
                return 'serious',y_data,info

            #null step: aggregate, cutting planes, then the secondary test
            aggregate = model.aggregatePlane(sol.multipliers)
            agg_gap = abs(aggregate.value(y,x) - sol.first_order_value)
            weighted = [model.planes[i] for i in sol.multipliers.active(params.multiplier_threshold)]
            cuts,branch = cuttingPlanes(self.oracle.variant,x_data,y_data,self.c)
            cuts = model.addPlanes(cuts)
            aggregate = model.addPlane(aggregate)
            protected = cuts + [aggregate,model.newest('exactness')] + weighted
            model.prune(protected)
            phi_next_y = model.evalSecondOrder(y)
            rho_tilde = secondaryRatio(f_x,phi_next_y,phi_y)
            tau_next = updateTauInner(tau,rho_tilde,params.gamma_tilde)
            self._emit(history,IterationRecord(j=j,k=k,kind='null',tau=tau,tau_next=tau_next,rho=rho,rho_tilde=rho_tilde,
                                               f_x=f_x,f_y=f_y,phi_y=phi_y,phi_next_y=phi_next_y,aggregate_gap=agg_gap,
                                               kkt_residual=sol.kkt_residual,planes=len(model),branch=branch,step=step))
            log.debug('j=%d k=%d null step: tau=%.3g rho=%.3g rho~=%.3g planes=%d',j,k,tau,rho,rho_tilde,len(model))
            info['null_steps'] += 1
            if relativeStep(x,y) <= params.tol1 and relativeGap(f_x,f_y) <= params.tol2:
                small += 1
            else:
                small = 0
            tau = tau_next
            info['tau'] = tau
            if small >= params.small_null_steps:
                info['kkt'] = sol.kkt_residual
                return 'converged','small-null-steps',info
            if tau > params.tau_overflow:
                raise SolverFailure('proximity parameter overflow (tau = %g) at j=%d k=%d' % (tau,j,k),
                                    {'tau':tau,'j':j,'k':k,'planes':len(model),'f_x':f_x})
        info['kkt'] = sol.kkt_residual
        return 'converged','k-max',info

    def _initialModel(self,x_data,Q,planes=()):
        model = WorkingModel(x_data.point,x_data.value,planes,Q,self.params.plane_budget)
        exact = model.addPlane(Plane(x_data.value,x_data.seedSubgradient(),'exactness',x_data.point))
        return model.prune([exact])

    def solve(self,x_start):
        params = self.params
        x = np.array(x_start,dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise InputError('starting point has dimension %d, expected %d' % (x.shape[0],self.n))
        if not self.constraints.isFeasible(x):
            raise InputError('starting point violates Ax <= b by %g' % self.constraints.violation(x))
        clock = time.perf_counter()
        x_data = self._pointData(x)
        history = RunHistory(x.copy(),x_data.value)
        if self.c is None:
            self.c = defaultDownshift(x_data.value,x)
        history.downshift_coefficient = self.c
        Q = self._curvature(x)
        memory = initialMemory(Q)
        model = self._initialModel(x_data,Q)
        log.info('start: f = %.9g, n = %d, m = %d, oracle %s, c = %.3g',x_data.value,self.n,self.constraints.m,self.oracle.variant,self.c)
        try:
            for j in range(1,params.j_max+1):
                prox = ProxState(memory,memory)
                outcome,result,info = self.innerLoop(x_data,model,prox,history,j)
                history.fallback_used = history.fallback_used or x_data.fallback_used
                if outcome == 'converged':
                    history.stop_reason = result
                    break
                y_data = result
                step = float(np.linalg.norm(y_data.point-x_data.point))
                Q_next = self._curvature(y_data.point)
                raw = memoryBeforeSafeguard(info['tau'],info['rho'],params)
                memory = updateMemory(info['tau'],info['rho'],params,Q_next)
                history.serious.append(SeriousStep(j,y_data.point.copy(),y_data.value,step,info['null_steps']+1,info['tau'],info['rho'],raw,memory))
                history.x_final = y_data.point.copy()
                history.f_final = y_data.value
                history.tangent_kkt_residual = info.get('kkt')
                log.info('serious step %d: f = %.9g, |step| = %.3g, null steps %d, tau = %.3g, rho = %.3g',
                         j,y_data.value,step,info['null_steps'],info['tau'],info['rho'])
                small = relativeStep(x_data.point,y_data.point) <= params.tol1 and relativeGap(x_data.value,y_data.value) <= params.tol2
                if small:
                    history.stop_reason = 'small-serious-step'
                    break
                planes = recycle(model.planes,x_data.point,y_data,self.c,modified=True)
                x_data = y_data
                model = self._initialModel(x_data,Q_next,planes)
            else:
                history.stop_reason = 'j-max'
                log.warning('outer iteration cap j_max = %d reached',params.j_max)
        except SolverFailure as error:
            history.status = 'failed'
            history.message = str(error)
            history.wall_time = time.perf_counter()-clock
            error.history = history
            raise
        if history.stop_reason != 'small-serious-step':
            history.x_final = x_data.point.copy()
            history.f_final = x_data.value
            history.tangent_kkt_residual = info.get('kkt')
        if self.constraints.m == 0 and hasattr(self.problem,'stationarityResidual'):
            history.stationarity_residual = self.problem.stationarityResidual(history.x_final)
        history.status ='converged' if history.stop_reason != 'j-max' else 'stopped'
        history.wall_time = time.perf_counter()-clock
        log.info('stop (%s) after %d serious steps: f = %.9g',history.stop_reason,len(history.serious),history.f_final)
        return history

# ===============================================================================
#  FUNCTION WRAPPERS
# ===============================================================================
def innerLoop(x_j,initial_model,prox,params,problem,constraints=None,oracle=None,history=None):
    # single inner loop from serious point x_j with a prepared model
    solver = BundleSolver(problem,constraints,params,oracle)
    x_data = solver._pointData(x_j)
    if solver.c is None:
        solver.c = defaultDownshift(x_data.value,x_data.point)
    history = history or RunHistory(x_data.point.copy(),x_data.value)
    return solver.innerLoop(x_data,initial_model,prox,history)

def solve(problem,constraints=None,x_start=None,params=None,oracle=None,callback=None):
    if x_start is None:
        x_start = np.zeros(problem.dimension)
    return BundleSolver(problem,constraints,params,oracle,callback).solve(x_start)
