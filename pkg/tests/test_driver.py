# -*- coding: utf-8 -*-
import numpy as np
import pytest
import scipy.optimize

from bundleLib.BundleLib import (DriverParams, ProxState, acceptanceRatio, secondaryRatio, updateTauInner, updateMemory,
                                 memoryBeforeSafeguard, initialMemory, clipCurvature, innerLoop, solve, BundleSolver,
                                 STOP_REASONS)
from bundleLib.Entities import Plane, WorkingModel
from bundleLib.oracleLib import OracleConfig
from bundleLib.plotLib import writeHistoryCsv, writeTraceCsv
from bundleLib.problemLib import CallableProblem, PiecewiseInstance
from bundleLib.tangentLib import Polyhedron
from bundleLib.utilities import ConfigError, InputError, SolverFailure


# ===============================================================================
#  ratios and proximity updates
# ===============================================================================
def test_acceptance_ratio_examples():
    assert acceptanceRatio(1.0,0.25,0.25) == 1.0
    assert acceptanceRatio(1.0,0.5,0.0) == 0.5
    assert acceptanceRatio(1.0,1.5,0.0) < 0
    with pytest.raises(ZeroDivisionError):
        acceptanceRatio(1.0,1.0,1.0)


def test_secondary_ratio_examples():
    assert secondaryRatio(1.0,0.0,0.0) == 1.0
    assert secondaryRatio(1.0,1.0,0.0) == 0.0
    assert secondaryRatio(1.0,0.8,0.0) == pytest.approx(0.2)
    with pytest.raises(ZeroDivisionError):
        secondaryRatio(1.0,0.5,2.0)


def test_update_tau_inner():
    assert updateTauInner(3.0,0.9,0.5) == 6.0
    assert updateTauInner(3.0,0.1,0.5) == 3.0
    assert updateTauInner(3.0,0.5,0.5) == 6.0


def test_update_memory_examples():
    params = DriverParams()
    Q = np.zeros((2,2))
    assert updateMemory(4.0,params.Gamma,params,Q) == 2.0
    assert updateMemory(4.0,0.5*(params.gamma+params.Gamma),params,Q) == 4.0
    assert updateMemory(2*params.T,0.3,params,Q) == params.T
    assert memoryBeforeSafeguard(4.0,0.99,params) == 2.0


def test_update_memory_restores_definiteness():
    params = DriverParams()
    memory = updateMemory(1.0,0.3,params,-3.0*np.eye(2))
    assert memory == pytest.approx(3.3)
    assert updateMemory(8.0,0.9,params,-3.0*np.eye(2)) == 4.0


def test_initial_memory():
    assert initialMemory(np.zeros((2,2))) == 1.0
    assert initialMemory(np.diag([-10.0,1.0])) == pytest.approx(11.0)


def test_clip_curvature():
    q = 5.0
    Q = np.array([[1.0,0.5],[0.5,-2.0]])
    np.testing.assert_array_equal(clipCurvature(Q,q),Q)
    np.testing.assert_allclose(clipCurvature(np.diag([3*q,0.0]),q),np.diag([q,0.0]),atol=1e-12)
    np.testing.assert_array_equal(clipCurvature(np.zeros((3,3)),q),np.zeros((3,3)))
    clipped = clipCurvature(np.array([[0.0,10.0],[10.0,0.0]]),q)
    np.testing.assert_allclose(clipped,clipped.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(clipped),[-q,q])


def test_params_ordering():
    assert DriverParams().check() == []
    assert DriverParams(gamma=0.6,Gamma=0.6).check()
    assert DriverParams(gamma_tilde=0.005).check()
    assert DriverParams(q=1e9,T=1e8).check()
    with pytest.raises(ConfigError):
        DriverParams(gamma=0.6).validate()
    with pytest.raises(ConfigError):
        DriverParams(omega=1.0)


# ===============================================================================
#  inner loop
# ===============================================================================
def test_smooth_quadratic_first_trial_accepted():
    H = np.array([[3.0,1.0],[1.0,2.0]])
    problem = PiecewiseInstance([(H,[1.0,-1.0],0.0)])
    x = np.array([1.0,1.0])
    f = problem.value(x)
    model = WorkingModel(x,f,[Plane(f,problem.clarkeSubgradient(x),'exactness')],problem.curvature(x))
    outcome,y_data,info = innerLoop(x,model,ProxState(1e3,1e3),DriverParams(),problem)
    assert outcome == 'serious'
    assert info['rho'] == pytest.approx(1.0,abs=1e-9)
    assert info['null_steps'] == 0


def test_absolute_value_is_stationary_at_kink(abs_problem):
    history = solve(abs_problem,x_start=[0.0])
    assert history.stop_reason == 'model-stationary'
    assert history.serious == []
    assert history.f_final == 0.0


def test_negative_absolute_value_leaves_kink(vee_problem):
    # seeded with the slope +1 branch, the first trial -1 is accepted
    box = Polyhedron.box([-1.0],[1.0])
    history = solve(vee_problem,box,[0.0])
    assert len(history.serious) >= 1
    assert history.serious[0].value < 0
    assert history.f_final == pytest.approx(-1.0)
    assert history.stop_reason in STOP_REASONS
    for g in (1.0,-1.0):
        model = WorkingModel([0.0],0.0,[Plane(0.0,[g],'exactness')])
        outcome,y_data,info = innerLoop([0.0],model,ProxState(1.0,1.0),DriverParams(),vee_problem)
        assert outcome == 'serious'
        assert y_data.value < 0


# ===============================================================================
#  full runs
# ===============================================================================
def test_convex_box_least_squares(rng):
    M = rng.normal(size=(20,10))
    v = 3.0*rng.normal(size=20)
    lo,hi = -0.3*np.ones(10),0.3*np.ones(10)
    H = M.T.dot(M)
    problem = PiecewiseInstance([(H,-M.T.dot(v),0.5*v.dot(v))])
    params = DriverParams(tol1=1e-9,tol2=1e-9)
    history = solve(problem,Polyhedron.box(lo,hi),np.zeros(10),params)
    reference = scipy.optimize.lsq_linear(M,v,bounds=(lo,hi),method='bvls',tol=1e-12)
    assert history.status == 'converged'
    assert len(history.serious) < 15
    np.testing.assert_allclose(history.x_final,reference.x,atol=1e-6)
    assert np.all(history.x_final <= hi+1e-9) and np.all(history.x_final >= lo-1e-9)


def test_smooth_interior_minimum():
    H = np.array([[4.0,1.0,0.0],[1.0,3.0,0.5],[0.0,0.5,2.0]])
    p = np.array([1.0,-2.0,0.5])
    problem = PiecewiseInstance([(H,p,0.0)])
    history = solve(problem,x_start=[2.0,2.0,-1.0])
    np.testing.assert_allclose(history.x_final,np.linalg.solve(H,-p),atol=1e-4)


def test_smooth_quadratic_converges_from_far():
    # recycled tangents line up with the new exactness plane near the minimum
    H = np.array([[2.0,0.5],[0.5,1.0]])
    p = np.array([-1.0,0.5])
    problem = PiecewiseInstance([(H,p,0.0)])
    history = solve(problem,x_start=[10.0,-7.0])
    assert history.status == 'converged'
    np.testing.assert_allclose(history.x_final,np.linalg.solve(H,-p),atol=1e-4)
    assert all(record.kkt_residual <= 1e-7 for record in history.trace)


@pytest.mark.parametrize('variant',['standard','downshift','modified'])
def test_separable_min_problem_every_oracle(corpus,variant):
    entry = corpus['U2']
    history = solve(entry.problem,entry.constraints(),entry.start,oracle=OracleConfig(variant=variant))
    assert history.status == 'converged'
    assert history.isStrictlyDecreasing()
    assert history.f_final <= entry.problem.value(entry.start)
    if variant == 'modified':
        assert history.f_final - entry.f_opt <= 1e-3*entry.lipschitzBound()


def test_stationarity_residual_reported(corpus):
    entry = corpus['U2']
    history = solve(entry.problem,entry.constraints(),entry.start)
    if entry.constraints().m:
        assert history.stationarity_residual is None
    else:
        assert history.stationarity_residual == pytest.approx(entry.problem.stationarityResidual(history.x_final))
    assert history.tangent_kkt_residual <= 1e-7
    assert solve(PiecewiseInstance([(np.eye(1),[1.0],0.0)]),x_start=[1.0]).stationarity_residual is None


@pytest.fixture(scope='module')
def corpus_runs():
    from bundleLib.problemLib import loadCorpus
    runs = {}
    for ident,entry in loadCorpus().items():
        runs[ident] = (entry,solve(entry.problem,entry.constraints(),entry.start))
    return runs


@pytest.mark.parametrize('ident',['L1','L2','L3','U1','U2'])
def test_corpus_converges(corpus_runs,ident):
    entry,history = corpus_runs[ident]
    L = entry.lipschitzBound()
    assert history.status == 'converged'
    assert history.stop_reason in STOP_REASONS
    assert history.f_final - entry.f_opt <= 1e-3*L
    assert history.isStrictlyDecreasing()
    assert entry.constraints().isFeasible(history.x_final)


@pytest.mark.parametrize('ident',['L1','L2','L3','U1','U2'])
def test_trace_bookkeeping(corpus_runs,ident):
    entry,history = corpus_runs[ident]
    params = DriverParams()
    previous = None
    for record in history.trace:
        scale = 1.0 + abs(record.f_x)
        assert record.kkt_residual <= 1e-7
        if record.kind == 'null':
            assert record.phi_next_y >= record.phi_y - 1e-8*scale
            assert record.rho < params.gamma
            assert record.aggregate_gap <= 1e-8*scale
            assert (record.tau_next == 2*record.tau) == (record.rho_tilde >= params.gamma_tilde)
            assert record.branch in ('standard','downshift')
        if previous is not None and previous.j == record.j:
            assert record.tau == previous.tau_next >= previous.tau
        previous = record
    for step in history.serious:
        assert step.rho >= params.gamma
        halved = step.rho >= params.Gamma
        assert step.memory_raw == (0.5*step.tau_final if halved else step.tau_final)
        assert step.memory <= params.T
        assert step.memory >= min(step.memory_raw,params.T)


def test_runs_are_deterministic(corpus,tmp_path):
    entry = corpus['L2']
    paths = []
    for name in ('first','second'):
        history = solve(entry.problem,entry.constraints(),entry.start)
        paths.append((writeHistoryCsv(str(tmp_path/(name+'_history.csv')),history),
                      writeTraceCsv(str(tmp_path/(name+'_trace.csv')),history)))
    for a,b in zip(*paths):
        with open(a,'rb') as fa, open(b,'rb') as fb:
            assert fa.read() == fb.read()


def test_callback_sees_every_record(corpus):
    entry = corpus['L1']
    seen = []
    history = BundleSolver(entry.problem,callback=seen.append).solve(entry.start)
    assert seen == history.trace
    assert len(history.serious) == sum(1 for r in seen if r.kind == 'serious')


@pytest.mark.parametrize('variant',['standard','downshift','modified'])
def test_oracle_variants_reach_minimum(corpus,variant):
    entry = corpus['U1']
    history = solve(entry.problem,entry.constraints(),entry.start,oracle=OracleConfig(variant=variant))
    assert history.f_final <= entry.problem.value(entry.start)
    assert history.isStrictlyDecreasing()


def test_infeasible_start(corpus):
    entry = corpus['U1']
    with pytest.raises(InputError):
        solve(entry.problem,entry.constraints(),[5.0])
    with pytest.raises(InputError):
        solve(entry.problem,entry.constraints(),[1.0,1.0])


def test_constraint_dimension_mismatch(abs_problem):
    with pytest.raises(ConfigError):
        BundleSolver(abs_problem,Polyhedron.empty(2))


def test_tau_overflow_reports_failure():
    # subgradient +1 everywhere is wrong for u < 0, so the model never catches up
    wrong = CallableProblem(1,lambda x: abs(x[0]),lambda x: np.ones(1))
    with pytest.raises(SolverFailure) as failure:
        solve(wrong,x_start=[1.0],params=DriverParams(tau_overflow=100.0))
    history = failure.value.history
    assert history.status == 'failed'
    assert failure.value.diagnostics['tau'] > 100.0
    assert history.fallback_used or history.serious
