# -*- coding: utf-8 -*-
import numpy as np
import pytest

from bundleLib.Entities import Plane, WorkingModel
from bundleLib.tangentLib import Polyhedron, TangentSolver, checkPositiveDefinite, solveTangent
from bundleLib.utilities import InfeasibleError, StructureError


def model_of(x,planes,Q=None,f_x=0.0):
    return WorkingModel(x,f_x,[Plane(a,g) for a,g in planes],Q)


def test_positive_definite_examples():
    assert checkPositiveDefinite(np.zeros((2,2)),1.0)
    assert not checkPositiveDefinite(-2*np.eye(2),1.0)
    assert checkPositiveDefinite(np.diag([-1.0,3.0]),1.5)
    assert not checkPositiveDefinite(np.diag([-1.0,3.0]),1.0)


def test_single_plane_closed_form():
    x = np.array([0.5,-1.0])
    g = np.array([2.0,-4.0])
    for tau in (1.0,4.0):
        sol = solveTangent(model_of(x,[(0.0,g)]),tau)
        np.testing.assert_allclose(sol.trial_point,x-g/tau,atol=1e-12)
        np.testing.assert_allclose(sol.multipliers.plane_multipliers,[1.0])
        assert sol.kkt_residual <= 1e-7


def test_kink_of_absolute_value():
    sol = solveTangent(model_of([0.3],[(0.0,[1.0]),(0.0,[-1.0])]),1.0)
    np.testing.assert_allclose(sol.trial_point,[0.3],atol=1e-12)
    np.testing.assert_allclose(sol.multipliers.plane_multipliers,[0.5,0.5],atol=1e-12)
    assert sol.model_value == pytest.approx(0.0,abs=1e-12)


def test_binding_constraint_multiplier():
    x = np.array([1.0,2.0])
    constraints = Polyhedron([[1.0,0.0]],[1.0])
    sol = solveTangent(model_of(x,[(0.0,[-1.0,0.0])]),1.0,constraints)
    np.testing.assert_allclose(sol.trial_point,x,atol=1e-12)
    np.testing.assert_allclose(sol.multipliers.constraint_multipliers,[1.0],atol=1e-10)
    assert sol.kkt_residual <= 1e-7


def test_curvature_enters_the_step():
    # Q = diag(1, 3), tau = 1: y = x - g/(1+q_i)
    sol = solveTangent(model_of([0.0,0.0],[(0.0,[2.0,8.0])],np.diag([1.0,3.0])),1.0)
    np.testing.assert_allclose(sol.trial_point,[-1.0,-2.0],atol=1e-12)


def test_not_positive_definite_is_rejected():
    with pytest.raises(StructureError):
        solveTangent(model_of([0.0],[(0.0,[1.0])],[[-2.0]]),1.0)


def test_infeasible_serious_point():
    constraints = Polyhedron([[1.0]],[0.0])
    with pytest.raises(InfeasibleError):
        solveTangent(model_of([1.0],[(0.0,[1.0])]),1.0,constraints)


def test_polyhedron_box_rows():
    box = Polyhedron.box([-1.0,-np.inf],[2.0,np.inf])
    assert box.m == 2 and box.n == 2
    assert box.isFeasible([0.0,100.0])
    assert box.violation([3.0,0.0]) == pytest.approx(1.0)
    with pytest.raises(StructureError):
        Polyhedron(np.zeros((2,2)),[1.0])


def test_factor_cached_and_warm_start_reused():
    solver = TangentSolver()
    x = np.zeros(2)
    model = model_of(x,[(0.0,[1.0,0.0]),(-0.5,[-1.0,1.0])])
    def total(sol):
        d = sol.trial_point - x
        return sol.model_value + d.dot(d)
    first = solver.solve(model,2.0)
    model.addPlane(Plane(-0.25,[0.0,-1.0]))
    second = solver.solve(model,2.0)
    assert solver.factorizations == 1
    assert total(second) >= total(first) - 1e-12
    solver.solve(model,4.0)
    assert solver.factorizations == 2


def test_model_descent():
    sol = solveTangent(model_of([1.0,1.0],[(0.0,[1.0,2.0]),(-1.0,[-3.0,0.5])]),0.5)
    d = sol.trial_point - np.array([1.0,1.0])
    assert sol.model_value + 0.25*d.dot(d) <= 0.0 + 1e-12


# ===============================================================================
#  random instances against a grid
# ===============================================================================
def random_instance(rng):
    n = 2
    p = int(rng.integers(1,5))
    m = int(rng.integers(0,4))
    a = -rng.random(p)
    a[0] = 0.0
    G = 0.5*rng.normal(size=(p,n))
    U = np.linalg.qr(rng.normal(size=(n,n)))[0]
    Q = U.dot(np.diag(rng.uniform(-0.5,1.0,n))).dot(U.T)
    x = rng.uniform(-0.5,0.5,n)
    A = rng.normal(size=(m,n))
    b = A.dot(x) + rng.random(m)
    return x,a,G,Q,A,b


def grid_objective(a,G,H,A,r,D):
    F = np.max(D.dot(G.T)+a,axis=1) + 0.5*np.einsum('mi,ij,mj->m',D,H,D)
    if A.shape[0]:
        F[np.any(D.dot(A.T) > r,axis=1)] = np.inf
    return F


def test_random_instances_against_grid(rng):
    tau = 2.0
    res = 5e-3
    axis = np.arange(-1.5,1.5+res/2,res)
    D = np.array(np.meshgrid(axis,axis,indexing='ij')).reshape(2,-1).T
    for _ in range(25):
        x,a,G,Q,A,b = random_instance(rng)
        constraints = Polyhedron(A,b)
        model = WorkingModel(x,0.0,[Plane(ai,gi) for ai,gi in zip(a,G)],Q)
        sol = solveTangent(model,tau,constraints)
        assert sol.kkt_residual <= 1e-7
        sol.multipliers.validate()
        assert constraints.isFeasible(sol.trial_point)
        d = sol.trial_point - x
        assert np.all(np.abs(d) <= 1.5)
        H = Q + tau*np.eye(2)
        best = sol.model_value + 0.5*tau*d.dot(d)
        F = grid_objective(a,G,H,A,b-A.dot(x),D)
        k = int(np.argmin(F))
        assert best <= F[k] + 1e-10
        # strong convexity: the grid minimizer lies close to the exact one
        mu = np.linalg.eigvalsh(H)[0]
        gap = F[k] - best
        assert gap <= 5e-2
        assert np.linalg.norm(D[k]-d) <= np.sqrt(2*gap/mu) + 1e-9


# ===============================================================================
#  dependent working rows
# ===============================================================================
def test_repeated_rows_get_minimum_norm_multipliers():
    solver = TangentSolver()
    factor = solver._factorize(np.zeros((2,2)),1.0)
    s = -np.ones(3)
    d,t,mu = solver._equalitySolve(factor,np.array([[1.0,1.0],[1.0,1.0],[-1.0,1.0]]),s,np.zeros(3))
    np.testing.assert_allclose(d,[0.0,-1.0],atol=1e-12)
    assert t == pytest.approx(-1.0)
    assert np.sum(mu) == pytest.approx(1.0)
    assert mu[0] == pytest.approx(mu[1])
    # same normal, different offsets: no point satisfies both
    assert solver._equalitySolve(factor,np.array([[1.0,1.0],[1.0,1.0]]),-np.ones(2),np.array([0.0,1.0])) is None


def test_rows_in_the_working_span_are_skipped():
    Nall = np.array([[1.0,1.0],[-1.0,1.0],[0.0,1.0],[0.0,1.0]])
    sall = np.array([-1.0,-1.0,-1.0,0.0])
    row_norms = np.sqrt(np.sum(Nall*Nall,axis=1)+sall*sall)
    kept = TangentSolver._independent(Nall,sall,row_norms,[0,1],np.array([2,3]))
    assert kept.tolist() == [3]
    assert TangentSolver._dropIndex([0,3,1],2) == 2
    assert TangentSolver._dropIndex([0,3],2) == 1
    assert TangentSolver._dropIndex([0],2) is None


def test_duplicate_and_aggregate_planes_solve(rng):
    x = np.array([0.3,-0.2])
    Q = np.diag([0.5,1.0])
    base = [Plane(0.0,[1.0,1.0]),Plane(-0.1,[-1.0,1.0]),Plane(-0.3,[0.5,-2.0])]
    reference = solveTangent(WorkingModel(x,0.0,base,Q),1.5)
    for _ in range(10):
        lam = rng.dirichlet(np.ones(3))
        aggregate = Plane(float(lam.dot([p.offset for p in base])),lam.dot([p.gradient for p in base]),'aggregate')
        model = WorkingModel(x,0.0,base,Q)
        # bypass merging: repeated rows as they arrive from rounding
        model.planes = base + [aggregate,Plane(base[1].offset,base[1].gradient.copy())]
        solver = TangentSolver()
        for _ in range(2):
            sol = solver.solve(model,1.5)
            np.testing.assert_allclose(sol.trial_point,reference.trial_point,atol=1e-10)
            assert sol.kkt_residual <= 1e-7
            sol.multipliers.validate()
