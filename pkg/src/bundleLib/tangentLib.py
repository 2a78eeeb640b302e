# -*- coding: utf-8 -*-
"""
Created on Wed Mar 13 14:20:08 2024

@author: bundleLib developers

Tangent program: minimize Phi(y) + tau/2 |y-x|^2 subject to Ay <= b.

Solved in epigraph form over z = (d,t), d = y-x:

    minimize    t + 1/2 d'(Q + tau I)d
    subject to  a_i + g_i'd <= t      (planes)
                A d <= b - A x        (rows)

by a primal active set method. Every equality subproblem is reduced with a
Schur complement on a cached Cholesky factor of Q + tau I.
"""
import logging
import warnings

import numpy as np
import scipy.linalg

from bundleLib.Entities import MultiplierSet
from bundleLib.utilities import InfeasibleError, SolverFailure, StructureError, asVector

log = logging.getLogger(__name__)

PD_THRESHOLD = 1e-12
DEPENDENCE_TOL = 1e-9      #relative residual below which a row lies in the span of the working set
KKT_SOLVE_TOL = 1e-10

# ===============================================================================
#  POLYHEDRON
# ===============================================================================
class Polyhedron:
    '''
    Feasible set {y : A y <= b}. An empty row set means unconstrained.
    '''
    def __init__(self,A,b):
        A = np.array(A,dtype=float)
        b = np.array(b,dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise StructureError('constraint matrix shape '+str(A.shape)+' does not match '+str(b.shape[0])+' right hand sides')
        self.A = A
        self.b = b

    @classmethod
    def empty(cls,n):
        return cls(np.zeros((0,n)),np.zeros(0))

    @classmethod
    def box(cls,lower,upper):
        # rows for lower <= y <= upper, infinite bounds skipped
        lower = asVector(lower)
        upper = asVector(upper,lower.shape[0])
        n = lower.shape[0]
        rows,rhs = [],[]
        for i in range(n):
            if np.isfinite(upper[i]):
                e = np.zeros(n); e[i]=1.0
                rows.append(e); rhs.append(upper[i])
            if np.isfinite(lower[i]):
                e = np.zeros(n); e[i]=-1.0
                rows.append(e); rhs.append(-lower[i])
        if not rows:
            return cls.empty(n)
        return cls(np.vstack(rows),rhs)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def violation(self,y):
        # largest positive part of A y - b
        if self.m == 0:
            return 0.0
        return float(max(0.0,np.max(self.A.dot(y)-self.b)))

    def isFeasible(self,y,tol=1e-9):
        return self.violation(y) <= tol*(1.0+np.max(np.abs(self.b),initial=0.0))

# ===============================================================================
#  SOLUTION
# ===============================================================================
class TangentSolution:

    def __init__(self,trial_point,model_value,multipliers,kkt_residual,first_order_value=None,iterations=0):
        self.trial_point = trial_point
        self.model_value = model_value            #Phi_k(y,x), prox term excluded
        self.multipliers = multipliers
        self.kkt_residual = kkt_residual          #relative, see TangentSolver.kktResidual
        self.first_order_value = first_order_value
        self.iterations = iterations

def checkPositiveDefinite(Q,tau):
    # True iff the smallest eigenvalue of Q + tau I exceeds PD_THRESHOLD
    Q = np.asarray(Q,dtype=float)
    if Q.size == 0:
        return tau > PD_THRESHOLD
    lowest = scipy.linalg.eigvalsh(Q,subset_by_index=[0,0],check_finite=False)[0]
    return bool(lowest + tau > PD_THRESHOLD)

# ===============================================================================
#  ACTIVE SET SOLVER
# ===============================================================================
class TangentSolver:
    '''
    Primal active set solver for the epigraph tangent program.

    One instance serves one inner loop: the Cholesky factor of Q + tau I is
    reused while tau and Q stay the same, and the final working set of one
    solve seeds the next.
    '''
    def __init__(self,max_iterations=None,tol=1e-11):
        self.max_iterations = max_iterations
        self.tol = tol
        self._factor = None
        self._tau = None
        self._Q = None
        self._working = None        #(plane objects, constraint row indices)
        self.factorizations = 0

    def reset(self):
        self._working = None

    def _factorize(self,Q,tau):
        if self._factor is not None and self._tau == tau and self._Q is Q:
            return self._factor
        H = Q + tau*np.eye(Q.shape[0])
        try:
            self._factor = scipy.linalg.cho_factor(H,lower=True,check_finite=False)
        except np.linalg.LinAlgError:
            raise StructureError('Q + tau I is not positive definite (tau = %g)' % tau)
        self._tau = tau
        self._Q = Q
        self.factorizations += 1
        return self._factor

    def _equalitySolve(self,factor,N,s,e):
        '''
        Minimize t + 1/2 d'Hd subject to N d + s t = e; returns d, t, mu or
        None when the rows are inconsistent. Rank deficient but consistent
        rows get the minimum norm multipliers.
        '''
        X = scipy.linalg.cho_solve(factor,N.T,check_finite=False)
        S = N.dot(X)
        w = N.shape[0]
        K = np.zeros((w+1,w+1))
        K[:w,:w] = S
        K[:w,w] = -s
        K[w,:w] = -s
        rhs = np.concatenate([-e,[1.0]])
        scale = 1.0 + np.max(np.abs(K)) + np.max(np.abs(rhs))
        sol = None
        with warnings.catch_warnings():
            warnings.simplefilter('ignore',scipy.linalg.LinAlgWarning)
            try:
                sol = scipy.linalg.solve(K,rhs,check_finite=False)
            except (np.linalg.LinAlgError,scipy.linalg.LinAlgError,ValueError):
                sol = None
            if sol is None or not np.all(np.isfinite(sol)) or np.linalg.norm(K.dot(sol)-rhs) > KKT_SOLVE_TOL*scale*(1.0+np.linalg.norm(sol)):
                try:
                    sol = scipy.linalg.lstsq(K,rhs,cond=1e-13,check_finite=False)[0]
                except (np.linalg.LinAlgError,scipy.linalg.LinAlgError,ValueError):
                    return None
        if not np.all(np.isfinite(sol)) or np.linalg.norm(K.dot(sol)-rhs) > KKT_SOLVE_TOL*scale*(1.0+np.linalg.norm(sol)):
            return None
        mu = sol[:w]
        t = sol[w]
        d = -X.dot(mu)
        return d,t,mu

    @staticmethod
    def _independent(Nall,sall,row_norms,W,candidates):
        # candidates whose rows (N, s) are not in the span of the working rows
        if candidates.size == 0:
            return candidates
        R = np.column_stack([Nall[W],sall[W]])
        basis = scipy.linalg.qr(R.T,mode='economic',check_finite=False)[0]
        V = np.column_stack([Nall[candidates],sall[candidates]])
        residual = V - V.dot(basis).dot(basis.T)
        keep = np.linalg.norm(residual,axis=1) > DEPENDENCE_TOL*row_norms[candidates]
        return candidates[keep]

    @staticmethod
    def _dropIndex(W,p):
        # most recently added row whose removal leaves a plane in the working set
        planes = sum(1 for k in W if k < p)
        for i in range(len(W)-1,-1,-1):
            if W[i] >= p or planes > 1:
                return i
        return None

    def solve(self,model,tau,constraints=None):
        x = model.serious_point
        n = model.n
        Q = model.curvature
        if constraints is None:
            constraints = Polyhedron.empty(n)
        if not model.planes:
            raise StructureError('working model has no planes')
        factor = self._factorize(Q,tau)

        a = model.offsets()
        G = model.gradients()
        p = a.shape[0]
        A = constraints.A
        r = constraints.b - A.dot(x) if constraints.m else np.zeros(0)
        m = r.shape[0]
        scale_r = 1.0 + np.max(np.abs(constraints.b),initial=0.0)
        if m and np.min(r) < -1e-9*scale_r:
            raise InfeasibleError('serious point violates Ay <= b by %g' % -np.min(r))
        r = np.maximum(r,0.0) if m else r

        #full constraint normals in z = (d,t): planes first, then rows
        Nall = np.vstack([G,A]) if m else G
        sall = np.concatenate([-np.ones(p),np.zeros(m)])
        eall = np.concatenate([-a,r])
        row_norms = np.sqrt(np.sum(Nall*Nall,axis=1) + sall*sall)

        W = self._warmStart(model,factor,Nall,sall,eall,p,m)
        if W is None:
            i0 = int(np.argmax(a))
            W = [i0]
            d = np.zeros(n)
            t = float(a[i0])
        else:
            W,d,t = W

        max_iter = self.max_iterations or (20*(p+m)+200)
        mu = None
        for it in range(1,max_iter+1):
            out = self._equalitySolve(factor,Nall[W],sall[W],eall[W])
            if out is None:
                #inconsistent rows: the current point satisfies the others, so drop the newest
                i = self._dropIndex(W,p)
                if i is None:
                    raise SolverFailure('singular working set in tangent program',{'working_set':list(W)})
                log.debug('tangent program: dropping dependent row %d',W[i])
                W.pop(i)
                continue
            d_star,t_star,mu = out
            step_d = d_star - d
            step_t = t_star - t
            zscale = 1.0 + np.linalg.norm(d) + abs(t)
            pnorm = np.sqrt(step_d.dot(step_d) + step_t*step_t)
            if pnorm > self.tol*zscale:
                #ratio test over independent constraints outside the working set
                inW = np.zeros(p+m,dtype=bool)
                inW[W] = True
                slope = Nall.dot(step_d) + sall*step_t
                slack = eall - Nall.dot(d) - sall*t
                alpha = 1.0
                block = -1
                candidates = np.flatnonzero(~inW & (slope > 1e-12*row_norms*pnorm))
                for k in self._independent(Nall,sall,row_norms,W,candidates):
                    ak = max(slack[k],0.0)/slope[k]
                    if ak < alpha:
                        alpha = ak
                        block = int(k)
                if block >= 0:
                    d = d + alpha*step_d
                    t = t + alpha*step_t
                    W.append(block)
                    continue
            #at the minimizer of the working set: check multiplier signs
            d,t = d_star,t_star
            if len(W) == 1 or np.min(mu) >= -1e-10*(1.0+np.max(np.abs(mu))):
                break
            W.pop(int(np.argmin(mu)))
        else:
            raise SolverFailure('tangent program active set did not terminate in %d iterations' % max_iter,{'working_set':list(W)})

        lam = np.zeros(p)
        eta = np.zeros(m)
        for k,muk in zip(W,mu):
            if k < p:
                lam[k] = muk
            else:
                eta[k-p] = muk
        lam = np.maximum(lam,0.0)
        total = np.sum(lam)
        if total <= 0:
            raise SolverFailure('tangent program returned no positive plane weight')
        lam = lam/total
        eta = np.maximum(eta,0.0)

        self._working = ([model.planes[k] for k in W if k < p],[k-p for k in W if k >= p])
        y = x + d
        phi = float(np.max(a + G.dot(d)))
        value = phi + 0.5*float(d.dot(Q.dot(d)))
        mult = MultiplierSet(lam,eta)
        kkt = self.kktResidual(Q,tau,a,G,A,r,d,phi,lam,eta)
        log.debug('tangent program: %d iterations, %d/%d active, kkt %.2e',it,len(W),p+m,kkt)
        return TangentSolution(y,value,mult,kkt,phi,it)

    def _warmStart(self,model,factor,Nall,sall,eall,p,m):
        # re-solve the previous working set and accept it if the point is feasible
        if self._working is None:
            return None
        planes,rows = self._working
        index = {id(pl):i for i,pl in enumerate(model.planes)}
        W = [index[id(pl)] for pl in planes if id(pl) in index]
        if not W:
            return None
        W += [p+j for j in rows if j < m]
        out = self._equalitySolve(factor,Nall[W],sall[W],eall[W])
        if out is None:
            return None
        d,t,mu = out
        slack = eall - Nall.dot(d) - sall*t
        if np.min(slack) < -1e-10*(1.0+np.max(np.abs(eall))):
            return None
        return W,d,t

    @staticmethod
    def kktResidual(Q,tau,a,G,A,r,d,t,lam,eta):
        # stationarity + complementarity + feasibility, relative to the stationarity terms
        Hd = Q.dot(d) + tau*d
        Gl = G.T.dot(lam)
        Ae = A.T.dot(eta) if A.shape[0] else np.zeros_like(d)
        stationarity = np.linalg.norm(Hd + Gl + Ae)
        plane_slack = a + G.dot(d) - t
        comp = float(np.sum(np.abs(lam*plane_slack)))
        feas = float(max(0.0,np.max(plane_slack)))
        if A.shape[0]:
            row_slack = A.dot(d) - r
            comp += float(np.sum(np.abs(eta*row_slack)))
            feas += float(max(0.0,np.max(row_slack)))
        scale = 1.0 + max(np.linalg.norm(Hd),np.linalg.norm(Gl),np.linalg.norm(Ae))
        return (stationarity + comp + feas)/scale

def solveTangent(model,tau,constraints=None,solver=None):
    # one-shot tangent program; pass a TangentSolver to keep its factor and working set
    solver = solver or TangentSolver()
    return solver.solve(model,tau,constraints)
