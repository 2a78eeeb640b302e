# -*- coding: utf-8 -*-
"""
Created on Thu Mar 14 16:05:40 2024

@author: bundleLib developers

Problem contract and the synthetic corpus of max- and min-structured test functions.
"""
import json
import logging
import os

import numpy as np

from bundleLib.utilities import ConfigError, UnsupportedProblemError, asVector, asSymmetric

log = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)),'fixtures')

# ===============================================================================
#  PROBLEM HANDLE
#       master class for objectives seen only through values and subgradients
# ===============================================================================
class ProblemHandle:
    '''
    Locally Lipschitz objective f on R^n.

    Subclasses provide value and clarkeSubgradient; attainingSubgradient
    returns g in the Clarke subdifferential at x with g'd = f0(x,d) and may
    raise UnsupportedProblemError for black-box objectives. curvature
    defaults to the zero matrix.
    '''
    name = 'problem'

    def __init__(self,dimension):
        self.dimension = int(dimension)

    def value(self,x):
        raise NotImplementedError

    def clarkeSubgradient(self,x):
        raise NotImplementedError

    def attainingSubgradient(self,x,d):
        raise UnsupportedProblemError(self.name+' cannot supply subgradients attaining the Clarke directional derivative')

    def curvature(self,x):
        return np.zeros((self.dimension,self.dimension))

class CallableProblem(ProblemHandle):
    '''
    Black-box wrapper around plain callables.
    '''
    def __init__(self,dimension,value,subgradient,attaining=None,curvature=None,name='callable'):
        ProblemHandle.__init__(self,dimension)
        self._value = value
        self._subgradient = subgradient
        self._attaining = attaining
        self._curvature = curvature
        self.name = name

    def value(self,x):
        return float(self._value(asVector(x,self.dimension)))

    def clarkeSubgradient(self,x):
        return asVector(self._subgradient(asVector(x,self.dimension)),self.dimension)

    def attainingSubgradient(self,x,d):
        if self._attaining is None:
            return ProblemHandle.attainingSubgradient(self,x,d)
        return asVector(self._attaining(asVector(x,self.dimension),asVector(d,self.dimension)),self.dimension)

    def curvature(self,x):
        if self._curvature is None:
            return ProblemHandle.curvature(self,x)
        return asSymmetric(self._curvature(asVector(x,self.dimension)),self.dimension)

# ===============================================================================
#  PIECEWISE QUADRATIC INSTANCES
#       f(x) = max_i or min_i  1/2 x'H_i x + p_i'x + r_i
# ===============================================================================
class PiecewiseInstance(ProblemHandle):

    def __init__(self,branches,combiner='max',box=None,name='piecewise'):
        if combiner not in ('max','min'):
            raise ConfigError('combiner must be max or min, got '+str(combiner))
        if not branches:
            raise ConfigError('piecewise instance needs at least one branch')
        self.H = []
        self.p = []
        self.r = []
        n = asVector(branches[0][1]).shape[0]
        for H,p,r in branches:
            self.H.append(asSymmetric(H,n,name='branch Hessian'))
            self.p.append(asVector(p,n,name='branch linear term'))
            self.r.append(float(r))
        self.H = np.array(self.H)
        self.p = np.array(self.p)
        self.r = np.array(self.r)
        ProblemHandle.__init__(self,n)
        self.combiner = combiner
        self.box = None if box is None else (asVector(box[0],n),asVector(box[1],n))
        self.name = name

    def branchValues(self,x):
        x = asVector(x,self.dimension)
        return 0.5*np.einsum('i,kij,j->k',x,self.H,x) + self.p.dot(x) + self.r

    def branchGradients(self,x):
        x = asVector(x,self.dimension)
        return np.einsum('kij,j->ki',self.H,x) + self.p

    def evalPiecewise(self,x):
        # (value, active branch indices); ties within TIE_TOLERANCE
        values = self.branchValues(x)
        best = np.max(values) if self.combiner == 'max' else np.min(values)
        tol = TIE_TOLERANCE*(1.0+abs(best))
        active = [int(k) for k in np.flatnonzero(np.abs(values-best) <= tol)]
        return float(best),active

    def value(self,x):
        return self.evalPiecewise(x)[0]

    def batchValues(self,X):
        # values at the rows of X
        X = np.atleast_2d(np.asarray(X,dtype=float))
        V = 0.5*np.einsum('mi,kij,mj->mk',X,self.H,X) + X.dot(self.p.T) + self.r
        return np.max(V,axis=1) if self.combiner == 'max' else np.min(V,axis=1)

    def clarkeSubgradient(self,x):
        # uniform average of active branch gradients
        active = self.evalPiecewise(x)[1]
        return np.mean(self.branchGradients(x)[active],axis=0)

    def attainingSubgradient(self,x,d):
        # active gradient with the largest slope along d (lowest index on ties)
        d = asVector(d,self.dimension)
        active = self.evalPiecewise(x)[1]
        grads = self.branchGradients(x)[active]
        return grads[int(np.argmax(grads.dot(d)))].copy()

    def attainingSubgradientPiecewise(self,x,d):
        return self.attainingSubgradient(x,d)

    def curvature(self,x):
        active = self.evalPiecewise(x)[1]
        return self.H[active[0]].copy()

    def lipschitzBound(self,box=None):
        # max branch gradient norm over the box corners (gradients are affine)
        lo,hi = box if box is not None else self.box
        n = self.dimension
        corners = np.array([[hi[i] if (c >> i) & 1 else lo[i] for i in range(n)] for c in range(2**n)])
        return float(max(np.max(np.linalg.norm(np.einsum('kij,mj->mki',self.H,corners)+self.p,axis=2)),0.0))

# ===============================================================================
#  SCALAR MIN LAWS
#       j(u) = min_i 1/2 k_i u^2 + b_i u + c_i
# ===============================================================================
class ScalarMinLaw:

    def __init__(self,pieces,name='law'):
        pieces = np.array(pieces,dtype=float)
        if pieces.ndim != 2 or pieces.shape[1] != 3 or pieces.shape[0] < 1:
            raise ConfigError('law pieces must be (k, b, c) triples')
        if np.any(pieces[:,0] < 0):
            raise ConfigError(name+': quadratic pieces must be convex (k >= 0)')
        self.k = pieces[:,0].copy()
        self.b = pieces[:,1].copy()
        self.c = pieces[:,2].copy()
        self.name = name

    @classmethod
    def fromVertexForm(cls,pieces,name='law'):
        # pieces given as (k, s, e) for 1/2 k (u-s)^2 + e, or ('linear', b, c)
        triples = []
        for piece in pieces:
            if piece[0] == 'linear':
                triples.append((0.0,float(piece[1]),float(piece[2])))
            else:
                k,s,e = (float(v) for v in piece)
                triples.append((k,-k*s,0.5*k*s*s+e))
        return cls(triples,name)

    def __len__(self):
        return self.k.shape[0]

    def pieceValues(self,u):
        u = np.asarray(u,dtype=float)
        return 0.5*self.k*u[...,None]**2 + self.b*u[...,None] + self.c

    def value(self,u):
        return np.min(self.pieceValues(u),axis=-1)

    def activeSet(self,u):
        values = self.pieceValues(float(u))
        best = np.min(values)
        return [int(i) for i in np.flatnonzero(values-best <= TIE_TOLERANCE*(1.0+abs(best)))]

    def pieceDerivatives(self,u):
        return self.k*float(u) + self.b

    def derivative(self,u,mode='average',direction=1.0):
        # one element of the Clarke derivative at u
        # mode: 'average' of active slopes, 'attaining' slope maximizing slope*direction, 'min' / 'max'
        active = self.activeSet(u)
        slopes = self.pieceDerivatives(u)[active]
        if mode == 'average':
            return float(np.mean(slopes)),active[0]
        if mode == 'attaining':
            i = int(np.argmax(slopes*direction))
            return float(slopes[i]),active[i]
        if mode == 'min':
            return float(np.min(slopes)),active[int(np.argmin(slopes))]
        return float(np.max(slopes)),active[int(np.argmax(slopes))]

    def curvatureAt(self,u):
        return float(self.k[self.activeSet(u)[0]])

    def linearPieces(self):
        return [i for i in range(len(self)) if self.k[i] == 0]

    def validate(self,u_max,samples=20001,require_linear=True):
        # continuity holds by construction; check every piece is active somewhere in [0,u_max]
        problems = []
        if require_linear and len(self.linearPieces()) != 1:
            problems.append(self.name+': expected exactly one linear piece, found %d' % len(self.linearPieces()))
        u = np.linspace(0.0,u_max,samples)
        owners = np.argmin(self.pieceValues(u),axis=-1)
        for i in range(len(self)):
            if not np.any(owners == i):
                problems.append(self.name+': piece %d is never active on [0, %g]' % (i,u_max))
        return problems

    def crossings(self,u_max,samples=20001):
        # approximate switch points of the active piece on [0,u_max]
        u = np.linspace(0.0,u_max,samples)
        owners = np.argmin(self.pieceValues(u),axis=-1)
        switch = np.flatnonzero(np.diff(owners) != 0)
        out = []
        for s in switch:
            i,j = owners[s],owners[s+1]
            out.append(self._crossing(i,j,u[s],u[s+1]))
        return out

    def _crossing(self,i,j,lo,hi):
        # root of piece_i - piece_j on [lo,hi] by bisection
        diff = lambda v: (0.5*self.k[i]*v*v+self.b[i]*v+self.c[i]) - (0.5*self.k[j]*v*v+self.b[j]*v+self.c[j])
        flo = diff(lo)
        for _ in range(200):
            mid = 0.5*(lo+hi)
            fm = diff(mid)
            if (fm <= 0) == (flo <= 0):
                lo,flo = mid,fm
            else:
                hi = mid
        return 0.5*(lo+hi)

# ===============================================================================
#  SEPARABLE MIN PROBLEMS
#       f(x) = 1/2 x'H0 x + p0'x + r0 + sum_nu w_nu j(x[dof_nu])
# ===============================================================================
class SeparableMinProblem(ProblemHandle):
    '''
    Smooth quadratic plus weighted scalar min-laws acting on single coordinates.

    Min of smooth pieces makes every law term upper-C1, and the Clarke
    subdifferential of the sum is the sum of the per-coordinate intervals.
    '''
    def __init__(self,H0,p0,dofs,weights,laws,r0=0.0,name='separable'):
        p0 = asVector(p0,name='linear term')
        ProblemHandle.__init__(self,p0.shape[0])
        self.H0 = asSymmetric(H0,self.dimension,name='quadratic term')
        self.p0 = p0
        self.r0 = float(r0)
        self.dofs = np.array(dofs,dtype=int).reshape(-1)
        self.weights = asVector(weights,self.dofs.shape[0],name='law weights')
        if isinstance(laws,ScalarMinLaw):
            laws = [laws]*self.dofs.shape[0]
        if len(laws) != self.dofs.shape[0]:
            raise ConfigError('one law per weighted coordinate required')
        if len(set(self.dofs.tolist())) != self.dofs.shape[0]:
            raise ConfigError('law coordinates must be distinct')
        self.laws = list(laws)
        self.name = name

    def smoothValue(self,x):
        return 0.5*float(x.dot(self.H0.dot(x))) + float(self.p0.dot(x)) + self.r0

    def smoothGradient(self,x):
        return self.H0.dot(x) + self.p0

    def lawEnergy(self,x):
        x = asVector(x,self.dimension)
        return float(sum(w*law.value(x[i]) for i,w,law in zip(self.dofs,self.weights,self.laws)))

    def value(self,x):
        x = asVector(x,self.dimension)
        return self.smoothValue(x) + self.lawEnergy(x)

    def _subgradient(self,x,mode,d=None):
        x = asVector(x,self.dimension)
        g = self.smoothGradient(x)
        for i,w,law in zip(self.dofs,self.weights,self.laws):
            direction = 1.0 if d is None else d[i]
            slope,_ = law.derivative(x[i],mode,direction)
            g[i] += w*slope
        return g

    def clarkeSubgradient(self,x):
        return self._subgradient(x,'average')

    def attainingSubgradient(self,x,d):
        return self._subgradient(x,'attaining',asVector(d,self.dimension))

    def curvature(self,x):
        x = asVector(x,self.dimension)
        Q = self.H0.copy()
        for i,w,law in zip(self.dofs,self.weights,self.laws):
            Q[i,i] += w*law.curvatureAt(x[i])
        return Q

    def activePieces(self,x):
        x = asVector(x,self.dimension)
        return [law.activeSet(x[i]) for i,law in zip(self.dofs,self.laws)]

    def stationarityResidual(self,x,nonnegative=(),active_tol=1e-12):
        '''
        Euclidean distance of 0 from the Clarke subdifferential plus the normal
        cone of {x[i] >= 0 for i in nonnegative}, coordinate by coordinate.
        '''
        x = asVector(x,self.dimension)
        g = self.smoothGradient(x)
        lo = g.copy()
        hi = g.copy()
        for i,w,law in zip(self.dofs,self.weights,self.laws):
            lo[i] += w*law.derivative(x[i],'min')[0]
            hi[i] += w*law.derivative(x[i],'max')[0]
        scale = 1.0 + np.max(np.abs(x),initial=0.0)
        for i in nonnegative:
            if x[i] <= active_tol*scale:
                #normal cone of -x_i <= 0 is (-inf, 0]
                lo[i] = -np.inf
        dist = np.where(lo > 0,lo,np.where(hi < 0,-hi,0.0))
        return float(np.linalg.norm(dist))

# ===============================================================================
#  GRID ORACLE
# ===============================================================================
def gridOracle(instance,box,resolution,max_points=5e7,chunk=200000):
    # exhaustive grid search for n <= 3; returns (x*, f*)
    lo,hi = (asVector(v) for v in box)
    n = lo.shape[0]
    if n > 3:
        raise ConfigError('grid oracle refuses n = %d > 3' % n)
    if resolution <= 0:
        raise ConfigError('grid resolution must be positive')
    axes = [np.linspace(lo[i],hi[i],int(round((hi[i]-lo[i])/resolution))+1) for i in range(n)]
    total = int(np.prod([len(a) for a in axes]))
    if total > max_points:
        raise ConfigError('grid of %d points exceeds the limit of %d' % (total,max_points))
    shape = [len(a) for a in axes]
    best_f = np.inf
    best_x = None
    batch = getattr(instance,'batchValues',None)
    for start in range(0,total,chunk):
        idx = np.arange(start,min(start+chunk,total))
        sub = np.unravel_index(idx,shape)
        X = np.column_stack([axes[i][sub[i]] for i in range(n)])
        F = batch(X) if batch is not None else np.array([instance.value(xx) for xx in X])
        k = int(np.argmin(F))
        if F[k] < best_f:
            best_f = float(F[k])
            best_x = X[k].copy()
    return best_x,best_f

# ===============================================================================
#  CORPUS
# ===============================================================================
def loadFixture(name):
    path = os.path.join(FIXTURE_DIR,name)
    with open(path) as f:
        return json.load(f)

class CorpusEntry:
    '''
    One synthetic test problem with its box, start point and known optimum.
    '''
    def __init__(self,ident,problem,start,box,x_opt,f_opt,description='',constrained=False):
        self.id = ident
        self.problem = problem
        self.start = asVector(start,problem.dimension)
        self.box = (asVector(box[0],problem.dimension),asVector(box[1],problem.dimension))
        self.x_opt = [asVector(x,problem.dimension) for x in x_opt]
        self.f_opt = float(f_opt)
        self.description = description
        self.constrained = constrained

    def constraints(self):
        from bundleLib.tangentLib import Polyhedron
        if self.constrained:
            return Polyhedron.box(*self.box)
        return Polyhedron.empty(self.problem.dimension)

    def lipschitzBound(self):
        return corpusLipschitz(self.problem,self.box)

def corpusLipschitz(problem,box,samples=2000,seed=0):
    # gradient bound over the box; exact corner bound for piecewise quadratics, sampled otherwise
    if isinstance(problem,PiecewiseInstance):
        return problem.lipschitzBound(box)
    rng = np.random.default_rng(seed)
    lo,hi = box
    X = lo + (hi-lo)*rng.random((samples,problem.dimension))
    return float(max(np.linalg.norm(problem.clarkeSubgradient(x)) for x in X))

def buildCorpusProblem(spec):
    kind = spec['kind']
    if kind == 'piecewise':
        branches = [(b['H'],b['p'],b['r']) for b in spec['branches']]
        return PiecewiseInstance(branches,spec['combiner'],spec.get('box'),spec.get('id','piecewise'))
    if kind == 'separable':
        law = ScalarMinLaw(spec['law'],spec['id']+' law')
        n = len(spec['p0'])
        return SeparableMinProblem(spec['H0'],spec['p0'],list(range(n)),spec.get('weights',[1.0]*n),law,spec.get('r0',0.0),spec['id'])
    raise ConfigError('unknown corpus kind '+str(kind))

def loadCorpus(path=None):
    # dict id -> CorpusEntry, in fixture order
    if path is None:
        data = loadFixture('corpus.json')
    else:
        with open(path) as f:
            data = json.load(f)
    corpus = {}
    for spec in data['instances']:
        problem = buildCorpusProblem(spec)
        corpus[spec['id']] = CorpusEntry(spec['id'],problem,spec['start'],spec['box'],spec['x_opt'],spec['f_opt'],
                                         spec.get('description',''),spec.get('constrained',False))
    log.debug('loaded %d corpus instances (fixture version %s)',len(corpus),data.get('version'))
    return corpus
