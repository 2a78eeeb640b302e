# -*- coding: utf-8 -*-
"""
Created on Tue Mar 12 10:02:51 2024

@author: bundleLib developers

Core entities of the cutting plane model: planes, multiplier sets and the working model.
"""
import logging

import numpy as np

from bundleLib.utilities import StructureError, ConfigError, asVector, asSymmetric

log = logging.getLogger(__name__)

PLANE_TAGS = ('exactness','cutting','aggregate','recycled')

#planes with offsets above f(x) by less than this (relative) are clamped to f(x)
OFFSET_TOLERANCE = 1e-9

#planes whose gradients agree to this (relative, max norm) are merged
DUPLICATE_TOLERANCE = 1e-12

# ===============================================================================
#  PLANE CLASS
#       affine function a + g'(y-x) anchored at the serious point x
# ===============================================================================
class Plane:
    '''
    Affine minorant candidate of the objective.

    The offset is the plane's value at the serious point it is anchored to,
    so moving the anchor is a pure shift of the offset.
    '''
    __slots__ = ('offset','gradient','tag','origin')

    def __init__(self,offset,gradient,tag='cutting',origin=None):
        if tag not in PLANE_TAGS:
            raise StructureError('unknown plane tag: '+str(tag))
        self.offset = float(offset)
        self.gradient = asVector(gradient,name='plane gradient')
        self.tag = tag
        self.origin = None if origin is None else asVector(origin,name='plane origin')

    def value(self,y,x):
        # value of the plane at y when anchored at x
        return self.offset + float(np.dot(self.gradient,np.asarray(y,dtype=float)-x))

    def retagged(self,tag):
        return Plane(self.offset,self.gradient,tag,self.origin)

    def __repr__(self):
        return 'Plane(%s, a=%.6g, |g|=%.6g)' % (self.tag,self.offset,np.linalg.norm(self.gradient))

# ===============================================================================
#  MULTIPLIER SET CLASS
# ===============================================================================
class MultiplierSet:
    '''
    Dual weights of the tangent program: one per plane, one per row of Ay <= b.
    '''
    def __init__(self,plane_multipliers,constraint_multipliers=()):
        self.plane_multipliers = np.array(plane_multipliers,dtype=float).reshape(-1)
        self.constraint_multipliers = np.array(constraint_multipliers,dtype=float).reshape(-1)

    def validate(self,tol=1e-8,neg_tol=1e-10):
        # raise StructureError unless the plane weights are a convex combination
        lam = self.plane_multipliers
        if lam.size == 0:
            raise StructureError('multiplier set without plane weights')
        if np.min(lam) < -neg_tol or (self.constraint_multipliers.size and np.min(self.constraint_multipliers) < -neg_tol):
            raise StructureError('negative multiplier')
        if abs(np.sum(lam)-1.0) > tol:
            raise StructureError('plane multipliers sum to '+repr(float(np.sum(lam)))+', not 1')
        return self

    def active(self,threshold=1e-10):
        # indices of planes carrying weight
        return [i for i,l in enumerate(self.plane_multipliers) if l > threshold]

# ===============================================================================
#  WORKING MODEL CLASS
#       phi(y) = max_i a_i + g_i'(y-x),   Phi(y) = phi(y) + 1/2 (y-x)'Q(y-x)
# ===============================================================================
class WorkingModel:

    def __init__(self,serious_point,f_x,planes=(),curvature=None,plane_budget=100,q=None):
        self.serious_point = asVector(serious_point,name='serious point')
        self.n = self.serious_point.shape[0]
        self.f_x = float(f_x)
        if curvature is None:
            curvature = np.zeros((self.n,self.n))
        self.curvature = asSymmetric(curvature,self.n,name='curvature')
        if q is not None:
            eig = np.linalg.eigvalsh(self.curvature)
            if eig[0] < -q*(1+1e-12) or eig[-1] > q*(1+1e-12):
                raise StructureError('curvature spectrum ['+repr(eig[0])+', '+repr(eig[-1])+'] exceeds the bound q='+repr(q))
        if int(plane_budget) < 1:
            raise ConfigError('plane budget must be positive')
        self.plane_budget = int(plane_budget)
        self.planes = []
        for plane in planes:
            self.addPlane(plane)

    # ---------------------------------------------------------------------------
    #  plane bookkeeping
    # ---------------------------------------------------------------------------
    def addPlane(self,plane):
        '''
        Append a plane, clamping offsets that exceed f(x) by rounding only.

        A plane whose gradient repeats one already in the model is merged
        with it: the one with the larger offset survives (an exactness plane
        wins ties) and is returned, so phi is unchanged.
        '''
        if plane.gradient.shape[0] != self.n:
            raise StructureError('plane gradient has dimension '+str(plane.gradient.shape[0])+', expected '+str(self.n))
        excess = plane.offset - self.f_x
        if excess > 0:
            if excess > OFFSET_TOLERANCE*(1.0+abs(self.f_x)):
                raise StructureError('plane offset %.12g exceeds f(x) = %.12g' % (plane.offset,self.f_x))
            plane.offset = self.f_x
        i = self.findDuplicate(plane)
        if i is None:
            self.planes.append(plane)
            return plane
        old = self.planes[i]
        if plane.offset > old.offset or (plane.offset == old.offset and plane.tag == 'exactness'):
            self.planes[i] = plane
            return plane
        return old

    def addPlanes(self,planes):
        # the planes actually held by the model, merged duplicates resolved
        return [self.addPlane(plane) for plane in planes]

    def findDuplicate(self,plane,tol=DUPLICATE_TOLERANCE):
        # index of a plane with the same gradient, or None
        if not self.planes:
            return None
        diff = np.max(np.abs(self.gradients()-plane.gradient),axis=1)
        scale = tol*(1.0+np.max(np.abs(plane.gradient)))
        hits = np.flatnonzero(diff <= scale)
        return int(hits[0]) if hits.size else None

    def __len__(self):
        return len(self.planes)

    def offsets(self):
        return np.array([p.offset for p in self.planes])

    def gradients(self):
        # p x n matrix of plane gradients
        if not self.planes:
            return np.zeros((0,self.n))
        return np.vstack([p.gradient for p in self.planes])

    def newest(self,tag):
        for plane in reversed(self.planes):
            if plane.tag == tag:
                return plane
        return None

    def hasExactness(self,tol=1e-12):
        # rule: at least one plane reproduces f at the serious point
        return any(abs(p.offset-self.f_x) <= tol*(1.0+abs(self.f_x)) for p in self.planes)

    # ---------------------------------------------------------------------------
    #  evaluation
    # ---------------------------------------------------------------------------
    def evalFirstOrder(self,y):
        if not self.planes:
            raise StructureError('working model has no planes')
        d = asVector(y,self.n,name='trial point') - self.serious_point
        return float(np.max(self.offsets() + self.gradients().dot(d)))

    def evalSecondOrder(self,y):
        d = asVector(y,self.n,name='trial point') - self.serious_point
        return self.evalFirstOrder(y) + 0.5*float(d.dot(self.curvature.dot(d)))

    def activePlanes(self,y,tol=1e-9):
        # indices of planes attaining phi(y)
        d = asVector(y,self.n) - self.serious_point
        values = self.offsets() + self.gradients().dot(d)
        top = np.max(values)
        return [i for i,v in enumerate(values) if v >= top - tol*(1.0+abs(top))]

    # ---------------------------------------------------------------------------
    #  aggregation and pruning
    # ---------------------------------------------------------------------------
    def aggregatePlane(self,mult):
        '''
        Convex combination of the planes with the tangent program's weights.
        '''
        lam = mult.plane_multipliers
        if lam.shape[0] != len(self.planes):
            raise StructureError('%d plane multipliers for %d planes' % (lam.shape[0],len(self.planes)))
        mult.validate()
        offset = float(lam.dot(self.offsets()))
        gradient = lam.dot(self.gradients())
        return Plane(min(offset,self.f_x),gradient,'aggregate',self.serious_point)

    def prune(self,protected=()):
        # drop oldest unprotected planes until the budget holds; modifies in place
        keep = set(id(p) for p in protected if p is not None)
        n_protected = sum(1 for p in self.planes if id(p) in keep)
        if n_protected > self.plane_budget:
            raise ConfigError('plane budget %d is smaller than the %d protected planes' % (self.plane_budget,n_protected))
        excess = len(self.planes) - self.plane_budget
        if excess <= 0:
            return self
        kept = []
        for plane in self.planes:
            if excess > 0 and id(plane) not in keep:
                excess -= 1
                continue
            kept.append(plane)
        log.debug('pruned %d planes, %d remain',len(self.planes)-len(kept),len(kept))
        self.planes = kept
        return self

    def copy(self):
        model = WorkingModel(self.serious_point,self.f_x,(),self.curvature,self.plane_budget)
        model.planes = list(self.planes)
        return model
