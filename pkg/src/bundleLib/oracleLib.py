# -*- coding: utf-8 -*-
"""
Created on Fri Mar 15 11:17:36 2024

@author: bundleLib developers

Cutting plane oracles: standard, downshifted tangent and the modified downshift,
plus recycling of planes when the serious point moves.
"""
import logging

import numpy as np

from bundleLib.Entities import Plane
from bundleLib.utilities import ConfigError, UnsupportedProblemError, asVector, mergeDefaults

log = logging.getLogger(__name__)

ORACLE_VARIANTS = ('standard','downshift','modified')

oracle_defaults = {'variant':'modified',
                   'downshift_coefficient':None,    #None: scaled from the starting point, see defaultDownshift
                   'allow_fallback':True}           #use any Clarke subgradient if the problem cannot attain f0

# ===============================================================================
#  CONFIGURATION
# ===============================================================================
class OracleConfig:

    def __init__(self,**kwargs):
        settings = mergeDefaults(oracle_defaults,kwargs,'oracle')
        self.variant = settings['variant']
        self.downshift_coefficient = settings['downshift_coefficient']
        self.allow_fallback = bool(settings['allow_fallback'])
        if self.variant not in ORACLE_VARIANTS:
            raise ConfigError('oracle variant must be one of '+', '.join(ORACLE_VARIANTS)+', got '+str(self.variant))
        if self.downshift_coefficient is not None and not self.downshift_coefficient > 0:
            raise ConfigError('downshift coefficient c must be positive')

    def asDict(self):
        return {'variant':self.variant,'downshift_coefficient':self.downshift_coefficient,'allow_fallback':self.allow_fallback}

def defaultDownshift(f_start,x_start):
    # c = 1e-2 (1 + |f(x1)|) / (1 + |x1|^2)
    x_start = np.asarray(x_start,dtype=float)
    return 1e-2*(1.0+abs(f_start))/(1.0+float(x_start.dot(x_start)))

# ===============================================================================
#  POINT DATA
# ===============================================================================
class PointData:
    '''
    Value and first order information of the objective at one point.

    directionalSubgradient(d) asks the problem for a subgradient attaining
    f0(x,d); without one it falls back to the stored Clarke subgradient
    (with a warning) unless fallback is disabled.
    '''
    def __init__(self,point,value,subgradient,attain=None,allow_fallback=True):
        self.point = asVector(point,name='point')
        self.value = float(value)
        self.subgradient = asVector(subgradient,self.point.shape[0],name='subgradient')
        self._attain = attain
        self.allow_fallback = allow_fallback
        self.fallback_used = False

    def directionalSubgradient(self,d):
        if self._attain is not None:
            try:
                return asVector(self._attain(self.point,d),self.point.shape[0])
            except UnsupportedProblemError:
                if not self.allow_fallback:
                    raise
        elif not self.allow_fallback:
            raise UnsupportedProblemError('no attaining subgradient available at this point')
        if not self.fallback_used:
            log.warning('attaining subgradient unavailable, falling back to a Clarke subgradient (exactness along y-x not guaranteed)')
        self.fallback_used = True
        return self.subgradient.copy()

    def seedSubgradient(self):
        '''
        Subgradient for the first exactness plane at a serious point: the one
        attaining f0(x,-g) for the stored Clarke subgradient g, or g itself
        when the problem cannot attain. Any Clarke subgradient keeps the plane
        exact, so no fallback warning is issued here.
        '''
        if self._attain is None:
            return self.subgradient.copy()
        try:
            return asVector(self._attain(self.point,-self.subgradient),self.point.shape[0])
        except UnsupportedProblemError:
            return self.subgradient.copy()

def pointData(problem,x,allow_fallback=True,value=None):
    # evaluate value and one Clarke subgradient of the problem at x
    x = asVector(x,problem.dimension)
    f = problem.value(x) if value is None else value
    return PointData(x,f,problem.clarkeSubgradient(x),problem.attainingSubgradient,allow_fallback)

# ===============================================================================
#  ORACLES
# ===============================================================================
def downshiftPlane(x_data,y_data,c):
    # tangent t at y lowered until it sits c|y-x|^2 below f(x); anchored at x
    x = x_data.point
    d = y_data.point - x
    g = y_data.subgradient
    t_x = y_data.value - float(g.dot(d))
    offset = min(t_x,x_data.value - c*float(d.dot(d)))
    return Plane(offset,g,'cutting',y_data.point)

def downshiftAmount(x_data,y_data,c):
    # s = [t(x) - f(x) + c|y-x|^2]_+
    d = y_data.point - x_data.point
    t_x = y_data.value - float(y_data.subgradient.dot(d))
    return max(0.0,t_x - x_data.value + c*float(d.dot(d)))

def standardPlane(x_data,direction):
    # exactness plane f(x) + g'(. - x) with g attaining f0(x, direction)
    g = x_data.directionalSubgradient(asVector(direction,x_data.point.shape[0]))
    return Plane(x_data.value,g,'cutting',x_data.point)

def modifiedPlane(x_data,y_data,c,return_both=False):
    '''
    Of the downshifted tangent and the standard plane, keep the one that is
    larger at the null step y; ties go to the downshifted tangent.
    '''
    down = downshiftPlane(x_data,y_data,c)
    sharp = standardPlane(x_data,y_data.point-x_data.point)
    x = x_data.point
    y = y_data.point
    chosen = down if down.value(y,x) >= sharp.value(y,x) else sharp
    if return_both:
        return chosen,sharp,down
    return chosen

def cuttingPlanes(variant,x_data,y_data,c):
    '''
    Planes a null step contributes, official cut first.

    standard:  the exactness plane along y-x
    downshift: the downshifted tangent
    modified:  both, the modified selection being the official one
    Returns (planes, branch) with branch in {'standard','downshift'}.
    '''
    if variant == 'standard':
        return [standardPlane(x_data,y_data.point-x_data.point).retagged('exactness')],'standard'
    if variant == 'downshift':
        return [downshiftPlane(x_data,y_data,c)],'downshift'
    chosen,sharp,down = modifiedPlane(x_data,y_data,c,return_both=True)
    sharp = sharp.retagged('exactness')
    if chosen is down:
        return [down,sharp],'downshift'
    return [sharp,down],'standard'

# ===============================================================================
#  RECYCLING
# ===============================================================================
def recycle(planes_old,x_old,x_new_data,c,modified=True):
    '''
    Move planes anchored at x_old to the new serious point.

    Each plane is treated like a tangent at the null step x_old and
    downshifted by s = [m(x_new) - f(x_new) + c|x_new - x_old|^2]_+.
    With modified=True a recycled plane survives only if at x_old it is
    at least as large as the exactness plane m0 at x_new along x_old - x_new;
    m0 is added once if any plane fails that comparison.
    '''
    x_old = asVector(x_old)
    x_new = x_new_data.point
    delta = x_new - x_old
    dist2 = float(delta.dot(delta))
    f_new = x_new_data.value
    m0 = None
    m0_at_old = None
    if modified:
        g0 = x_new_data.directionalSubgradient(-delta)
        m0 = Plane(f_new,g0,'recycled',x_new)
        m0_at_old = f_new - float(g0.dot(delta))
    out = []
    rejected = 0
    for plane in planes_old:
        m_new = plane.offset + float(plane.gradient.dot(delta))
        s = max(0.0,m_new - f_new + c*dist2)
        recycled = Plane(min(m_new - s,f_new),plane.gradient,'recycled',plane.origin)
        if modified and plane.offset - s < m0_at_old:
            rejected += 1
            continue
        out.append(recycled)
    if modified and rejected:
        out.append(m0)
    log.debug('recycled %d of %d planes%s',len(out)-(1 if modified and rejected else 0),len(planes_old),
              ', added exactness plane' if modified and rejected else '')
    return out
