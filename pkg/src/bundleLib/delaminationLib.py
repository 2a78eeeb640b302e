# -*- coding: utf-8 -*-
"""
Created on Wed Mar 20 15:31:09 2024

@author: bundleLib developers

Delamination benchmark: a rectangular specimen glued along part of its lower
edge, pulled at its left end. Constant strain triangles in plane stress,
a nonmonotone adhesive law on the contact boundary (trapezoidal quadrature),
unilateral constraints v2 >= 0 on the contact nodes.

Units are mm, N and MPa throughout; energies are N mm.
"""
import csv
import json
import logging
import os

import numpy as np

from bundleLib.BundleLib import BundleSolver, DriverParams
from bundleLib.oracleLib import OracleConfig
from bundleLib.problemLib import ScalarMinLaw, SeparableMinProblem, FIXTURE_DIR
from bundleLib.tangentLib import Polyhedron
from bundleLib.utilities import ConfigError, StructureError, mergeDefaults, formatFloat

log = logging.getLogger(__name__)

# ===============================================================================
#  DEFAULTS
# ===============================================================================
elasticity_defaults = {'young_modulus':210000.0,    #N/mm^2 (210 GPa)
                       'poisson_ratio':0.3,
                       'thickness':5.0}             #mm

mesh_defaults = {'L':100.0,'H':10.0,'nx':40,'ny':4}

#driver settings for the stiff FEM energy
delamination_params = {'q':1e8,'T':1e10,'tol1':1e-8,'tol2':1e-8}

SIDES = ('bottom','right','top','left')
BOUNDARY_TAGS = ('u','c','F1','F2')         #priority order for shared corner nodes
LAYER_TAGS = ('u','c','F1')                 #F2 takes every remaining boundary node

def makeLayout(bonded_fraction=0.2):
    '''
    Default boundary layout: load on the left edge, clamped right edge plus the
    rightmost bonded_fraction of the bottom edge, contact on the rest of the
    bottom edge, traction free elsewhere.
    '''
    if not 0 <= bonded_fraction < 1:
        raise ConfigError('bonded_fraction must lie in [0, 1)')
    layout = {'u':[('right',0.0,1.0)],
              'c':[('bottom',0.0,1.0-bonded_fraction)],
              'F1':[('left',0.0,1.0)]}
    if bonded_fraction > 0:
        layout['u'].insert(0,('bottom',1.0-bonded_fraction,1.0))
    return layout

default_layout = makeLayout(0.2)

def layoutFromConfig(spec):
    # accepts None, {'bonded_fraction': f} or {'u': [[side, start, end], ...], ...}
    if spec is None:
        return makeLayout()
    if 'bonded_fraction' in spec:
        return makeLayout(float(spec['bonded_fraction']))
    layout = {}
    for tag,segments in spec.items():
        if tag not in BOUNDARY_TAGS:
            raise ConfigError('unknown boundary tag '+str(tag))
        layout[tag] = [(str(s[0]),float(s[1]),float(s[2])) for s in segments]
    return layout

# ===============================================================================
#  MESH
# ===============================================================================
class Mesh:
    '''
    Structured triangulation of (0,L) x (0,H).

    Node id = j*(nx+1) + i for the grid point (i*L/nx, j*H/ny); every square
    (n0,n1,n2,n3) is split along its n0-n2 diagonal into (n0,n1,n2) and (n0,n2,n3).
    Boundary bookkeeping:
        tags[node]      one boundary tag per boundary node
        closure[tag]    nodes lying on the closed segments of that tag
        edges[tag]      boundary edges (node pairs) inside that tag's segments
    '''
    def __init__(self,L,H,nx,ny):
        if int(nx) < 1 or int(ny) < 1:
            raise ConfigError('mesh needs nx, ny >= 1')
        if not (L > 0 and H > 0):
            raise ConfigError('mesh dimensions must be positive')
        self.L = float(L)
        self.H = float(H)
        self.nx = int(nx)
        self.ny = int(ny)
        self.hx = self.L/self.nx
        self.hy = self.H/self.ny
        if abs(self.hx-self.hy) > 1e-12*max(self.hx,self.hy):
            log.warning('non-square elements (%g x %g mm)',self.hx,self.hy)
        self.h = self.hx
        xs = np.linspace(0.0,self.L,self.nx+1)
        ys = np.linspace(0.0,self.H,self.ny+1)
        X,Y = np.meshgrid(xs,ys)
        self.nodes = np.column_stack([X.ravel(),Y.ravel()])
        tris = []
        for j in range(self.ny):
            for i in range(self.nx):
                n0 = self.nodeId(i,j)
                n1 = self.nodeId(i+1,j)
                n2 = self.nodeId(i+1,j+1)
                n3 = self.nodeId(i,j+1)
                tris.append((n0,n1,n2))
                tris.append((n0,n2,n3))
        self.triangles = np.array(tris,dtype=int)
        self.tags = {}
        self.closure = {tag:set() for tag in BOUNDARY_TAGS}
        self.edges = {tag:[] for tag in BOUNDARY_TAGS}

    def nodeId(self,i,j):
        return j*(self.nx+1) + i

    @property
    def numNodes(self):
        return self.nodes.shape[0]

    @property
    def numTriangles(self):
        return self.triangles.shape[0]

    def sideNodes(self,side):
        # boundary nodes of one side, ordered by increasing side parameter
        if side == 'bottom':
            return [self.nodeId(i,0) for i in range(self.nx+1)]
        if side == 'top':
            return [self.nodeId(i,self.ny) for i in range(self.nx+1)]
        if side == 'left':
            return [self.nodeId(0,j) for j in range(self.ny+1)]
        if side == 'right':
            return [self.nodeId(self.nx,j) for j in range(self.ny+1)]
        raise ConfigError('unknown side '+str(side))

    def sideParameter(self,side,node):
        x,y = self.nodes[node]
        return x/self.L if side in ('bottom','top') else y/self.H

    def boundaryNodes(self):
        nodes = set()
        for side in SIDES:
            nodes.update(self.sideNodes(side))
        return sorted(nodes)

    def applyLayout(self,layout):
        # tag boundary nodes and edges from {tag: [(side, start_frac, end_frac), ...]}
        tol = 1e-9
        self.closure = {tag:set() for tag in BOUNDARY_TAGS}
        self.edges = {tag:[] for tag in BOUNDARY_TAGS}
        for tag,segments in layout.items():
            if tag not in BOUNDARY_TAGS:
                raise ConfigError('unknown boundary tag '+str(tag))
            for side,start,end in segments:
                if not 0 <= start < end <= 1:
                    raise ConfigError('segment (%s, %g, %g) needs 0 <= start < end <= 1' % (side,start,end))
                nodes = self.sideNodes(side)
                inside = [n for n in nodes if start-tol <= self.sideParameter(side,n) <= end+tol]
                self.closure[tag].update(inside)
                for n0,n1 in zip(nodes,nodes[1:]):
                    if n0 in inside and n1 in inside:
                        self.edges[tag].append((n0,n1))
        if not self.closure['u']:
            raise ConfigError('layout leaves the clamped boundary empty; the elastic energy would not be coercive')
        self.tags = {}
        for node in self.boundaryNodes():
            self.tags[node] = 'F2'
            for tag in LAYER_TAGS:
                if node in self.closure[tag]:
                    self.tags[node] = tag
                    break
        #F2 edges: boundary edges claimed by no other tag
        claimed = set()
        for tag in LAYER_TAGS:
            claimed.update(frozenset(e) for e in self.edges[tag])
        self.edges['F2'] = []
        for side in SIDES:
            nodes = self.sideNodes(side)
            for n0,n1 in zip(nodes,nodes[1:]):
                if frozenset((n0,n1)) not in claimed:
                    self.edges['F2'].append((n0,n1))
        self.closure['F2'] = set(n for e in self.edges['F2'] for n in e)
        return self

    def taggedNodes(self,tag):
        return sorted(n for n,t in self.tags.items() if t == tag)

    def dirichletNodes(self):
        return sorted(self.closure['u'])

    def contactNodes(self):
        # closure of the contact boundary minus the closure of the clamped boundary, ordered along the boundary
        nodes = self.closure['c'] - self.closure['u']
        return sorted(nodes,key=lambda n:(self.nodes[n][1],self.nodes[n][0]))

    def edgeLength(self,edge):
        return float(np.linalg.norm(self.nodes[edge[1]]-self.nodes[edge[0]]))

    def contactWeights(self,include_closure=False):
        # trapezoidal weights c_nu: each contact edge gives half its length to both ends
        weights = {}
        for edge in self.edges['c']:
            half = 0.5*self.edgeLength(edge)
            for n in edge:
                weights[n] = weights.get(n,0.0) + half
        if include_closure:
            return weights
        return {n:weights.get(n,0.0) for n in self.contactNodes()}

    def contactLength(self):
        return float(sum(self.edgeLength(e) for e in self.edges['c']))

    def triangleArea(self,t):
        p = self.nodes[self.triangles[t]]
        return 0.5*((p[1,0]-p[0,0])*(p[2,1]-p[0,1]) - (p[2,0]-p[0,0])*(p[1,1]-p[0,1]))

    def check(self):
        # list of violated mesh invariants
        problems = []
        if self.numNodes != (self.nx+1)*(self.ny+1):
            problems.append('node count %d != (nx+1)(ny+1)' % self.numNodes)
        if self.numTriangles != 2*self.nx*self.ny:
            problems.append('triangle count %d != 2 nx ny' % self.numTriangles)
        if set(self.tags) != set(self.boundaryNodes()):
            problems.append('boundary nodes without exactly one tag')
        if any(self.triangleArea(t) <= 0 for t in range(self.numTriangles)):
            problems.append('degenerate or clockwise triangle')
        edge_count = {}
        for tri in self.triangles:
            for a,b in ((tri[0],tri[1]),(tri[1],tri[2]),(tri[2],tri[0])):
                key = (min(a,b),max(a,b))
                edge_count[key] = edge_count.get(key,0)+1
        if any(c > 2 for c in edge_count.values()):
            problems.append('non-conforming triangulation')
        boundary_edges = sum(1 for c in edge_count.values() if c == 1)
        if boundary_edges != 2*(self.nx+self.ny):
            problems.append('boundary has %d edges, expected %d' % (boundary_edges,2*(self.nx+self.ny)))
        return problems

def buildMesh(L=100.0,H=10.0,nx=40,ny=4,layout=None):
    mesh = Mesh(L,H,nx,ny)
    mesh.applyLayout(default_layout if layout is None else layout)
    log.debug('mesh %dx%d: %d nodes, %d triangles, %d contact nodes',nx,ny,mesh.numNodes,mesh.numTriangles,len(mesh.contactNodes()))
    return mesh

# ===============================================================================
#  MATERIAL AND ADHESIVE LAW
# ===============================================================================
class ElasticityParams:

    def __init__(self,**kwargs):
        settings = mergeDefaults(elasticity_defaults,kwargs,'elasticity')
        self.young_modulus = float(settings['young_modulus'])
        self.poisson_ratio = float(settings['poisson_ratio'])
        self.thickness = float(settings['thickness'])
        self.assumption = 'plane-stress'
        if not self.young_modulus > 0:
            raise ConfigError('Young modulus must be positive')
        if not 0 <= self.poisson_ratio < 0.5:
            raise ConfigError('Poisson ratio must lie in [0, 0.5)')
        if not self.thickness > 0:
            raise ConfigError('thickness must be positive')

    def constitutive(self):
        # plane stress D, stress = D strain with engineering shear strain
        E,nu = self.young_modulus,self.poisson_ratio
        return E/(1.0-nu*nu)*np.array([[1.0,nu,0.0],[nu,1.0,0.0],[0.0,0.0,0.5*(1.0-nu)]])

    def asDict(self):
        return {'young_modulus':self.young_modulus,'poisson_ratio':self.poisson_ratio,'thickness':self.thickness}

class AdhesiveLaw(ScalarMinLaw):
    '''
    Adhesive superpotential per unit boundary length: minimum of convex
    quadratic pieces and one linear piece, evaluated at the opening u2 >= 0.
    Its Clarke derivative is the zig-zag traction-separation law.
    '''
    def __init__(self,pieces,validation_range=None,name='adhesive law'):
        ScalarMinLaw.__init__(self,pieces,name)
        self.validation_range = validation_range
        if validation_range is not None:
            problems = self.validate(validation_range)
            if problems:
                raise ConfigError('; '.join(problems))

    @classmethod
    def fromSpec(cls,spec):
        pieces = spec['pieces']
        if spec.get('form','coefficients') == 'vertex':
            pieces = ScalarMinLaw.fromVertexForm(pieces)
            pieces = np.column_stack([pieces.k,pieces.b,pieces.c])
        return cls(pieces,spec.get('validation_range'),spec.get('name','adhesive law'))

    @classmethod
    def zero(cls):
        return cls([(0.0,0.0,0.0)])

def loadLaw(path=None):
    # adhesive law from a JSON file; default is the shipped zig-zag law
    path = path or os.path.join(FIXTURE_DIR,'adhesive_law.json')
    if not os.path.exists(path):
        raise FileNotFoundError('adhesive law file not found: '+path)
    with open(path) as f:
        return AdhesiveLaw.fromSpec(json.load(f))

# ===============================================================================
#  ASSEMBLY
# ===============================================================================
def elementMatrices(coords):
    # (area, B) of a constant strain triangle with counterclockwise vertices
    x = coords[:,0]
    y = coords[:,1]
    area = 0.5*((x[1]-x[0])*(y[2]-y[0]) - (x[2]-x[0])*(y[1]-y[0]))
    if area <= 1e-14*max(1.0,np.ptp(x)*np.ptp(y)):
        raise StructureError('degenerate triangle with area %g' % area)
    b = np.array([y[1]-y[2],y[2]-y[0],y[0]-y[1]])
    c = np.array([x[2]-x[1],x[0]-x[2],x[1]-x[0]])
    B = np.zeros((3,6))
    B[0,0::2] = b
    B[1,1::2] = c
    B[2,0::2] = c
    B[2,1::2] = b
    return area,B/(2.0*area)

def elementStiffness(coords,params):
    area,B = elementMatrices(np.asarray(coords,dtype=float))
    return params.thickness*area*B.T.dot(params.constitutive()).dot(B)

def elementStress(coords,u_element,params):
    # constant stress (sxx, syy, sxy) of one triangle
    _,B = elementMatrices(np.asarray(coords,dtype=float))
    return params.constitutive().dot(B.dot(np.asarray(u_element,dtype=float)))

def elementDofs(tri):
    return np.array([2*tri[0],2*tri[0]+1,2*tri[1],2*tri[1]+1,2*tri[2],2*tri[2]+1])

def assembleStiffness(mesh,params):
    # dense global stiffness, dofs (2 node, 2 node + 1), summed in element order
    ndof = 2*mesh.numNodes
    K = np.zeros((ndof,ndof))
    for tri in mesh.triangles:
        dofs = elementDofs(tri)
        K[np.ix_(dofs,dofs)] += elementStiffness(mesh.nodes[tri],params)
    return 0.5*(K+K.T)

def assembleLoad(mesh,F2,thickness=None):
    # F2 [N/mm^2] on the F1 edges, lumped by the trapezoidal rule onto vertical dofs
    thickness = elasticity_defaults['thickness'] if thickness is None else thickness
    g = np.zeros(2*mesh.numNodes)
    if not mesh.edges['F1']:
        log.warning('no loaded boundary: pure contact problem')
        return g
    for edge in mesh.edges['F1']:
        share = 0.5*F2*mesh.edgeLength(edge)*thickness
        for n in edge:
            g[2*n+1] += share
    return g

def contactConstraints(mesh,free_dofs=None):
    # one row -v2(nu) <= 0 per contact node; in reduced coordinates when free_dofs is given
    nodes = mesh.contactNodes()
    if free_dofs is None:
        n = 2*mesh.numNodes
        index = {d:d for d in range(n)}
    else:
        n = len(free_dofs)
        index = {int(d):k for k,d in enumerate(free_dofs)}
    if not nodes:
        return Polyhedron.empty(n)
    A = np.zeros((len(nodes),n))
    for row,node in enumerate(nodes):
        A[row,index[2*node+1]] = -1.0
    return Polyhedron(A,np.zeros(len(nodes)))

# ===============================================================================
#  DELAMINATION MODEL
# ===============================================================================
class DelaminationModel:
    '''
    Reduced (Dirichlet-eliminated) discrete problem for one load level.
    '''
    def __init__(self,mesh,elasticity=None,law=None,F2=1.0):
        self.mesh = mesh
        self.elasticity = elasticity or ElasticityParams()
        self.law = law if law is not None else loadLaw()
        self.F2 = float(F2)
        self.K_full = assembleStiffness(mesh,self.elasticity)
        self.g_full = assembleLoad(mesh,self.F2,self.elasticity.thickness)
        fixed = set()
        for n in mesh.dirichletNodes():
            fixed.update((2*n,2*n+1))
        self.free_dofs = np.array([d for d in range(2*mesh.numNodes) if d not in fixed],dtype=int)
        self.fixed_dofs = np.array(sorted(fixed),dtype=int)
        self.dof_index = {int(d):k for k,d in enumerate(self.free_dofs)}
        self.K = self.K_full[np.ix_(self.free_dofs,self.free_dofs)]
        self.g = self.g_full[self.free_dofs]
        self.contact_nodes = mesh.contactNodes()
        weights = mesh.contactWeights()
        self.contact_weights = np.array([weights[n] for n in self.contact_nodes])
        self.contact_dofs = np.array([self.dof_index[2*n+1] for n in self.contact_nodes],dtype=int)
        self.constraints = contactConstraints(mesh,self.free_dofs)
        log.debug('delamination model: %d free dofs, %d contact nodes, F2 = %g',len(self.free_dofs),len(self.contact_nodes),self.F2)

    @property
    def dimension(self):
        return self.free_dofs.shape[0]

    def isPositiveDefinite(self):
        try:
            np.linalg.cholesky(self.K)
        except np.linalg.LinAlgError:
            return False
        return True

    def energy(self):
        return buildEnergy(self)

    def fullDisplacement(self,v):
        # (numNodes x 2) displacement field with zeros on the clamped boundary
        u = np.zeros(2*self.mesh.numNodes)
        u[self.free_dofs] = v
        return u.reshape(-1,2)

    def loadPointDisplacement(self,v):
        # load-weighted vertical displacement of the loaded edge
        total = float(np.sum(self.g))
        return float(self.g.dot(v))/total if total else 0.0

    def solve(self,params=None,oracle=None,x_start=None,callback=None):
        if params is None:
            params = DriverParams(**delamination_params)
        v0 = np.zeros(self.dimension) if x_start is None else x_start
        problem = buildEnergy(self)
        history = BundleSolver(problem,self.constraints,params,oracle or OracleConfig(),callback).solve(v0)
        return DelaminationResult(self,problem,history)

def buildEnergy(model):
    # Pi_h(v) = 1/2 v'Kv + sum c_nu j(v2(nu)) - g'v as a separable min problem
    return SeparableMinProblem(model.K,-model.g,model.contact_dofs,model.contact_weights,model.law,name='delamination F2=%g' % model.F2)

def recoverReaction(model,v):
    '''
    Normal traction along the contact boundary from the nodal residual
    r = Kv - g, next to the law side value j'(v2)/thickness.
    Returns a dict of arrays ordered like model.contact_nodes.
    '''
    t = model.elasticity.thickness
    residual = model.K.dot(v) - model.g
    r = residual[model.contact_dofs]
    opening = v[model.contact_dofs]
    law_side = np.array([model.law.derivative(u,'average')[0] for u in opening])
    with np.errstate(divide='ignore',invalid='ignore'):
        traction = np.where(model.contact_weights > 0,-r/(model.contact_weights*t),0.0)
    return {'nodes':np.array(model.contact_nodes,dtype=int),
            'x':model.mesh.nodes[model.contact_nodes,0],
            'opening':opening,
            'traction':traction,
            'law_traction':law_side/t,
            'active':opening <= 1e-12*(1.0+np.max(np.abs(v),initial=0.0))}

def kktResidual(model,v,problem=None):
    # distance of 0 from the subdifferential of Pi_h plus the normal cone of v2 >= 0
    problem = problem or buildEnergy(model)
    return problem.stationarityResidual(v,nonnegative=model.contact_dofs)

class DelaminationResult:
    '''
    Solved load level: displacement, energy in N mm and N m, reactions, stationarity.
    '''
    def __init__(self,model,problem,history):
        self.model = model
        self.F2 = model.F2
        self.history = history
        self.v = history.x_final
        self.energy = history.f_final
        self.energy_Nm = 1e-3*self.energy
        self.reaction = recoverReaction(model,self.v)
        self.kkt = kktResidual(model,self.v,problem)
        self.kkt_tolerance = 1e-4*(1.0+np.linalg.norm(model.g))
        self.load_point_displacement = model.loadPointDisplacement(self.v)
        self.min_opening = float(np.min(self.v[model.contact_dofs])) if len(model.contact_dofs) else 0.0

    def summaryRow(self):
        h = self.history
        return {'F2 [N/mm2]':self.F2,'F2 [N/m2]':self.F2*1e6,'Pi_h [N mm]':self.energy,'Pi_h [N m]':self.energy_Nm,
                'serious steps':len(h.serious),'null steps':h.nullSteps(),'stop reason':h.stop_reason,
                'kkt residual':self.kkt,'load point displacement [mm]':self.load_point_displacement}

SOLUTION_COLUMNS = ('node','x','y','u1','u2','contact','reaction')

def exportSolution(path,result):
    # CSV (node, x, y, u1, u2, contact flag, residual traction) with nine significant digits
    model = result.model
    u = model.fullDisplacement(result.v)
    traction = dict(zip(result.reaction['nodes'].tolist(),result.reaction['traction']))
    with open(path,'w',newline='') as f:
        writer = csv.writer(f)
        writer.writerow(SOLUTION_COLUMNS)
        for n in range(model.mesh.numNodes):
            x,y = model.mesh.nodes[n]
            writer.writerow([n,formatFloat(x),formatFloat(y),formatFloat(u[n,0]),formatFloat(u[n,1]),
                             int(n in traction),formatFloat(traction[n]) if n in traction else ''])
    log.info('Saved as: %s',path)
    return path
