# -*- coding: utf-8 -*-
"""
Created on Thu Mar 21 10:44:02 2024

@author: bundleLib developers

DXF drawings of delamination meshes: one layer per boundary part, the
undeformed mesh and a magnified deformed shape.
"""
import logging
import os

import numpy as np

from dxfwrite import const
#force all 2D polylines by disabling 3D polyline flags
const.POLYLINE_3D_POLYLINE=0

from dxfwrite import DXFEngine as dxf

log = logging.getLogger(__name__)

# ===============================================================================
#  LAYERS
# ===============================================================================
mesh_layers = {'MESH':7,'DEFORMED':1,'GAMMA_U':5,'GAMMA_C':3,'GAMMA_F1':6,'GAMMA_F2':8,'REACTION':2}

TAG_LAYERS = {'u':'GAMMA_U','c':'GAMMA_C','F1':'GAMMA_F1','F2':'GAMMA_F2'}

# ===============================================================================
#  MESH DRAWING CLASS
#       owns the dxf drawing and its layers
# ===============================================================================
class MeshDrawing:

    def __init__(self,name,path,mesh,layerColors=None):
        self.fileName = name
        self.path = path
        self.mesh = mesh
        self.drawing = dxf.drawing(os.path.join(path,name+'.dxf'))

        #get rid of extra layers (we still want '0')
        self.drawing.tables.layers.clear()
        self.drawing.add_layer('0')

        self.layerColors = dict(mesh_layers)
        if layerColors is not None:
            for layer in layerColors:
                self.layerColors[layer]=layerColors[layer]
        for layer in self.layerColors:
            self.drawing.add_layer(layer,color=self.layerColors[layer])

    def _triangle(self,points,layer):
        pts = [tuple(p) for p in points]
        self.drawing.add(dxf.polyline(points=pts+[pts[0]],flags=0,layer=layer))

    def drawMesh(self):
        for tri in self.mesh.triangles:
            self._triangle(self.mesh.nodes[tri],'MESH')
        return self

    def drawBoundary(self):
        # boundary edges on the layer of their tag
        for tag,layer in TAG_LAYERS.items():
            for n0,n1 in self.mesh.edges[tag]:
                self.drawing.add(dxf.line(start=tuple(self.mesh.nodes[n0]),end=tuple(self.mesh.nodes[n1]),layer=layer))
        return self

    def drawDeformed(self,displacement,scale=None):
        # displacement: numNodes x 2; scale None -> largest displacement drawn as 10% of the height
        u = np.asarray(displacement,dtype=float)
        peak = np.max(np.abs(u)) if u.size else 0.0
        if scale is None:
            scale = 0.1*self.mesh.H/peak if peak > 0 else 1.0
        moved = self.mesh.nodes + scale*u
        for tri in self.mesh.triangles:
            self._triangle(moved[tri],'DEFORMED')
        self.scale = scale
        return self

    def drawReaction(self,x,traction,height=None):
        # traction profile below the contact edge as a polyline
        traction = np.asarray(traction,dtype=float)
        if traction.size < 2:
            return self
        peak = np.max(np.abs(traction))
        height = 0.5*self.mesh.H if height is None else height
        factor = height/peak if peak > 0 else 0.0
        pts = [(float(xi),-float(ti)*factor) for xi,ti in zip(x,traction)]
        self.drawing.add(dxf.polyline(points=pts,flags=0,layer='REACTION'))
        return self

    def save(self):
        self.drawing.save()
        log.info('Saved as: %s',os.path.join(self.path,self.fileName+'.dxf'))
        return os.path.join(self.path,self.fileName+'.dxf')

def exportDrawing(path,name,result):
    # mesh, boundary parts, deformed shape and reaction profile of one solved load level
    model = result.model
    drawing = MeshDrawing(name,path,model.mesh)
    drawing.drawMesh().drawBoundary().drawDeformed(model.fullDisplacement(result.v))
    drawing.drawReaction(result.reaction['x'],result.reaction['traction'])
    return drawing.save()
