# -*- coding: utf-8 -*-
"""
Created on Tue Mar 26 10:12:40 2024

@author: bundleLib developers
"""

import logging
import os

import bundleLib.delaminationLib as dl
from bundleLib.BundleLib import DriverParams
from bundleLib.oracleLib import OracleConfig
from bundleLib.drawingLib import exportDrawing
from bundleLib import plotLib
from bundleLib.utilities import setupLogging

setupLogging(logging.INFO)

# ===============================================================================
# specimen setup
# ===============================================================================

out = 'results/'
os.makedirs(out,exist_ok=True)

# 100 x 10 mm specimen, 40 x 4 squares (h = 2.5 mm)
# rightmost 20% of the lower edge bonded, the rest is the adhesive contact zone
mesh = dl.buildMesh(100,10,40,4,layout=dl.makeLayout(bonded_fraction=0.2))
elasticity = dl.ElasticityParams(young_modulus=210000,poisson_ratio=0.3,thickness=5)
law = dl.loadLaw()

params = DriverParams(**dl.delamination_params)
oracle = OracleConfig(variant='modified')

# ===============================================================================
# load sweep
# ===============================================================================

results = []
for F2 in [0.2,0.4,0.6,0.8,1.0]:
    model = dl.DelaminationModel(mesh,elasticity,law,F2)
    result = model.solve(params,oracle)
    results.append(result)
    label = 'F2=%g' % F2
    
    plotLib.writeHistoryCsv(out+'history_'+label+'.csv',result.history)
    dl.exportSolution(out+'solution_'+label+'.csv',result)
    plotLib.plotOpening(out+'opening_'+label+'.svg',result)
    plotLib.plotReaction(out+'reaction_'+label+'.svg',result)
    exportDrawing(out,'mesh_'+label,result)
    
    print('%s: Pi_h = %.6g N mm (%.6g N m), %d serious steps, %s' % (label,result.energy,result.energy_Nm,
          len(result.history.serious),result.history.stop_reason))

plotLib.writeSummaryCsv(out+'summary.csv',results)
plotLib.plotEnergySweep(out+'energy.svg',results)
