# -*- coding: utf-8 -*-
"""
Created on Tue Mar 26 14:55:03 2024

@author: bundleLib developers
"""

import logging

import numpy as np

from bundleLib.BundleLib import solve, DriverParams
from bundleLib.oracleLib import OracleConfig
from bundleLib.problemLib import loadCorpus, PiecewiseInstance
from bundleLib.tangentLib import Polyhedron
from bundleLib import plotLib
from bundleLib.utilities import setupLogging

setupLogging(logging.WARNING)

corpus = loadCorpus()

#=============================
# every corpus instance with every oracle variant
for ident,entry in corpus.items():
    for variant in ['standard','downshift','modified']:
        history = solve(entry.problem,entry.constraints(),entry.start,oracle=OracleConfig(variant=variant))
        print('%-3s %-9s f = %.9f (f* = %.9f)  serious %3d  null %4d  %s' % (ident,variant,history.f_final,entry.f_opt,
              len(history.serious),history.nullSteps(),history.stop_reason))

#=============================
# a hand made instance: max(|u1|, |u2|) + 1/2 |u|^2 on the box [0.5, 2]^2
branches = []
for k in range(2):
    for sign in [1,-1]:
        p = np.zeros(2)
        p[k] = sign
        branches.append((np.eye(2),p,0.0))
problem = PiecewiseInstance(branches,'max',name='box corner')
box = Polyhedron.box([0.5,0.5],[2.0,2.0])

history = solve(problem,box,[2.0,1.5],DriverParams(tol1=1e-8,tol2=1e-8))
print('box corner: x = %s, f = %.9f' % (history.x_final,history.f_final))
plotLib.plotConvergence('convergence_box_corner.svg',history)
