# -*- coding: utf-8 -*-
"""
bundleLib: proximity control bundle method for nonsmooth nonconvex problems
with linear constraints, and a finite element delamination benchmark.
"""
__version__ = '0.1'
