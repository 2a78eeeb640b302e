# -*- coding: utf-8 -*-
"""
Created on Tue Mar 12 09:41:27 2024

@author: bundleLib developers

Shared plumbing: logging setup, the exception hierarchy and small numeric helpers.
"""
import logging
import sys

import numpy as np

# ===============================================================================
#  TERMINAL COLORS
# ===============================================================================
ANSI_RESET = '\x1b[0m'
ANSI_COLORS = {'DEBUG':'\x1b[37m','INFO':'\x1b[36m','WARNING':'\x1b[33m','ERROR':'\x1b[31m','CRITICAL':'\x1b[41m'}

LOGGER_NAME = 'bundleLib'

class AnsiFormatter(logging.Formatter):
    '''
    Formatter that colours the level name, e.g. "\\x1b[33mWarning:\\x1b[0m ..."
    '''
    def __init__(self,fmt='%(levelname)s %(name)s: %(message)s',color=True):
        logging.Formatter.__init__(self,fmt)
        self.color = color

    def format(self,record):
        levelname = record.levelname
        if self.color and levelname in ANSI_COLORS:
            record.levelname = ANSI_COLORS[levelname] + levelname.capitalize() + ':' + ANSI_RESET
        else:
            record.levelname = levelname.capitalize() + ':'
        try:
            return logging.Formatter.format(self,record)
        finally:
            record.levelname = levelname

def setupLogging(level=logging.INFO,color=None,stream=None):
    # install a single coloured stream handler on the package logger
    # color=None colours only when the stream is a terminal
    stream = stream or sys.stderr
    if color is None:
        color = hasattr(stream,'isatty') and stream.isatty()
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if getattr(handler,'_bundleLib',False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setFormatter(AnsiFormatter(color=color))
    handler._bundleLib = True
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger

logging.getLogger(LOGGER_NAME).addHandler(logging.NullHandler())

# ===============================================================================
#  EXCEPTIONS
# ===============================================================================

class BundleError(Exception):
    '''Root of every error raised by bundleLib.'''

class StructureError(BundleError):
    '''A working model or multiplier set violates its structural invariants.'''

class ConfigError(BundleError):
    '''Inconsistent parameters, layouts or configuration files.'''

class InputError(BundleError):
    '''Unusable user input, e.g. an infeasible starting point.'''

class InfeasibleError(BundleError):
    '''The polyhedron Ax <= b has no point near the current iterate.'''

class UnsupportedProblemError(BundleError):
    '''The problem cannot supply a subgradient attaining the Clarke directional derivative.'''

class SolverFailure(BundleError):
    '''Numerical breakdown: proximity parameter overflow or active set cycling.'''
    def __init__(self,message,diagnostics=None):
        BundleError.__init__(self,message)
        self.diagnostics = diagnostics or {}

# ===============================================================================
#  UTILITY FUNCTIONS
# ===============================================================================

def mergeDefaults(defaults,overrides,name='parameters'):
    # return a copy of defaults updated with overrides; unknown keys are a configuration error
    merged = dict(defaults)
    for key in overrides:
        if key not in defaults:
            raise ConfigError('unknown '+name+' key: '+str(key))
        merged[key]=overrides[key]
    return merged

def asVector(x,n=None,name='vector'):
    # float copy of x as a 1-d array, optionally checking its length
    v = np.array(x,dtype=float).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise StructureError(name+' has dimension '+str(v.shape[0])+', expected '+str(n))
    return v

def asSymmetric(Q,n=None,name='matrix',tol=1e-10):
    # float copy of a square matrix, symmetrized after checking asymmetry is rounding only
    M = np.array(Q,dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise StructureError(name+' must be square, got shape '+str(M.shape))
    if n is not None and M.shape[0] != n:
        raise StructureError(name+' has size '+str(M.shape[0])+', expected '+str(n))
    scale = 1.0 + np.max(np.abs(M),initial=0.0)
    if np.max(np.abs(M-M.T),initial=0.0) > tol*scale:
        raise StructureError(name+' is not symmetric')
    return 0.5*(M+M.T)

def relativeGap(a,b):
    # |a-b| measured against 1+|a|
    return abs(a-b)/(1.0+abs(a))

def relativeStep(x,y):
    # ||y-x|| measured against 1+||x||
    return float(np.linalg.norm(np.asarray(y)-np.asarray(x)))/(1.0+float(np.linalg.norm(x)))

def formatFloat(value):
    # nine significant digits, used by every CSV writer
    return '%.9g' % value
