# -*- coding: utf-8 -*-
"""
Created on Fri Mar 22 13:58:30 2024

@author: bundleLib developers

Run artifacts: CSV tables and static SVG figures.
"""
import csv
import logging

import matplotlib
from matplotlib.figure import Figure

from bundleLib.utilities import formatFloat

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ('j','f','step','inner_iterations','tau_final','rho','tau_memory')
TRACE_COLUMNS = ('j','k','kind','tau','tau_next','rho','rho_tilde','f_y','phi_y','planes','branch')
SUMMARY_COLUMNS = ('F2 [N/mm2]','F2 [N/m2]','Pi_h [N mm]','Pi_h [N m]','serious steps','null steps','stop reason',
                   'kkt residual','load point displacement [mm]')

#fixed id salt and no date stamp: identical input gives identical svg bytes
svg_style = {'svg.hashsalt':'bundleLib','svg.fonttype':'none','font.size':9}

# ===============================================================================
#  CSV
# ===============================================================================
def _cell(value):
    if value is None:
        return ''
    if isinstance(value,float):
        return formatFloat(value)
    return str(value)

def writeRows(path,columns,rows):
    with open(path,'w',newline='') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
    log.info('Saved as: %s',path)
    return path

def historyRows(history):
    rows = [{'j':0,'f':history.f_start,'step':0.0,'inner_iterations':0}]
    for s in history.serious:
        rows.append({'j':s.j,'f':s.value,'step':s.step,'inner_iterations':s.inner_iterations,
                     'tau_final':s.tau_final,'rho':s.rho,'tau_memory':s.memory})
    return rows

def writeHistoryCsv(path,history):
    return writeRows(path,HISTORY_COLUMNS,historyRows(history))

def writeTraceCsv(path,history):
    return writeRows(path,TRACE_COLUMNS,[r.asDict() for r in history.trace])

def writeSummaryCsv(path,results):
    return writeRows(path,SUMMARY_COLUMNS,[r.summaryRow() for r in results])

def writePointCsv(path,x):
    return writeRows(path,('index','x'),[{'index':i,'x':float(v)} for i,v in enumerate(x)])

# ===============================================================================
#  SVG FIGURES
# ===============================================================================
def _save(fig,path):
    with matplotlib.rc_context(svg_style):
        fig.savefig(path,format='svg',metadata={'Date':None})
    log.info('Saved as: %s',path)
    return path

def _figure(title,xlabel,ylabel):
    with matplotlib.rc_context(svg_style):
        fig = Figure(figsize=(6.0,3.6))
        ax = fig.add_subplot(1,1,1)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True,linewidth=0.3)
    return fig,ax

def plotConvergence(path,history,title='objective at serious steps'):
    fig,ax = _figure(title,'serious step j','f(x_j)')
    values = history.values()
    ax.plot(range(len(values)),values,marker='o',markersize=3,linewidth=1)
    return _save(fig,path)

def plotOpening(path,result):
    # vertical (and horizontal) displacement along the contact boundary
    fig,ax = _figure('displacement along contact boundary, F2 = %g N/mm2' % result.F2,'x [mm]','u [mm]')
    model = result.model
    u = model.fullDisplacement(result.v)
    nodes = model.contact_nodes
    x = model.mesh.nodes[nodes,0]
    ax.plot(x,u[nodes,1],marker='.',linewidth=1,label='u2')
    ax.plot(x,u[nodes,0],linestyle='--',linewidth=1,label='u1')
    ax.legend(loc='best')
    return _save(fig,path)

def plotReaction(path,result):
    fig,ax = _figure('reactive normal traction, F2 = %g N/mm2' % result.F2,'arclength [mm]','-S_n [N/mm2]')
    r = result.reaction
    ax.plot(r['x'],r['traction'],marker='.',linewidth=1,label='residual')
    ax.plot(r['x'],r['law_traction'],linestyle=':',linewidth=1,label='law')
    ax.legend(loc='best')
    return _save(fig,path)

def plotEnergySweep(path,results):
    fig,ax = _figure('optimal energy','F2 [N/mm2]','Pi_h [N mm]')
    ax.plot([r.F2 for r in results],[r.energy for r in results],marker='s',linewidth=1)
    return _save(fig,path)
