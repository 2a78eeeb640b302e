# -*- coding: utf-8 -*-
import numpy as np
import pytest

from bundleLib.problemLib import loadCorpus, PiecewiseInstance


@pytest.fixture(scope='session')
def corpus():
    return loadCorpus()


@pytest.fixture
def rng():
    return np.random.default_rng(20240312)


@pytest.fixture
def abs_problem():
    # |u| as max(u, -u)
    return PiecewiseInstance([([[0.0]],[1.0],0.0),([[0.0]],[-1.0],0.0)],'max',([-1.0],[1.0]),'abs')


@pytest.fixture
def vee_problem():
    # min(u, -u) = -|u|
    return PiecewiseInstance([([[0.0]],[1.0],0.0),([[0.0]],[-1.0],0.0)],'min',([-1.0],[1.0]),'negabs')
