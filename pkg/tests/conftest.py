import math
import sys

import numpy as np
import pytest

from privmech.probkit import ProblemInstance
from privmech.watermark import watermark_instance

EX2_LEAK = np.array([[0.3, 0.8, 0.5, 0.4], [0.7, 0.2, 0.5, 0.6]])
EX2_PY = np.array([0.5, 0.25, 0.125, 0.125])
EX1_LEAK = np.array([[0.3, 0.8, 0.5], [0.7, 0.2, 0.5]])
EX1_PY = np.array([2 / 3, 1 / 6, 1 / 6])
EX1B_LEAK = np.array([[0.2, 0.1, 0.5], [0.8, 0.9, 0.5]])
EX1B_PY = np.array([1 / 3, 1 / 2, 1 / 6])


@pytest.fixture
def ex2():
    return ProblemInstance.from_arrays(EX2_LEAK, EX2_PY)


@pytest.fixture
def ex1():
    return ProblemInstance.from_arrays(EX1_LEAK, EX1_PY)


@pytest.fixture
def ex1b():
    return ProblemInstance.from_arrays(EX1B_LEAK, EX1B_PY)


@pytest.fixture
def wm0():
    return watermark_instance(0.0, log_base=math.e)


@pytest.fixture
def wm1():
    return watermark_instance(1.0, log_base=math.e)


def random_instance(rng, nx=2, ny=4, concentration=2.0, base=2.0):
    """Column-stochastic leakage with every entry bounded away from zero."""
    while True:
        lk = rng.dirichlet(np.full(nx, concentration), size=ny).T
        py = rng.dirichlet(np.full(ny, concentration))
        if lk.min() > 0.02 and py.min() > 0.02 and np.linalg.svd(lk, compute_uv=False)[-1] > 1e-3:
            return ProblemInstance.from_arrays(lk, py, log_base=base)


def random_perturbation(rng, nx, radius=None):
    """Random J with 1^T J = 0 and l1(J) = radius (uniform in (0, 1] if not given)."""
    j = rng.normal(size=nx)
    j -= j.mean()
    r = rng.uniform(0, 1) if radius is None else radius
    return j * r / np.abs(j).sum()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    RESULTS = mod.RESULTS
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        ok, msg = RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {msg}")
