import sys
import numpy as np
import pytest

from cdbn.data import InterventionDesign, InterventionScheme, TimeCourseDataset


def make_dataset(p=3, C=2, T=4, seed=0, names=None, conditions=None):
    rng = np.random.default_rng(seed)
    names = names or [f"N{i}" for i in range(p)]
    conditions = conditions or [f"c{k}" for k in range(C)]
    return TimeCourseDataset(names, conditions, list(range(T)), rng.standard_normal((p, C, T)))


def make_design(targets, kind="none", direction="out"):
    return InterventionDesign(targets, InterventionScheme.parse(kind, direction))


@pytest.fixture
def small_data():
    return make_dataset(p=4, C=3, T=5, seed=11)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in mod.CRITERIA:
        terminalreporter.write_line(mod.format_line(k))
