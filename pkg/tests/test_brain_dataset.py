"""Checks against the 13-landmark brain dataset.

The dataset is not redistributed with the package.  Point the environment
variable ``MOMENTUM_LANDMARKS_BRAIN_DIR`` at a directory holding
``control.json`` and ``case.json`` manifests to run these tests.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from momentum_landmarks.io import read_group
from momentum_landmarks.stats import StatOptions, detect

DATA = os.environ.get("MOMENTUM_LANDMARKS_BRAIN_DIR")

pytestmark = pytest.mark.skipif(
    not DATA or not (Path(DATA) / "control.json").exists(),
    reason="brain landmark dataset not available",
)

BRAIN_MOMENTUM_RATIOS = np.array([0.4535, 0.4286, 0.6906, 0.6542, 0.5561, 0.4972, 0.7187, 0.6825, 0.5348,
                   0.6155, 0.5470, 0.5554, 0.4538])


@pytest.fixture(scope="module")
def groups():
    return read_group(Path(DATA) / "control.json"), read_group(Path(DATA) / "case.json")


def test_dataset_shape(groups):
    controls, cases = groups
    assert len(controls) == len(cases) == 14
    assert all(t.n_landmarks == 13 for t in controls + cases)


@pytest.fixture(scope="module")
def momentum_report(groups):
    return detect(*groups, seed=0)


def test_case_norms(momentum_report):
    norms = momentum_report.case_norms
    assert set(np.argsort(norms)[::-1][:3] + 1) == {1, 6, 13}
    assert norms[0] == pytest.approx(0.2231, rel=0.10)
    assert norms[12] == pytest.approx(0.2182, rel=0.10)
    assert {1, 6, 13} <= set(momentum_report.method1)


def test_momentum_predictor(momentum_report):
    assert momentum_report.method2 == [1, 2, 6, 13]
    assert np.all(np.abs(momentum_report.ratios - BRAIN_MOMENTUM_RATIOS) <= 0.08)


def test_position_predictor_is_empty(groups):
    report = detect(*groups, stat_opts=StatOptions(source="position", contours=False), seed=0)
    assert report.method2 == []
