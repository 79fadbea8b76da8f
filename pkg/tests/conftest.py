import numpy as np
import pytest

from featpress.tabular import REFERENCE_SPEC, FeatureTable, stratified_split, synth_generate


@pytest.fixture(scope="session")
def reference_table():
    return synth_generate(REFERENCE_SPEC)


@pytest.fixture(scope="session")
def reference_split(reference_table):
    return stratified_split(reference_table, 0.3, 7)


def make_table(values, labels=None, names=None, classes=None, timestamps=None, groups=None):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n, f = values.shape
    names = names or [f"x{j}" for j in range(f)]
    if labels is None:
        labels = [0] * n
    labels = list(labels)
    if classes is None:
        if labels and isinstance(labels[0], str):
            classes = list(dict.fromkeys(labels))
        else:
            classes = [str(c) for c in range(max(labels, default=0) + 1)]
    if labels and isinstance(labels[0], str):
        idx = {c: i for i, c in enumerate(classes)}
        labels = [idx[c] for c in labels]
    return FeatureTable(tuple(names), values, np.array(labels, dtype=np.int64), tuple(classes), timestamps, groups)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
