import time

import numpy as np
import pytest

from adarf.forest import Dataset, Forest, TreeNode
from adarf.quantize import quantize_forest
from adarf.trainer import TrainConfig, train_forest

BACKENDS = ["numba", "numpy"]


def blobs(n_per_class, num_classes, n_features, spread, seed):
    """Isotropic Gaussian blobs with class means on a scaled simplex-ish grid."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, spread, size=(num_classes, n_features))
    X = np.vstack([rng.normal(c, 1.0, size=(n_per_class, n_features)) for c in centers])
    y = np.repeat(np.arange(num_classes), n_per_class)
    perm = rng.permutation(len(y))
    return Dataset(X[perm], y[perm], num_classes)


def two_blobs(n_train, n_test, seed=7):
    """Binary desk task: two unit-variance blobs in 8-D, means 1.1 apart per axis."""
    rng = np.random.default_rng(seed)
    mu = np.full(8, 0.55)

    def draw(n):
        y = rng.integers(0, 2, size=n)
        X = rng.normal(0.0, 1.0, size=(n, 8)) + np.where(y[:, None] == 1, mu, -mu)
        return Dataset(X, y, 2)

    return draw(n_train), draw(n_test)


def hand_forest() -> Forest:
    """Three depth-<=2 trees over two features in [0, 1], two classes.

    Pre-order indexes of tree 0: 0 root, 1 left split, 2-3 its leaves,
    4 right split, 5-6 its leaves.
    """
    L, S = TreeNode.leaf, TreeNode.split
    t0 = S(0, 0.5, S(1, 0.5, L([0.9, 0.1]), L([0.7, 0.3])), S(1, 0.25, L([0.4, 0.6]), L([0.2, 0.8])))
    t1 = S(1, 0.6, L([0.75, 0.25]), L([0.25, 0.75]))
    t2 = S(0, 0.3, L([1.0, 0.0]), S(1, 0.4, L([0.5, 0.5]), L([0.0, 1.0])))
    return Forest((t0, t1, t2), num_classes=2, max_depth=2, num_features=2)


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 1.0]])


@pytest.fixture(scope="session")
def hand_qf():
    return quantize_forest(hand_forest(), UNIT_SQUARE)


@pytest.fixture(scope="session")
def binary_desk():
    train, test = two_blobs(2000, 1000)
    forest = train_forest(train, TrainConfig(num_trees=40, max_depth=3, rng_seed=11))
    return train, test, forest, quantize_forest(forest, train)


@pytest.fixture(scope="session")
def multiclass_desk():
    data = blobs(700, 4, 6, spread=1.3, seed=3)
    train, test = data.subset(np.arange(2000)), data.subset(np.arange(2000, 2800))
    forest = train_forest(train, TrainConfig(num_trees=32, max_depth=6, rng_seed=5))
    return train, test, forest, quantize_forest(forest, train)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure inference, not JIT."""
    from adarf import engine

    qf = quantize_forest(hand_forest(), UNIT_SQUARE)
    Xq = qf.quantize_input(UNIT_SQUARE)
    for kind in ("agg-sm", "agg-max", "last-sm", "qwyc", "full"):
        pol = engine.PolicyConfig(kind, alpha=1.0)
        engine.run_batch(qf, Xq, pol)
        engine.replay(qf, engine.leaf_table(qf, Xq), pol)


# acceptance reporting: one PASS/FAIL line per criterion after the run

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = call.excinfo is None
    skipped = call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception)
    prev = _criteria.get(number)
    status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
    if prev is not None and prev[1] == "FAIL":
        status = "FAIL"
    _criteria[number] = (title, status, call.duration + (prev[2] if prev else 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, secs = _criteria[number]
        terminalreporter.write_line(f"AC-{number:<2} {status}  {title}  ({secs:.2f}s)")


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start
