import numpy as np
import pytest

from quadmani import matrixio
from quadmani.features import feature_dim
from quadmani.manifold import QuadraticManifold


def seeded(seed, *shape):
    return np.random.default_rng(seed).standard_normal(shape)


def random_manifold(rng, n, r, scale=0.1):
    V = np.linalg.qr(rng.standard_normal((n, r)))[0]
    W = scale * rng.standard_normal((n, feature_dim(r)))
    return QuadraticManifold(V=V, Wbar=W, selected=tuple(range(1, r + 1)),
                             mean=matrixio.zero_shift(n), gamma=0.0)


def parabola_manifold():
    return QuadraticManifold(V=np.array([[1.0], [0.0]]), Wbar=np.array([[0.0], [1.0]]),
                             selected=(1,), mean=matrixio.zero_shift(2), gamma=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
    passed = sum(line.startswith("PASS") for line in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria passed")
