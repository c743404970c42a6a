import numpy as np
import pytest

from convexdrum import _kernels_py, kernels
from convexdrum.geometry import stadium
from convexdrum.meshing import triangulate
from convexdrum.spectral import FESpace


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")


@pytest.mark.parametrize("degree", [1, 2])
def test_backends_agree(degree):
    compiled = pytest.importorskip("convexdrum._kernels")
    V = FESpace(triangulate(stadium(0.6, 0.5, 64), 0.1), degree)
    fn = "p1_triplets" if degree == 1 else "p2_triplets"
    a = getattr(_kernels_py, fn)(V.coords, V.elements)
    b = getattr(compiled, fn)(V.coords, V.elements)
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x), np.asarray(y), rtol=1e-12, atol=1e-14)


def test_pure_python_env(monkeypatch):
    import importlib

    monkeypatch.setenv("CONVEXDRUM_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.p1_triplets is _kernels_py.p1_triplets
    finally:
        monkeypatch.delenv("CONVEXDRUM_PURE_PYTHON")
        importlib.reload(kernels)
