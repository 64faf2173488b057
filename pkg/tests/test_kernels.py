import os
import subprocess
import sys

import numpy as np
import pytest

from rnncap import kernels

HAVE_EXT = kernels.BACKEND == "cython"


def random_case(seed, n=5, t=6, dx=3, dh=4, dy=2):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(dh, dh)) * 0.5, rng.normal(size=(dh, dx)), rng.normal(size=(dy, dh)),
            rng.normal(size=(n, t, dx)), rng.normal(size=(n, t, dy)))


@pytest.mark.skipif(not HAVE_EXT, reason="compiled kernels not built")
@pytest.mark.parametrize("kind", [kernels.RELU, kernels.TANH])
def test_backends_agree(kind):
    for seed in range(10):
        U, W, V, X, dY = random_case(seed)
        Hc = kernels.forward_batch(U, W, X, kind, "cython")
        Hp = kernels.forward_batch(U, W, X, kind, "python")
        np.testing.assert_allclose(Hc, Hp, rtol=1e-12, atol=1e-14)
        gc = kernels.backward_batch(U, W, V, X, Hc, dY, kind, "cython")
        gp = kernels.backward_batch(U, W, V, X, Hp, dY, kind, "python")
        for a, b in zip(gc, gp):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-13)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_pure_python_switch():
    env = dict(os.environ, RNNCAP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import rnncap; print(rnncap.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_non_contiguous_inputs():
    U, W, V, X, dY = random_case(1)
    Xf = np.asfortranarray(X)
    np.testing.assert_array_equal(kernels.forward_batch(U, W, Xf, kernels.TANH),
                                  kernels.forward_batch(U, W, X, kernels.TANH))
