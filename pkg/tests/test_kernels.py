import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_nlw import _backend, _pykernels
from birkhoff_nlw.lattice import SpectralState
from oracles import dense_evaluate, random_real_poly

needs_compiled = pytest.mark.skipif(not _backend.compiled_available(), reason="extension not built")


def test_compiled_is_default_when_built():
    forced = os.environ.get("BIRKHOFF_NLW_PURE_PYTHON", "") in ("1", "true", "yes")
    expected = "compiled" if _backend.compiled_available() and not forced else "python"
    assert _backend.BACKEND == expected


def test_env_var_forces_fallback():
    code = "from birkhoff_nlw import _backend; print(_backend.BACKEND)"
    env = dict(os.environ, BIRKHOFF_NLW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("poly_eval_grad", "fortran")


def test_empty_polynomial():
    idx = np.zeros((0, 3), dtype=np.intp)
    val, grad = _pykernels.poly_eval_grad(idx, np.zeros(0, dtype=complex), np.ones(4, dtype=complex), True)
    assert val == 0 and not grad.any()


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_backends_agree_on_eval_grad(seed, m):
    rng = np.random.default_rng(seed)
    P = random_real_poly(rng, 1, 4, m, nterms=30)
    st0 = SpectralState.zeros(1, 4)
    xi = rng.standard_normal(len(st0.xi)) + 1j * rng.standard_normal(len(st0.xi))
    z = SpectralState(1, 4, xi).doubled()
    idx, coef = P.compiled(1, 4)
    v_py, g_py = _backend.get("poly_eval_grad", "python")(idx, coef, z, True)
    v_c, g_c = _backend.get("poly_eval_grad", "compiled")(idx, coef, z, True)
    assert v_c == pytest.approx(v_py, rel=1e-13, abs=1e-13)
    assert np.allclose(g_c, g_py, rtol=1e-13, atol=1e-13)
    assert v_py == pytest.approx(dense_evaluate(P, SpectralState(1, 4, xi)), rel=1e-12, abs=1e-12)
