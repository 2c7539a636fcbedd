"""The numba kernels and the numpy fallback compute the same things."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from dmixrep import _jit, backend

SCRIPT = r"""
import json
import numpy as np
from dmixrep import backend, chi2, em, simkit
xs = np.geomspace(1e-3, 60, 200)
out = {
    "backend": backend(),
    "series": chi2.noncentral_density_series(chi2.NoncentralChiSq(3, 7.5), xs).tolist(),
    "gamma_mean": float(simkit.gamma(np.full(200_000, 0.7), 1.0, simkit.RngStream(1).generator()).mean()),
    "poisson_mean": float(simkit.poisson(np.full(200_000, 25.0), simkit.RngStream(2).generator()).mean()),
}
sample = em.simulate_poisson_experiment(500, 2.0, simkit.RngStream(3).generator())
state = em.fit(sample, em.EMConfig(max_iterations=400))
out["em_p"] = state.p.tolist()
out["em_loglik"] = state.loglik
print(json.dumps(out))
"""


def run(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("DMIXREP_DISABLE_JIT", None)
    if disable:
        env["DMIXREP_DISABLE_JIT"] = "1"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


@pytest.fixture(scope="module")
def both():
    return run(False), run(True)


def test_flag_selects_backend(both):
    jit, ref = both
    assert ref["backend"] == "numpy"
    numba_importable = subprocess.run([sys.executable, "-c", "import numba"], capture_output=True).returncode == 0
    assert jit["backend"] == ("numba" if numba_importable else "numpy")


def test_series_agrees(both):
    jit, ref = both
    assert np.allclose(jit["series"], ref["series"], rtol=1e-13, atol=0)


def test_samplers_agree_in_law(both):
    jit, ref = both
    # independent implementations of the same laws: compare means at 4 SE
    assert abs(jit["gamma_mean"] - ref["gamma_mean"]) < 4 * np.sqrt(2 * 0.7 / 200_000)
    assert abs(jit["poisson_mean"] - ref["poisson_mean"]) < 4 * np.sqrt(2 * 25.0 / 200_000)


def test_em_agrees(both):
    jit, ref = both
    assert np.allclose(jit["em_p"], ref["em_p"], atol=1e-10)
    assert jit["em_loglik"] == pytest.approx(ref["em_loglik"], abs=1e-8)


def test_flag_parsing(monkeypatch):
    for value, expected in [("1", True), ("true", True), ("ON", True), ("0", False), ("", False)]:
        monkeypatch.setenv("DMIXREP_DISABLE_JIT", value)
        assert _jit._env_disabled() is expected


def test_in_process_backend_name():
    assert backend() in ("numba", "numpy")
    assert backend() == ("numba" if _jit.JIT_ENABLED else "numpy")
