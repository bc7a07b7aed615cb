import os
import subprocess
import sys

import numpy as np
import pytest

from fatmargin import _kernels
from fatmargin.data_io import bundled_dataset_path, load_csv
from fatmargin.kernels import KernelSpec
from fatmargin.lp_solver import SolverOptions
from fatmargin.mcm import train_kernel

needs_ext = pytest.mark.skipif("cython" not in _kernels.available_backends(), reason="extension not built")


def backend_in_subprocess(value):
    env = dict(os.environ)
    env.pop("FATMARGIN_PURE_PYTHON", None)
    if value is not None:
        env["FATMARGIN_PURE_PYTHON"] = value
    out = subprocess.run([sys.executable, "-c", "from fatmargin import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_var_forces_fallback():
    assert backend_in_subprocess("1") == "python"


@needs_ext
def test_compiled_backend_is_default():
    assert backend_in_subprocess(None) == "cython"
    assert backend_in_subprocess("0") == "cython"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


@needs_ext
def test_backends_train_identical_kernel_model():
    ds = load_csv(bundled_dataset_path("haberman"))
    X, y = ds.features[:120], ds.labels[:120]
    models = [train_kernel(X, y, KernelSpec.gaussian(0.1), 1.0, fuzzy=True, options=SolverOptions(backend=b))
              for b in ("cython", "python")]
    a, b = models
    assert a.support_indices.tolist() == b.support_indices.tolist()
    assert np.allclose(a.lambdas, b.lambdas, rtol=1e-9, atol=1e-9)
    assert a.objective == pytest.approx(b.objective, abs=1e-9)
