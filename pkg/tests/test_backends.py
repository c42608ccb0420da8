import os
import subprocess
import sys

import numpy as np
import pytest

from flatm import FcmConfig, fcm_run
from flatm._kernels import HAS_NUMBA, active_backend, get_backend

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


class TestSelection:
    def test_numpy_backend_always_available(self):
        backend = get_backend("numpy")
        assert backend.name == "numpy"

    def test_auto_prefers_numba_when_present(self):
        backend = get_backend("auto")
        assert backend.name == ("numba" if HAS_NUMBA else "numpy")

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown backend"):
            get_backend("cuda")

    def test_env_var_controls_selection(self):
        code = (
            "from flatm._kernels import active_backend; "
            "print(active_backend().name)"
        )
        for value, expected in [("numpy", "numpy"), ("auto", None)]:
            env = dict(os.environ, FLATM_BACKEND=value)
            out = subprocess.run(
                [sys.executable, "-c", code],
                env=env,
                capture_output=True,
                text=True,
                check=True,
            )
            if expected:
                assert out.stdout.strip() == expected

    def test_env_var_read_at_call_time(self, monkeypatch):
        monkeypatch.setenv("FLATM_BACKEND", "numpy")
        assert active_backend().name == "numpy"
        monkeypatch.delenv("FLATM_BACKEND")
        assert active_backend().name in ("numba", "numpy")

    def test_invalid_env_value_raises(self, monkeypatch):
        monkeypatch.setenv("FLATM_BACKEND", "gpu")
        with pytest.raises(ValueError, match="unknown backend"):
            active_backend()


@needs_numba
class TestAgreement:
    # The two backends use different summation orders, so agreement is
    # to rounding error, not bit-for-bit.

    def test_kernels_agree_on_random_inputs(self):
        nb = get_backend("numba")
        npx = get_backend("numpy")
        rng = np.random.default_rng(99)
        for _ in range(10):
            n = int(rng.integers(5, 40))
            c = int(rng.integers(2, 6))
            dims = int(rng.integers(1, 8))
            q = float(rng.uniform(1.2, 3.0))
            x = np.ascontiguousarray(rng.normal(size=(n, dims)))
            u = rng.random((n, c))
            u = np.ascontiguousarray(u / u.sum(axis=1, keepdims=True))
            centers_nb, wsum_nb = nb.centers(x, u, q)
            centers_np, wsum_np = npx.centers(x, u, q)
            np.testing.assert_allclose(centers_nb, centers_np, rtol=1e-12)
            np.testing.assert_allclose(wsum_nb, wsum_np, rtol=1e-12)
            d2_nb = nb.sq_dists(x, centers_nb)
            d2_np = npx.sq_dists(x, centers_nb)
            np.testing.assert_allclose(d2_nb, d2_np, rtol=1e-12, atol=1e-15)
            u_nb = nb.memberships(d2_nb, q)
            u_np = npx.memberships(d2_nb, q)
            np.testing.assert_allclose(u_nb, u_np, rtol=1e-12, atol=1e-15)
            j_nb = nb.objective(d2_nb, u_nb, q)
            j_np = npx.objective(d2_nb, u_nb, q)
            assert j_nb == pytest.approx(j_np, rel=1e-12)

    def test_singularity_rule_agrees(self):
        nb = get_backend("numba")
        npx = get_backend("numpy")
        d2 = np.array([[0.0, 4.0, 0.0], [1.0, 2.0, 3.0]])
        np.testing.assert_array_equal(
            nb.memberships(d2, 2.0), npx.memberships(d2, 2.0)
        )
        np.testing.assert_array_equal(
            nb.memberships(d2, 2.0)[0], [0.5, 0.0, 0.5]
        )

    def test_full_run_agrees_across_backends(self, monkeypatch):
        rng = np.random.default_rng(123)
        data = rng.normal(size=(30, 3))
        data[15:, 0] += 8.0
        config = FcmConfig(n_clusters=2, seed=11)
        monkeypatch.setenv("FLATM_BACKEND", "numba")
        a = fcm_run(data, config)
        monkeypatch.setenv("FLATM_BACKEND", "numpy")
        b = fcm_run(data, config)
        np.testing.assert_allclose(a.membership, b.membership, atol=1e-9)
        np.testing.assert_allclose(a.centers, b.centers, atol=1e-9)
        assert a.iterations == b.iterations
        assert a.converged == b.converged
