import numpy as np
import pytest

from flatm import FcmConfig, fcm_run


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Trigger any one-time jit compilation before timed tests run.
    rng = np.random.default_rng(0)
    fcm_run(rng.random((8, 3)), FcmConfig(n_clusters=2, max_iterations=3))
