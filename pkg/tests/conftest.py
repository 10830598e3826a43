import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stiefel import _backend, _fallback

settings.register_profile(
    "repo",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

try:
    from stiefel import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["cython"] = _kernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = BACKENDS[request.param]
    for name in ("expm", "exp_map_core", "shoot_jacobian"):
        monkeypatch.setattr(_backend, name, getattr(mod, name))
    monkeypatch.setattr(_backend, "NAME", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# acceptance criteria report their verdicts here; printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
