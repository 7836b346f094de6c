import asyncio
import inspect
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from parapif.models import Domain, PhaseSpaceState  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale acceptance checks")


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "asyncio: run test inside a dedicated asyncio event loop without pytest-asyncio.",
    )
    config.addinivalue_line("markers", "slow: desk-scale check, only runs with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_pyfunc_call(pyfuncitem):
    if inspect.iscoroutinefunction(pyfuncitem.obj):
        loop = asyncio.new_event_loop()
        try:
            argnames = pyfuncitem._fixtureinfo.argnames
            kwargs = {name: pyfuncitem.funcargs[name] for name in argnames}
            loop.run_until_complete(pyfuncitem.obj(**kwargs))
        finally:
            loop.close()
        return True
    return None


def random_state(n, length=2 * np.pi, seed=0, charge=-1.0, q_over_m=-1.0):
    rng = np.random.default_rng(seed)
    return PhaseSpaceState(
        x=rng.uniform(0.0, length, size=(n, 3)),
        v=rng.normal(size=(n, 3)),
        w=rng.uniform(0.5, 1.5, size=n),
        domain=Domain(length),
        q_over_m=q_over_m,
        charge=charge,
    )


@pytest.fixture()
def make_state():
    return random_state
