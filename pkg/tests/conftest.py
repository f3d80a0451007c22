import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from subhyp.alpha_boundary import build_alpha_boundary  # noqa: E402
from subhyp.geometry import load_domain  # noqa: E402
from subhyp.whitney import build_whitney  # noqa: E402


@lru_cache(maxsize=None)
def domain(name):
    return load_domain(name)


@lru_cache(maxsize=32)
def whitney(name, depth):
    return build_whitney(domain(name), depth)


@lru_cache(maxsize=16)
def boundary(name, depth, alpha, **kw):
    return build_alpha_boundary(domain(name), whitney(name, depth), alpha, **kw)


@pytest.fixture(scope="session")
def W():
    return whitney


@pytest.fixture(scope="session")
def AB():
    return boundary


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
