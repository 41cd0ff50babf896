from __future__ import annotations

import pytest

from birtcombine import _backend, _kernels_py

BACKENDS = {"python": _kernels_py}
if _backend.NAME == "cython":
    BACKENDS["cython"] = _backend.kernels

_MODULES = ("birtcombine.birt", "birtcombine.combiner", "birtcombine.regressors")


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    import importlib

    for name in _MODULES:
        monkeypatch.setattr(importlib.import_module(name), "kernels", BACKENDS[request.param])
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    RESULTS = getattr(mod, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        ok, detail = RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
