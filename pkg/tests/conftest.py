import os
import tempfile

import pytest

from vemul.engine import EngineClient
from vemul.runtime import Runtime

from . import standin_engine

STANDIN_UNAVAILABLE = standin_engine.available()


@pytest.fixture
def standin():
    if STANDIN_UNAVAILABLE:
        pytest.skip(f"namespace-backed engine stand-in unavailable: {STANDIN_UNAVAILABLE}")
    with tempfile.TemporaryDirectory() as d:
        with standin_engine.StandinEngine(os.path.join(d, "engine.sock")) as eng:
            yield eng


@pytest.fixture
def runtime(standin):
    rt = Runtime(engine=EngineClient(standin.socket_path))
    yield rt
    rt.sweep()


# --- acceptance criteria reporting ---------------------------------------------------

_CRITERIA = []


@pytest.fixture
def criterion(request, capsys):
    """``criterion(number, title)`` returns a recorder; call ``.done(ok, detail)``."""

    class Recorder:
        def __init__(self, number, title):
            self.number, self.title = number, title
            self.outcome = None

        def done(self, ok, detail=""):
            self.outcome = (ok, detail)
            line = f"criterion {self.number} {'PASS' if ok else 'FAIL'}: {self.title}" + (f" ({detail})" if detail else "")
            _CRITERIA.append((self.number, line))
            with capsys.disabled():
                print("\n" + line)
            return ok

    recorders = []

    def make(number, title):
        r = Recorder(number, title)
        recorders.append(r)
        return r

    yield make
    for r in recorders:
        if r.outcome is None:  # the test raised before deciding
            exc = getattr(request.node, "_acceptance_error", None)
            r.done(False, f"raised {exc}" if exc else "raised before completing")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and rep.failed and call.excinfo is not None:
        exc = call.excinfo.value
        item._acceptance_error = f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda x: x[0]):
        terminalreporter.write_line(line)
