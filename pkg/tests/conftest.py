import os
import time
from contextlib import contextmanager

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.register_profile("thorough", deadline=None, max_examples=2000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_VERDICTS: dict[int, str] = {}


class _Verdict:
    def __init__(self):
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    @contextmanager
    def record(number: int, title: str):
        v = _Verdict()
        t0 = time.perf_counter()
        try:
            yield v
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            line = f"criterion {number:2d} FAIL  {title}: {msg}"
            _VERDICTS[number] = line
            print(line)
            raise
        extra = "; ".join(v.notes)
        line = f"criterion {number:2d} PASS  {title} ({time.perf_counter() - t0:.2f}s{'; ' + extra if extra else ''})"
        _VERDICTS[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
