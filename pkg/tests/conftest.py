import pytest
from hypothesis import HealthCheck, settings

from smock import builtin_pattern
from smock.pattern import BUILTIN_NAMES

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(params=BUILTIN_NAMES)
def builtin(request):
    return builtin_pattern(request.param)
