import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# the worked eight-entry vector used throughout the examples
EXAMPLE8 = [2, 3, 8, 1, 7, 6, 4, 3]
EXAMPLE8_STREAM = [(i, v) for i, v in enumerate(EXAMPLE8)]

CRITERIA: list[str] = []


def record_criterion(line: str) -> None:
    CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
