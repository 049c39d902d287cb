import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
