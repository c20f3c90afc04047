import pytest

# criterion number -> (title, passed); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is not None and report.when == "call":
        ACCEPTANCE[num] = (item.function.criterion_title, report.passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {title}")
