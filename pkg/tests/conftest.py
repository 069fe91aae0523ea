from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

# nodeid -> (criterion number, title), and number -> (title, outcome)
_criterion_items: dict[str, tuple[int, str]] = {}
_criterion_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_items[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report):
    meta = _criterion_items.get(report.nodeid)
    if meta is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = meta
        # parametrized criteria pass only if every case passes
        previous = _criterion_results.get(number, (title, "PASS"))[1]
        outcome = "PASS" if report.passed and previous == "PASS" else "FAIL"
        _criterion_results[number] = (title, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_results):
        title, outcome = _criterion_results[number]
        terminalreporter.write_line(f"criterion {number:2d} {outcome}: {title}")
