import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_addoption(parser):
    parser.addoption("--paper-scale", action="store_true", default=False,
                     help="run the long paper-scale suite")


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_collection_modifyitems(config, items):
    if config.getoption("--paper-scale"):
        return
    skip = pytest.mark.skip(reason="paper-scale run; enable with --paper-scale")
    for item in items:
        if "paper_scale" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def acceptance_log(request):
    log = request.config.stash[ACCEPTANCE_KEY]

    def record(number, passed, detail):
        line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        log.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
