import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request, capsys):
    """Report one acceptance line; shown inline and again in the summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def report(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
