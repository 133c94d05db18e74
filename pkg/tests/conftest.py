def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion PASS/FAIL lines at the end of a run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
