ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, elapsed, limit, detail = ACCEPTANCE[k]
        budget = f"< {limit:g} s" if limit else "no limit"
        terminalreporter.write_line(
            f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {elapsed:7.2f} s ({budget})  {detail}")
