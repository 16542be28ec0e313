VERDICTS = []


def record(tag, ok, detail=""):
    VERDICTS.append(f"{tag} {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in VERDICTS:
            terminalreporter.write_line(line)
