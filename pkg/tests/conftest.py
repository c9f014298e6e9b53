import json
import os

import registry


def pytest_collection_modifyitems(session, config, items):
    # acceptance checks read what the rest of the session measured
    items.sort(key=lambda it: it.nodeid.split("::")[0].endswith("test_acceptance.py"))


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_properties.py" in report.nodeid:
        registry.OUTCOMES[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not registry.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(registry.ACCEPTANCE):
        ok, detail = registry.ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_sessionfinish(session, exitstatus):
    dump = os.environ.get("PROPCOUNT_FILE")
    if dump:
        with open(dump, "w") as fh:
            json.dump({"counts": dict(registry.COUNTS), "outcomes": registry.OUTCOMES}, fh)
