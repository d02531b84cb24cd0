import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _results.setdefault(n, {"title": title, "ok": True, "seen": 0})


def pytest_runtest_logreport(report):
    if report.when != "call" and not report.failed:
        return
    mark = next((m for m in report.keywords if m.startswith("criterion_")), None)
    if mark is None:
        return
    n = int(mark.split("_")[1])
    entry = _results.get(n)
    if entry is None:
        return
    if report.when == "call":
        entry["seen"] += 1
    if report.failed or report.skipped:
        entry["ok"] = False


def pytest_itemcollected(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.keywords[f"criterion_{mark.args[0]}"] = True


def pytest_terminal_summary(terminalreporter):
    ran = {n: e for n, e in _results.items() if e["seen"] or not e["ok"]}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        entry = ran[n]
        ok = entry["ok"] and entry["seen"] > 0
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {entry['title']}")
