"""Shared helpers and the acceptance-criterion report."""

from __future__ import annotations

from pathlib import Path

import pytest

from robustcheck.corpus import bundled_dir
from robustcheck.parser import parse_file, parse_program

CORPUS = bundled_dir()


def corpus_path(name: str) -> Path:
    return Path(CORPUS) / f"{name}.ifc"


def load(name: str, domain: int | None = None):
    return parse_file(corpus_path(name), domain)


def prog(text: str, domain: int = 4):
    return parse_program(text, domain)


# ------------------------------------------------------------ criterion lines

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = _MARKERS.get(report.nodeid)
    if marker is None:
        return
    number, title = marker
    ok = report.passed
    prev = _CRITERIA.get(number, (title, True))
    _CRITERIA[number] = (title, prev[1] and ok)


_MARKERS: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _MARKERS[item.nodeid] = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")


