"""Corpus runner: programs annotated with ``// expect:`` lines.

Expectation forms::

    // expect: typecheck ok
    // expect: typecheck error T-CHECKED
    // expect: robustness ps reject
    // expect: robustness-endorse pi accept
    // expect: integrity reject

Integrity expectations on programs with checked endorsements are evaluated
on the lowered program.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .attacks import default_config
from .parser import parse_program
from .robustness import CHECKED, ENDORSE, INTEGRITY, ROBUSTNESS, check
from .semantics import PI
from .syntax import uses_checked
from .transform import lower_checked
from .typecheck import typecheck

EXPECT_RE = re.compile(r"^\s*//\s*expect\s*:\s*(.+?)\s*$", re.MULTILINE)
PROPERTIES = (ROBUSTNESS, ENDORSE, CHECKED, INTEGRITY)


@dataclass(frozen=True)
class Expectation:
    check: str  # "typecheck" or a property name
    mode: Optional[str]
    want: str  # "ok", "error T-XXX", "accept", "reject"

    @property
    def text(self) -> str:
        return " ".join(x for x in (self.check, self.mode, self.want) if x)


def parse_expectations(text: str) -> list:
    out = []
    for raw in EXPECT_RE.findall(text):
        parts = raw.split()
        match parts:
            case ["typecheck", "ok"]:
                out.append(Expectation("typecheck", None, "ok"))
            case ["typecheck", "error", rule]:
                out.append(Expectation("typecheck", None, f"error {rule}"))
            case ["integrity", ("accept" | "reject") as want]:
                out.append(Expectation(INTEGRITY, PI, want))
            case [prop, ("ps" | "pi") as mode, ("accept" | "reject") as want] if prop in PROPERTIES:
                out.append(Expectation(prop, mode, want))
            case _:
                raise ValueError(f"malformed expectation: {raw!r}")
    return out


def bundled_dir() -> Path:
    return Path(str(resources.files("robustcheck") / "corpus"))


def evaluate(p, exp: Expectation):
    """(observed outcome, verdict or None) for one expectation."""
    if exp.check == "typecheck":
        diags = typecheck(p)
        return ("ok" if not diags else f"error {diags[0].rule}"), None
    q = p
    if exp.check == INTEGRITY and uses_checked(p.body):
        q = lower_checked(p)
    v = check(q, exp.check, exp.mode, default_config(q, exp.mode))
    return v.status, v


def run_file(path, domain: Optional[int] = None, timings: bool = False) -> dict:
    path = Path(path)
    text = path.read_text()
    p = parse_program(text, domain)
    results = []
    for exp in parse_expectations(text):
        t0 = time.perf_counter()
        got, _ = evaluate(p, exp)
        item = {"check": exp.text, "expected": exp.want, "got": got, "ok": got == exp.want}
        if timings:
            item["seconds"] = round(time.perf_counter() - t0, 4)
        results.append(item)
    return {"file": path.name, "domain": p.domain, "results": results,
            "ok": all(r["ok"] for r in results)}


def corpus_files(directory) -> list:
    return sorted(Path(directory).glob("*.ifc"))


def run_corpus(directory=None, domain: Optional[int] = None, timings: bool = False) -> list:
    directory = bundled_dir() if directory is None else directory
    return [run_file(f, domain, timings) for f in corpus_files(directory)]
