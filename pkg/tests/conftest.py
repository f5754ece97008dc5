from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

TASKS = Path(__file__).resolve().parent.parent / "tasks"
BUNDLED = ("chain", "logistics", "travel", "counter", "errands")


def task_paths(name: str) -> tuple[Path, Path]:
    return TASKS / f"{name}-domain.pddl", TASKS / f"{name}-problem.pddl"


def load_bundled(name: str):
    from tagplan.pddl import load_task

    d, p = task_paths(name)
    return load_task(d.read_text(), p.read_text())


@pytest.fixture(scope="session")
def bundled():
    cache: dict = {}

    def get(name: str):
        if name not in cache:
            cache[name] = load_bundled(name)
        return cache[name]
    return get


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
