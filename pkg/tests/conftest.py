import random

import numpy as np
import pytest

from triage.tasks import TIERS, TaskFile, TaskRecord


def make_task(task_id, healths=(9.5,), light="ppp", standard="ppp", heavy="ppp",
              patch_size=10, coverage=None):
    """Task with per-tier run strings such as ``"pfp"``."""
    runs = {tier: tuple(ch == "p" for ch in pattern) for tier, pattern in zip(TIERS, (light, standard, heavy))}
    files = tuple(TaskFile(f"{task_id}/f{i}.py", h) for i, h in enumerate(healths))
    return TaskRecord(task_id, files, patch_size, coverage, runs)


def python_module(rng: random.Random, n_funcs: int = 3) -> str:
    """Small synthetic Python module with a random mix of control flow."""
    out = ["import os", ""]
    for i in range(n_funcs):
        args = ", ".join(f"arg{j}" for j in range(rng.randint(0, 5)))
        out.append(f"def func_{i}_{rng.randint(0, 10**6)}({args}):")
        for j in range(rng.randint(1, 6)):
            kind = rng.choice(["if", "for", "while", "plain"])
            if kind == "if":
                out.append(f"    if value_{j} > {rng.randint(0, 9)} and flag:")
                out.append(f"        total = value_{j} + 1")
            elif kind == "for":
                out.append(f"    for item in range({rng.randint(1, 9)}):")
                out.append("        total = item * 2")
            elif kind == "while":
                out.append("    while total < 10:")
                out.append("        total += 1")
            else:
                out.append(f"    total = {rng.randint(0, 100)}")
        out.append("    return total")
        out.append("")
    return "\n".join(out)


@pytest.fixture
def pyrng():
    return random.Random(1234)


def brute_p_hat(xs, ys):
    total = sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in xs for y in ys)
    return total / (len(xs) * len(ys))


def bm_fixtures():
    """Twenty sample pairs: continuous, tied integer and unbalanced (12 vs 15)."""
    rng = np.random.default_rng(2024)
    out = [(rng.normal(0, 1, 12), rng.normal(0.4, 1.5, 15))]
    for i in range(19):
        nx, ny = rng.integers(5, 40, 2)
        if i % 3 == 0:
            out.append((rng.integers(1, 10, nx).astype(float), rng.integers(2, 11, ny).astype(float)))
        else:
            out.append((rng.uniform(1, 10, nx), rng.uniform(1, 10, ny) + rng.normal(0, 1)))
    return out


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
