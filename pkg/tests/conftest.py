import time
from pathlib import Path

import pytest

from pmcrnet.data import make_synthetic_dataset

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory) -> Path:
    """Eight 256x448 synthetic sequences in Vimeo90K layout."""
    return make_synthetic_dataset(tmp_path_factory.mktemp("vimeo_mini"), sequences=8, seed=0)


def _toy_cli_run(root: Path, out: Path) -> dict:
    from pmcrnet.cli import main

    start = time.perf_counter()
    code = main(["train", "--toy", "--data", str(root), "--list", "tri_trainlist.txt", "--out", str(out), "--seed", "0"])
    seconds = time.perf_counter() - start
    return {"code": code, "seconds": seconds, "out": out, "dataset": root, "log": (out / "train.log").read_text().splitlines()}


@pytest.fixture(scope="session")
def toy_run(mini_dataset, tmp_path_factory) -> dict:
    return _toy_cli_run(mini_dataset, tmp_path_factory.mktemp("toy_a"))


@pytest.fixture(scope="session")
def toy_run_repeat(mini_dataset, tmp_path_factory) -> dict:
    return _toy_cli_run(mini_dataset, tmp_path_factory.mktemp("toy_b"))
