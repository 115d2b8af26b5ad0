"""Shared fixtures: a small generated corpus and a kernel-backend switch."""

from __future__ import annotations

import pytest

from affordkit import geometry
from affordkit.datagen import ARTICULATED_CATEGORIES, TOOL_CATEGORIES, GenConfig, generate_corpus


@pytest.fixture(params=geometry.available_backends())
def backend(request):
    """Run a test once per available geometry kernel backend."""
    previous = geometry.BACKEND
    geometry.use_backend(request.param)
    yield request.param
    geometry.use_backend(previous)


def small_config(seed: int = 11) -> GenConfig:
    return GenConfig(
        seed=seed,
        articulated={c: 2 for c in ARTICULATED_CATEGORIES},
        tools={c: 2 for c in TOOL_CATEGORIES},
        states_per_object=1,
        views_per_object=1,
        unseen_instance_ratio=0.5,
        tool_scenes={"train": 6, "unseen_instance": 6, "unseen_category": 6},
    )


@pytest.fixture(scope="session")
def small_cfg() -> GenConfig:
    return small_config()


@pytest.fixture(scope="session")
def corpus(small_cfg):
    return generate_corpus(small_cfg)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, after the run."""
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
