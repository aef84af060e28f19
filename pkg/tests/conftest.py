from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "fixtures" / "three_page.json"


@pytest.fixture
def fixture_layout():
    return FIXTURE


@pytest.fixture
def golden_path():
    return ROOT / "tests" / "golden" / "three_page_manifest.sha256"


GOLDEN_PROMPT = "muted watercolor"


def run_golden(out_dir):
    """The reference run: shipped fixture, stub provider, default config plus a fixed prompt."""
    from docback.config import PipelineConfig
    from docback.pipeline import run_pipeline

    cfg = PipelineConfig().with_overrides(narrative={"user_prompt": GOLDEN_PROMPT})
    return run_pipeline(FIXTURE, out_dir, cfg)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
