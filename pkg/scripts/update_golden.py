"""Regenerate the golden manifest hash for the shipped 3-page fixture.

Only run this after an intentional change to pipeline outputs; the acceptance
suite compares against the stored value.
"""
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from conftest import run_golden  # noqa: E402
from docback.pipeline import manifest_digest  # noqa: E402


def main():
    with tempfile.TemporaryDirectory() as d:
        run_golden(d)
        digest = manifest_digest(d)
    out = ROOT / "tests" / "golden" / "three_page_manifest.sha256"
    out.write_text(digest + "\n")
    print(f"{digest}  -> {out.relative_to(ROOT)}")


if __name__ == "__main__":
    main()
