"""Rewrite tests/golden/help_*.txt from the current argument parser."""

import contextlib
import io
from pathlib import Path

from levelband.cli import run_cli

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"
COMMANDS = ["", "verify", "contour", "curvature", "critical-points"]


def help_text(cmd: str) -> str:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.suppress(SystemExit):
        run_cli(([cmd] if cmd else []) + ["--help"])
    return buf.getvalue()


def golden_name(cmd: str) -> str:
    return f"help_{(cmd or 'main').replace('-', '_')}.txt"


if __name__ == "__main__":
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for cmd in COMMANDS:
        (GOLDEN / golden_name(cmd)).write_text(help_text(cmd))
        print("wrote", golden_name(cmd))
