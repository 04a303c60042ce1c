import sys
from pathlib import Path
from typing import Optional

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2


def write_output(text: str, path: Optional[str]) -> None:
    """Write to `path`, or to stdout when no path (or '-') is given."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text, encoding="utf-8")
