import os
import subprocess
import sys
from pathlib import Path

PACKAGE = "txreach"
SCRIPTS = Path("./scripts")


def _run(name: str) -> int:
    env = {**os.environ, "PACKAGE": PACKAGE}
    return subprocess.run([str(SCRIPTS / f"{name}.sh")] + sys.argv[1:], env=env).returncode


def __getattr__(name):
    """
    HACK to make poetry execute shell scripts (format, lint, test)
    """
    code = _run(name)
    if code:
        sys.exit(code)
    return lambda: None
