"""ait-run: execute a command with tracing injected via sitecustomize.

The wrapper writes a one-shot sitecustomize.py into a temp directory and
prepends it to PYTHONPATH, so any Python child imports it at startup and
calls autostart.install(). Non-Python commands ignore the variable and
run untouched; stdout, stderr, and the exit code always pass through
unchanged. Occurrences of {input} in the command are replaced with the
AIT_DATAPOINT_INPUT value when one is set.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
from typing import Optional

_SITECUSTOMIZE = """\
try:
    from ait_client import autostart
    autostart.install()
except Exception:
    pass
"""


def substitute_input(command: list[str], datapoint_input: Optional[str]) -> list[str]:
    if datapoint_input is None:
        return command
    return [datapoint_input if arg == "{input}" else arg for arg in command]


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ait-run",
        description="Run a command with trace instrumentation injected.",
    )
    parser.add_argument("--framework", default="ait-run", help="framework label for the handshake")
    parser.add_argument("command", nargs=argparse.REMAINDER, help="command to execute")
    args = parser.parse_args(argv)

    command = args.command
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        parser.print_usage(sys.stderr)
        return 2

    command = substitute_input(command, os.environ.get("AIT_DATAPOINT_INPUT"))

    with tempfile.TemporaryDirectory(prefix="ait-run-") as td:
        with open(os.path.join(td, "sitecustomize.py"), "w", encoding="utf-8") as fh:
            fh.write(_SITECUSTOMIZE)
        env = dict(os.environ)
        existing = env.get("PYTHONPATH")
        env["PYTHONPATH"] = td if not existing else td + os.pathsep + existing
        env["AIT_RUN_ACTIVE"] = "1"
        env["AIT_RUN_CMD"] = json.dumps(command)
        env["AIT_RUN_FRAMEWORK"] = args.framework
        try:
            proc = subprocess.run(command, env=env)
        except FileNotFoundError:
            print(f"ait-run: command not found: {command[0]}", file=sys.stderr)
            return 127
        return proc.returncode


if __name__ == "__main__":
    raise SystemExit(main())
