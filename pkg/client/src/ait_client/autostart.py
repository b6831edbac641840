"""Process-level auto instrumentation used by the ait-run wrapper.

install() is triggered from a generated sitecustomize module, so it runs
before user code in the wrapped process. It opens a session from the
environment, registers bridges with whatever frameworks are importable,
and finalizes the run at interpreter exit. A process can also query the
ambient session (current_session) to attach its own spans instead of
opening a second run.
"""

from __future__ import annotations

import atexit
import json
import logging
import os
import sys
import threading
from typing import Any, Optional

from . import fakeframework, langchain
from .bridge import CallbackBridge
from .session import ClientSession

log = logging.getLogger("ait_client.autostart")

_lock = threading.Lock()
_session: Optional[ClientSession] = None
_bridge: Optional[CallbackBridge] = None
_run_output: Optional[Any] = None
_run_error: Optional[str] = None
_uncaught: Optional[str] = None
_finalized = False


def current_session() -> Optional[ClientSession]:
    """The session opened by install(), if any."""
    return _session


def current_bridge() -> Optional[CallbackBridge]:
    return _bridge


def set_run_output(doc: Any) -> None:
    """Document to carry in the run_end payload; last writer wins."""
    global _run_output
    _run_output = doc


def set_run_error(message: str) -> None:
    """Mark the run failed even if the process exits cleanly."""
    global _run_error
    _run_error = message


def _input_doc() -> Any:
    raw = os.environ.get("AIT_DATAPOINT_INPUT")
    if raw is not None:
        try:
            return json.loads(raw)
        except ValueError:
            return raw
    cmd = os.environ.get("AIT_RUN_CMD")
    if cmd:
        try:
            return {"command": json.loads(cmd)}
        except ValueError:
            pass
    return {"command": sys.argv}


def _hook_excepthook() -> None:
    previous = sys.excepthook

    def hook(exc_type: Any, exc: Any, tb: Any) -> None:
        global _uncaught
        if _uncaught is None:
            _uncaught = f"{exc_type.__name__}: {exc}"
        previous(exc_type, exc, tb)

    sys.excepthook = hook


def _finalize() -> None:
    global _finalized
    with _lock:
        if _finalized or _session is None:
            return
        _finalized = True
    error = _run_error if _run_error is not None else _uncaught
    if error is not None:
        _session.error(error)
        _session.run_end({"status": "error", "error": error})
    else:
        _session.run_end(_run_output if _run_output is not None else {"status": "ok"})
    _session.close()


def install() -> bool:
    """Start a session from the environment; safe to call repeatedly."""
    global _session, _bridge
    if os.environ.get("AIT_RUN_ACTIVE") != "1":
        return False
    # children of the traced process must not open duplicate runs
    os.environ["AIT_RUN_ACTIVE"] = "0"
    with _lock:
        if _session is not None:
            return True
        session = ClientSession(framework=os.environ.get("AIT_RUN_FRAMEWORK", "ait-run"))
        if not session.start():
            return False
        _session = session
        _bridge = CallbackBridge(session)
    session.run_start(_input_doc())
    fakeframework.register_callback(_bridge)
    langchain.register(_bridge)
    _hook_excepthook()
    atexit.register(_finalize)
    return True
