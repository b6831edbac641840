"""In-process instrumentation client for the ait trace toolkit.

Speaks the toolkit's NDJSON-over-TCP protocol (docs/protocol.md in the
server repo) with nothing beyond the standard library. The session is
configured entirely through the AIT_TRACE_ADDR / AIT_RUN_ID /
AIT_DATAPOINT_INPUT environment contract, and every emit is a no-op
when tracing is unavailable: user code never fails because tracing is
down.
"""

from .bridge import CallbackBridge
from .session import ClientSession

__version__ = "0.1.0"

__all__ = ["ClientSession", "CallbackBridge", "__version__"]
