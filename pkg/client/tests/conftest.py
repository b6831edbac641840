from __future__ import annotations

import pytest

from harness import Server, start_server, stop_server


@pytest.fixture(scope="session")
def server(tmp_path_factory: pytest.TempPathFactory) -> Server:
    srv = start_server(tmp_path_factory.mktemp("server-root"))
    yield srv
    stop_server(srv)
