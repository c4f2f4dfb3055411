import json
from pathlib import Path

import pytest

from spotex.server import DpiServer, ServerConfig, ServerMode
from spotex.venue import load_venue

SAMPLES = Path(__file__).resolve().parent.parent / "samples"
GOLDEN = Path(__file__).resolve().parent / "golden"

SESSION = "test-session-0123456789abcdef"


@pytest.fixture
def cafe_venue():
    return load_venue((SAMPLES / "cafe-venue.json").read_text(encoding="utf-8"))


@pytest.fixture
def two_floor_venue():
    return load_venue((SAMPLES / "two-floors-venue.json").read_text(encoding="utf-8"))


@pytest.fixture
def cafe_rules_text():
    return (SAMPLES / "cafe.spotex").read_text(encoding="utf-8")


@pytest.fixture
def make_dpi(tmp_path):
    """Factory for live DPI servers on ephemeral ports, stopped on teardown."""
    servers = []

    def start(rules_text, venue=None, mode=ServerMode.SIM, seed=7, **kwargs) -> DpiServer:
        rules_path = tmp_path / f"rules-{len(servers)}.spotex"
        rules_path.write_text(rules_text, encoding="utf-8")
        config = ServerConfig(port=0, mode=mode, rules_path=rules_path, seed=seed, **kwargs)
        server = DpiServer(config, ruleset_text=rules_text, venue=venue)
        server.start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()


def move(client, server, session, x, y, floor=0):
    resp = client.post(
        f"http://127.0.0.1:{server.port}/sim/move",
        params={"session": session},
        content=json.dumps({"x": x, "y": y, "floor": floor}),
    )
    assert resp.status_code == 200, resp.text
    return resp.json()
