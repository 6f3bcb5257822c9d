import pytest

from packsim.engine import Simulator
from packsim.metrics import MetricsAccumulator
from packsim.scenario import from_dict


def chain_config(hops, duration_s=10.0, seed=1, **sections):
    """Static chain of ``hops + 1`` nodes, 200 m apart, one flow end to end."""
    data = {
        "name": f"chain{hops}",
        "area_w": 200.0 * hops + 200.0,
        "area_h": 100.0,
        "duration_s": duration_s,
        "seed": seed,
        "nodes": {"chain": {"n": hops + 1, "spacing": 200.0}},
        "flows": [{"src": 0, "dst": hops, "start_s": 1.0}],
    }
    data.update(sections)
    return from_dict(data).config


class FakeRouting:
    def __init__(self):
        self.sent = []

    def send(self, packet):
        self.sent.append(packet)


class FakeNode:
    """Just enough of a node for driving a TCP endpoint by hand."""

    def __init__(self, node_id=0):
        self.id = node_id
        self.sim = Simulator()
        self.metrics = MetricsAccumulator()
        self.routing = FakeRouting()

    def trace(self, *args):
        pass


@pytest.fixture
def fake_node():
    return FakeNode()


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
