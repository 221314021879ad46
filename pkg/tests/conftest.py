import pytest

from amtha.graph import build_graph
from amtha.topology import load_topology, preset


def flat_topology(n_cores=2, bandwidth=1000.0, latency=0.0, types=None):
    """All cores directly under one level."""
    types = types or ["A"] * n_cores
    cores = [{"id": f"c{i}", "core": True, "processor_type": t} for i, t in enumerate(types)]
    root = {"id": "mem", "kind": "shared-memory-level", "bandwidth_Bps": bandwidth,
            "latency_s": latency, "children": cores}
    return load_topology({"name": "flat", "processor_types": sorted(set(types)), "root": root})


def chain_graph(tasks, edges=(), ptype="A"):
    """``tasks``: {task_id: [durations]}; subtasks are named ``<task>.s<k>``."""
    return build_graph(
        [(tid, [(f"{tid}.s{k}", {ptype: d}) for k, d in enumerate(durs)]) for tid, durs in tasks.items()],
        edges,
    )


@pytest.fixture(scope="session")
def fig1():
    return preset("fig1_8core")


@pytest.fixture(scope="session")
def hp64():
    return preset("hp_64core")


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def report(pytestconfig):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = pytestconfig.stash[ACCEPTANCE]

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
