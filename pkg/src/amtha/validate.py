"""Schedule validity checks shared by the mapper, the oracle and the simulator."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .errors import ScheduleError
from .graph import ApplicationGraph
from .topology import Topology, comm_cost

EPS = 1e-9


@dataclass(frozen=True)
class Placement:
    subtask: str
    core: str
    start: float
    finish: float


def check_placements(
    g: ApplicationGraph,
    topo: Topology,
    placements: Mapping[str, Placement],
    assignment: Mapping[str, str] | None = None,
    pending: Iterable[str] = (),
    eps: float = EPS,
) -> list[str]:
    """Return every violated rule as a human-readable line; empty means valid."""
    problems: list[str] = []
    pending = list(pending)
    if pending:
        problems.append(f"{len(pending)} subtasks still pending: {sorted(pending)[:5]}")
    for sid in g.subtasks:
        if sid not in placements:
            problems.append(f"{sid} is not placed")
    for sid in placements:
        if sid not in g.subtasks:
            problems.append(f"{sid} is placed but not in the graph")
    if problems:
        return problems

    by_core: dict[str, list[Placement]] = defaultdict(list)
    for sid, pl in placements.items():
        st = g.subtasks[sid]
        if pl.core not in topo.cores:
            problems.append(f"{sid} placed on unknown core {pl.core}")
            continue
        dur = st.exec_time[topo.cores[pl.core].processor_type]
        if pl.start < -eps:
            problems.append(f"{sid} starts before 0 ({pl.start})")
        if abs(pl.finish - (pl.start + dur)) > eps:
            problems.append(f"{sid} finish {pl.finish} != start {pl.start} + {dur}")
        by_core[pl.core].append(pl)

    for core, pls in by_core.items():
        pls.sort(key=lambda p: (p.start, p.finish))
        for a, b in zip(pls, pls[1:]):
            if a.finish > b.start + eps:
                problems.append(f"overlap on {core}: {a.subtask} [{a.start}, {a.finish}] and "
                                f"{b.subtask} [{b.start}, {b.finish}]")

    for task in g.tasks.values():
        cores = {placements[sid].core for sid in task.subtasks}
        if len(cores) != 1:
            problems.append(f"task {task.id} split over cores {sorted(cores)}")
        elif assignment is not None and assignment.get(task.id) not in cores:
            problems.append(f"task {task.id} assigned to {assignment.get(task.id)} but runs on {cores.pop()}")
        for a, b in zip(task.subtasks, task.subtasks[1:]):
            if placements[b].start < placements[a].finish - eps:
                problems.append(f"{b} starts before its chain predecessor {a} finishes")

    for e in g.edges:
        src, dst = placements[e.source_subtask], placements[e.target_subtask]
        ready = src.finish + comm_cost(topo, src.core, dst.core, e.volume)
        if dst.start < ready - eps:
            problems.append(f"{dst.subtask} starts at {dst.start} before data from "
                            f"{src.subtask} arrives at {ready}")
    return problems


def assert_valid(g, topo, placements, assignment=None, pending=()) -> None:
    problems = check_placements(g, topo, placements, assignment, pending)
    if problems:
        more = f" (+{len(problems) - 3} more)" if len(problems) > 3 else ""
        raise ScheduleError("; ".join(problems[:3]) + more)
