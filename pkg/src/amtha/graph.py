"""Application task graph: tasks made of ordered subtasks plus communication edges.

A task is a linear chain of subtasks that always runs on one core. Edges connect
subtasks of different tasks and carry a byte volume rather than a time, since the
transfer time depends on where the two endpoints end up.
"""

from __future__ import annotations

import graphlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from ._io import read_document
from .errors import (
    CycleError,
    DanglingReferenceError,
    GraphError,
    MissingTimeError,
    ParseError,
)

if TYPE_CHECKING:
    from .topology import Topology


@dataclass(frozen=True)
class Subtask:
    id: str
    task_id: str
    index_in_task: int
    exec_time: Mapping[str, float]


@dataclass(frozen=True)
class Task:
    id: str
    subtasks: tuple[str, ...]


@dataclass(frozen=True)
class CommEdge:
    source_subtask: str
    target_subtask: str
    volume: int


@dataclass(frozen=True, eq=False)
class ApplicationGraph:
    """Immutable, validated task graph.

    ``tasks`` and ``subtasks`` keep document order. ``edges`` is sorted by
    (source, target) and holds at most one edge per subtask pair.
    """

    tasks: Mapping[str, Task]
    subtasks: Mapping[str, Subtask]
    edges: tuple[CommEdge, ...]
    _preds: dict = field(default_factory=dict, repr=False)
    _succs: dict = field(default_factory=dict, repr=False)
    _in_edges: dict = field(default_factory=dict, repr=False)
    _out_edges: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        in_edges = {sid: [] for sid in self.subtasks}
        out_edges = {sid: [] for sid in self.subtasks}
        for e in self.edges:
            in_edges[e.target_subtask].append(e)
            out_edges[e.source_subtask].append(e)
        preds, succs = {}, {}
        for sid, st in self.subtasks.items():
            p = {e.source_subtask for e in in_edges[sid]}
            s = {e.target_subtask for e in out_edges[sid]}
            chain = self.tasks[st.task_id].subtasks
            if st.index_in_task > 0:
                p.add(chain[st.index_in_task - 1])
            if st.index_in_task + 1 < len(chain):
                s.add(chain[st.index_in_task + 1])
            preds[sid] = frozenset(p)
            succs[sid] = frozenset(s)
        object.__setattr__(self, "_preds", preds)
        object.__setattr__(self, "_succs", succs)
        object.__setattr__(self, "_in_edges", {k: tuple(v) for k, v in in_edges.items()})
        object.__setattr__(self, "_out_edges", {k: tuple(v) for k, v in out_edges.items()})

    def __eq__(self, other):
        if not isinstance(other, ApplicationGraph):
            return NotImplemented
        return (
            list(self.tasks.items()) == list(other.tasks.items())
            and {k: (v.task_id, v.index_in_task, dict(v.exec_time)) for k, v in self.subtasks.items()}
            == {k: (v.task_id, v.index_in_task, dict(v.exec_time)) for k, v in other.subtasks.items()}
            and self.edges == other.edges
        )

    def in_edges(self, sid: str) -> tuple[CommEdge, ...]:
        return self._in_edges[sid]

    def out_edges(self, sid: str) -> tuple[CommEdge, ...]:
        return self._out_edges[sid]

    def processor_types(self) -> set[str]:
        types: set[str] = set()
        for st in self.subtasks.values():
            types.update(st.exec_time)
        return types

    def topological_order(self) -> list[str]:
        return list(graphlib.TopologicalSorter(self._preds).static_order())


def predecessors(g: ApplicationGraph, s: str) -> frozenset[str]:
    """Chain predecessor (if any) plus the source of every edge into ``s``."""
    try:
        return g._preds[s]
    except KeyError:
        raise DanglingReferenceError(s) from None


def successors(g: ApplicationGraph, s: str) -> frozenset[str]:
    try:
        return g._succs[s]
    except KeyError:
        raise DanglingReferenceError(s) from None


def compute_avg_time(s: Subtask, topo: Topology) -> float:
    """Execution time of ``s`` averaged over every core of ``topo``.

    Each core contributes its own processor type's time, so a type with three
    cores weighs three times as much as a type with one.
    """
    total = 0.0
    for core in topo.cores.values():
        try:
            total += s.exec_time[core.processor_type]
        except KeyError:
            raise MissingTimeError(s.id, core.processor_type) from None
    return total / len(topo.cores)


def check_processor_types(g: ApplicationGraph, types: Iterable[str]) -> None:
    types = list(types)
    for st in g.subtasks.values():
        for ptype in types:
            if ptype not in st.exec_time:
                raise MissingTimeError(st.id, ptype)


def build_graph(
    tasks: Iterable[tuple[str, list[tuple[str, Mapping[str, float]]]]],
    edges: Iterable[tuple[str, str, int]] = (),
    processor_types: Iterable[str] | None = None,
) -> ApplicationGraph:
    """Validate and assemble a graph from plain tuples.

    ``tasks`` yields ``(task_id, [(subtask_id, exec_time), ...])``; ``edges``
    yields ``(src, dst, volume)``. Parallel edges between one subtask pair are
    merged by summing their volumes.
    """
    task_map: dict[str, Task] = {}
    sub_map: dict[str, Subtask] = {}
    for tid, subs in tasks:
        if tid in task_map:
            raise GraphError(f"duplicate task id {tid!r}")
        if not subs:
            raise GraphError(f"task {tid!r} has no subtasks")
        ids = []
        for idx, (sid, times) in enumerate(subs):
            if sid in sub_map:
                raise GraphError(f"duplicate subtask id {sid!r}")
            times = {str(k): float(v) for k, v in times.items()}
            for ptype, v in times.items():
                if not v > 0:
                    raise GraphError(
                        f"subtask {sid!r}: execution time for {ptype!r} must be positive"
                    )
            sub_map[sid] = Subtask(sid, tid, idx, times)
            ids.append(sid)
        task_map[tid] = Task(tid, tuple(ids))

    merged: dict[tuple[str, str], int] = {}
    for src, dst, vol in edges:
        for ref in (src, dst):
            if ref not in sub_map:
                raise DanglingReferenceError(ref, f"edge {src} -> {dst}")
        if sub_map[src].task_id == sub_map[dst].task_id:
            raise GraphError(f"edge {src} -> {dst} joins subtasks of the same task")
        if isinstance(vol, bool) or int(vol) != vol or vol <= 0:
            raise GraphError(f"edge {src} -> {dst}: volume must be a positive integer")
        merged[(src, dst)] = merged.get((src, dst), 0) + int(vol)
    edge_tuple = tuple(CommEdge(s, d, v) for (s, d), v in sorted(merged.items()))

    g = ApplicationGraph(task_map, sub_map, edge_tuple)
    try:
        g.topological_order()
    except graphlib.CycleError as exc:
        # graphlib lists the cycle in precedence order, closed on its first node
        raise CycleError(exc.args[1]) from None
    if processor_types is not None:
        check_processor_types(g, processor_types)
    return g


def load_graph(source, processor_types: Iterable[str] | None = None) -> ApplicationGraph:
    """Load a graph document (mapping, JSON text or file path) and validate it.

    Pass the topology's ``processor_types`` to also require a time entry for each.
    """
    doc = read_document(source)
    try:
        raw_tasks = doc["tasks"]
        raw_edges = doc.get("edges", [])
        tasks = [
            (str(t["id"]), [(str(s["id"]), dict(s["exec_time"])) for s in t["subtasks"]])
            for t in raw_tasks
        ]
        edges = [(str(e["src"]), str(e["dst"]), e["volume_bytes"]) for e in raw_edges]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"graph document does not match schema: {exc!r}") from None
    try:
        return build_graph(tasks, edges, processor_types)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"graph document does not match schema: {exc}") from None


def graph_to_dict(g: ApplicationGraph) -> dict:
    return {
        "tasks": [
            {
                "id": t.id,
                "subtasks": [
                    {"id": sid, "exec_time": dict(g.subtasks[sid].exec_time)} for sid in t.subtasks
                ],
            }
            for t in g.tasks.values()
        ],
        "edges": [
            {"src": e.source_subtask, "dst": e.target_subtask, "volume_bytes": e.volume}
            for e in g.edges
        ],
    }


def scaled_graph(g: ApplicationGraph, k: float) -> ApplicationGraph:
    """Copy of ``g`` with every execution time and edge volume multiplied by ``k``."""
    tasks = [
        (t.id, [(sid, {p: v * k for p, v in g.subtasks[sid].exec_time.items()}) for sid in t.subtasks])
        for t in g.tasks.values()
    ]
    edges = [(e.source_subtask, e.target_subtask, round(e.volume * k)) for e in g.edges]
    return build_graph(tasks, edges)
