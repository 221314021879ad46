"""Event-driven replay of a schedule.

The replay keeps the schedule's task-to-core assignment and each core's
subtask order but recomputes every start time. A subtask starts once the
subtask before it on the same core has finished, its chain predecessor has
finished and all its incoming messages have arrived. Messages leave when
their source subtask finishes.

With ``contention="none"`` a message takes exactly its topology transfer time,
so the replay reproduces the mapper's timeline. With
``contention="serialize-per-level"`` every communication level carries one
message at a time; requests queue FIFO by request time, then by message id.
"""

from __future__ import annotations

import graphlib
import heapq
from dataclasses import dataclass, field

from .errors import ScheduleError, SimulationError
from .graph import ApplicationGraph
from .mapper import Schedule
from .topology import Topology
from .validate import Placement

NONE = "none"
SERIALIZE = "serialize-per-level"
CONTENTION_MODES = (NONE, SERIALIZE)

# event kinds in processing order for equal timestamps
SUBTASK_FINISH = "subtask-finish"
MESSAGE_ARRIVE = "message-arrive"
SUBTASK_READY = "subtask-ready"
_KIND_RANK = {SUBTASK_FINISH: 0, MESSAGE_ARRIVE: 1, SUBTASK_READY: 2}


@dataclass(frozen=True, order=True)
class SimEvent:
    time: float
    kind: str
    payload: str


@dataclass
class SimulationResult:
    placements: dict[str, Placement]
    t_exec: float
    t_est: float
    dif_rel_pct: float
    contention: str
    messages_sent: int = 0
    trace: list[SimEvent] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "contention": self.contention,
            "placements": {
                sid: {"core": p.core, "start_s": p.start, "finish_s": p.finish}
                for sid, p in self.placements.items()
            },
            "t_est_s": self.t_est,
            "t_exec_s": self.t_exec,
            "dif_rel_pct": self.dif_rel_pct,
        }


def dif_rel(t_exec: float, t_est: float) -> float:
    """Relative estimation error in percent of the realized time."""
    if not t_exec > 0:
        raise SimulationError(f"t_exec must be positive, got {t_exec}")
    return (t_exec - t_est) / t_exec * 100.0


def message_id(src: str, dst: str) -> str:
    return f"{src}->{dst}"


def simulate(
    sched: Schedule,
    g: ApplicationGraph,
    topo: Topology,
    contention: str = NONE,
    record_trace: bool = False,
) -> SimulationResult:
    if contention not in CONTENTION_MODES:
        raise SimulationError(f"unknown contention mode {contention!r}")
    if not sched.is_complete():
        raise ScheduleError("cannot simulate an incomplete schedule")

    m = sched._m
    cores = m.cores
    lat, bw = m.lat_l, m.bw_l
    lvl = topo.level_matrix.tolist()
    serialize = contention == SERIALIZE

    core_of: dict[str, int] = {}
    next_on_core: dict[str, str] = {}
    # unresolved dependencies: incoming messages + chain predecessor + core predecessor
    deps: dict[str, int] = {}
    for ci, (_, _, ids) in enumerate(sched._lines):
        for k, sid in enumerate(ids):
            core_of[sid] = ci
            deps[sid] = (k > 0) + (m.chain_prev[sid] is not None) + len(m.ext_src[sid])
            if k + 1 < len(ids):
                next_on_core[sid] = ids[k + 1]
    chain_next = {prev: sid for sid, prev in m.chain_prev.items() if prev is not None}
    # outgoing messages per subtask, ordered by target id
    outgoing = {sid: sorted((e.target_subtask, float(e.volume)) for e in g.out_edges(sid)) for sid in g.subtasks}

    start: dict[str, float] = {}
    finish: dict[str, float] = {}
    level_free: dict[int, float] = {}
    trace: list[SimEvent] = []
    heap: list[tuple[float, int, str, str]] = []
    sent = 0

    def resolve(sid: str, now: float):
        deps[sid] -= 1
        if deps[sid] == 0:
            begin(sid, now)

    def begin(sid: str, now: float):
        start[sid] = now
        if record_trace:
            trace.append(SimEvent(now, SUBTASK_READY, sid))
        end = now + m.dur[sid][core_of[sid]]
        heapq.heappush(heap, (end, _KIND_RANK[SUBTASK_FINISH], sid, ""))

    for sid, n in deps.items():
        if n == 0:
            begin(sid, 0.0)

    while heap:
        now = heap[0][0]
        batch = []
        while heap and heap[0][0] == now:
            batch.append(heapq.heappop(heap))
        # finishes come first in the batch; collect their messages for FIFO service
        requests = []
        arrivals = []
        for _, kind, a, b in batch:
            if kind == 0:
                finish[a] = now
                if record_trace:
                    trace.append(SimEvent(now, SUBTASK_FINISH, a))
                src_core = core_of[a]
                for dst, vol in outgoing[a]:
                    requests.append((message_id(a, dst), a, dst, src_core, vol))
                if a in next_on_core:
                    resolve(next_on_core[a], now)
                if a in chain_next:
                    resolve(chain_next[a], now)
            else:
                arrivals.append((a, b))
        requests.sort()
        for mid, a, dst, src_core, vol in requests:
            sent += 1
            dst_core = core_of[dst]
            if src_core == dst_core:
                arrivals.append((mid, dst))
                continue
            cost = lat[src_core][dst_core] + vol / bw[src_core][dst_core]
            depart = now
            if serialize:
                level = lvl[src_core][dst_core]
                free = level_free.get(level, 0.0)
                if free > depart:
                    depart = free
                level_free[level] = depart + cost
            # same arithmetic as the mapper's data-ready time when depart == now
            arrive = depart + cost
            heapq.heappush(heap, (arrive, _KIND_RANK[MESSAGE_ARRIVE], mid, dst))
        for mid, dst in arrivals:
            if record_trace:
                trace.append(SimEvent(now, MESSAGE_ARRIVE, mid))
            resolve(dst, now)

    if len(finish) != len(g.subtasks):
        raise SimulationError("replay deadlocked: " + _deadlock_cycle(sched, g, finish))

    placements = {
        sid: Placement(sid, cores[core_of[sid]], start[sid], finish[sid]) for sid in g.subtasks
    }
    t_exec = max(finish.values())
    t_est = sched.t_est
    return SimulationResult(placements, t_exec, t_est, dif_rel(t_exec, t_est), contention, sent, trace)


def _deadlock_cycle(sched: Schedule, g: ApplicationGraph, finished) -> str:
    deps: dict[str, set[str]] = {sid: set() for sid in g.subtasks if sid not in finished}
    for sid in deps:
        deps[sid].update(q for q in g._preds[sid] if q not in finished)
    for _, _, ids in sched._lines:
        for a, b in zip(ids, ids[1:]):
            if b in deps and a not in finished:
                deps[b].add(a)
    try:
        list(graphlib.TopologicalSorter(deps).static_order())
    except graphlib.CycleError as exc:
        return "cycle " + " -> ".join(exc.args[1])
    return "no cycle found among unfinished subtasks"
