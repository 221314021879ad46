"""AMTHA static mapping of a task graph onto the cores of a topology.

One task is assigned per iteration:

1. pick the unassigned task with the largest rank (sum of the average times of
   its ready subtasks), breaking ties by the smallest total average time and
   then by task id;
2. score every core by tentatively placing the task there and take the core with
   the smallest score (ties by core id);
3. place the task's subtasks on that core, each in the first timeline gap that
   starts no earlier than its data-ready time; subtasks whose predecessors are
   not placed yet wait in the core's pending list;
4. mark the task's rank -1 and credit newly ready subtasks to their tasks.

Placing a subtask may unblock pending subtasks anywhere in the machine; these
are placed immediately, cascading until nothing else becomes placeable.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingTimeError, ScheduleError, TopologyError
from .graph import ApplicationGraph, compute_avg_time, predecessors, successors
from .topology import Topology
from .validate import EPS, Placement, assert_valid

# relative tolerance for treating two ranks/averages/scores as equal
TIE_RTOL = 1e-9


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b)) + 1e-300


@dataclass
class CoreTimeline:
    core: str
    placed: list[Placement] = field(default_factory=list)
    pending: list[str] = field(default_factory=list)


@dataclass
class RankTable:
    """Task priorities. ``rank[t]`` is -1 once ``t`` has been assigned."""

    rank: dict[str, float]
    ready: dict[str, set[str]]
    # unplaced-predecessor count per subtask; a subtask is ready when it hits 0
    _waiting: dict[str, int] = field(default_factory=dict, repr=False)
    _avg: dict[str, float] = field(default_factory=dict, repr=False)
    _task_avg: dict[str, float] = field(default_factory=dict, repr=False)

    def is_assigned(self, task: str) -> bool:
        return self.rank[task] == -1


class _Model:
    """Index-based view of (graph, topology) used by the hot loops."""

    def __init__(self, g: ApplicationGraph, topo: Topology):
        self.g = g
        self.topo = topo
        self.cores = list(topo.cores)
        self.core_idx = {c: i for i, c in enumerate(self.cores)}
        self.lat = topo.latency_matrix
        self.bw = topo.bandwidth_matrix
        self.lat_l = self.lat.tolist()
        self.bw_l = self.bw.tolist()
        ptypes = [topo.cores[c].processor_type for c in self.cores]
        self.order = {sid: i for i, sid in enumerate(g.subtasks)}
        self.dur: dict[str, list[float]] = {}
        for sid, st in g.subtasks.items():
            try:
                self.dur[sid] = [st.exec_time[p] for p in ptypes]
            except KeyError as exc:
                raise MissingTimeError(sid, exc.args[0]) from None
        self.chain_prev: dict[str, str | None] = {}
        for t in g.tasks.values():
            for k, sid in enumerate(t.subtasks):
                self.chain_prev[sid] = t.subtasks[k - 1] if k else None
        self.ext_src: dict[str, list[str]] = {}
        self.ext_vol: dict[str, list[float]] = {}
        for sid in g.subtasks:
            ins = g.in_edges(sid)
            self.ext_src[sid] = [e.source_subtask for e in ins]
            self.ext_vol[sid] = [float(e.volume) for e in ins]
        self.succ = {sid: sorted(successors(g, sid), key=self.order.__getitem__) for sid in g.subtasks}
        self.npred = {sid: len(predecessors(g, sid)) for sid in g.subtasks}


class Schedule:
    """Mapping under construction or finished.

    ``timelines`` maps each core to its placed subtasks (time ordered) and its
    pending list; ``task_assignment`` maps tasks to cores; ``t_est`` is the
    latest finish time. ``selections`` records the (task, core) choices in the
    order they were made.
    """

    def __init__(self, g: ApplicationGraph, topo: Topology):
        self._m = _Model(g, topo)
        self.graph = g
        self.topology = topo
        self.task_assignment: dict[str, str] = {}
        self.selections: list[tuple[str, str]] = []
        n = len(self._m.cores)
        # per core: parallel lists of starts, finishes and subtask ids
        self._lines: list[tuple[list[float], list[float], list[str]]] = [([], [], []) for _ in range(n)]
        self._placed: dict[str, tuple[int, float, float]] = {}
        self._pending: list[list[str]] = [[] for _ in range(n)]
        self._pending_core: dict[str, int] = {}
        self._waiting: dict[str, int] = dict(self._m.npred)

    @property
    def timelines(self) -> dict[str, CoreTimeline]:
        out = {}
        for ci, core in enumerate(self._m.cores):
            starts, fins, ids = self._lines[ci]
            out[core] = CoreTimeline(
                core,
                [Placement(s, core, a, b) for a, b, s in zip(starts, fins, ids)],
                list(self._pending[ci]),
            )
        return out

    @property
    def placements(self) -> dict[str, Placement]:
        cores = self._m.cores
        return {sid: Placement(sid, cores[c], a, b) for sid, (c, a, b) in self._placed.items()}

    @property
    def t_est(self) -> float:
        return max((fins[-1] for _, fins, _ in self._lines if fins), default=0.0)

    @property
    def pending(self) -> list[str]:
        return [sid for lst in self._pending for sid in lst]

    def is_complete(self) -> bool:
        return len(self.task_assignment) == len(self.graph.tasks) and not self._pending_core

    def validate(self) -> None:
        assert_valid(self.graph, self.topology, self.placements, self.task_assignment, self.pending)

    def to_dict(self) -> dict:
        timelines = {}
        for core, tl in self.timelines.items():
            timelines[core] = [
                {"subtask": p.subtask, "start_s": p.start, "finish_s": p.finish} for p in tl.placed
            ]
        return {
            "timelines": timelines,
            "task_assignment": {t: self.task_assignment[t] for t in self.graph.tasks if t in self.task_assignment},
            "t_est_s": self.t_est,
            "selection_order": [[t, c] for t, c in self.selections],
        }

    @classmethod
    def from_dict(cls, doc: dict, g: ApplicationGraph, topo: Topology) -> Schedule:
        """Rebuild a finished schedule from its document and check it."""
        sched = cls(g, topo)
        try:
            for core, entries in doc["timelines"].items():
                if core not in sched._m.core_idx:
                    raise TopologyError(f"schedule uses unknown core {core!r}")
                ci = sched._m.core_idx[core]
                rows = sorted(
                    ((float(e["start_s"]), float(e["finish_s"]), str(e["subtask"])) for e in entries)
                )
                starts, fins, ids = sched._lines[ci]
                for a, b, sid in rows:
                    if sid not in g.subtasks:
                        raise ScheduleError(f"schedule places unknown subtask {sid!r}")
                    if sid in sched._placed:
                        raise ScheduleError(f"subtask {sid!r} placed twice")
                    starts.append(a)
                    fins.append(b)
                    ids.append(sid)
                    sched._placed[sid] = (ci, a, b)
            sched.task_assignment = {str(t): str(c) for t, c in doc["task_assignment"].items()}
            sched.selections = [(str(t), str(c)) for t, c in doc.get("selection_order", [])]
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScheduleError(f"schedule document does not match schema: {exc!r}") from None
        if len(sched.task_assignment) != len(g.tasks):
            raise ScheduleError("schedule is incomplete: not every task is assigned")
        sched.validate()
        return sched


class _Trial:
    """Copy-on-write overlay of a schedule for tentative assignments."""

    def __init__(self, sched: Schedule):
        self.s = sched
        self.m = sched._m
        self.placed: dict[str, tuple[int, float, float]] = {}
        self.order: list[str] = []
        self.lines: dict[int, tuple[list[float], list[float], list[str]]] = {}
        self.new_pending: list[tuple[int, str]] = []
        self.removed: set[str] = set()
        self.waiting: dict[str, int] = {}

    def lookup(self, sid: str):
        r = self.placed.get(sid)
        return r if r is not None else self.s._placed.get(sid)

    def line(self, ci: int):
        ln = self.lines.get(ci)
        if ln is None:
            starts, fins, ids = self.s._lines[ci]
            ln = self.lines[ci] = (starts[:], fins[:], ids[:])
        return ln

    def line_view(self, ci: int):
        return self.lines.get(ci) or self.s._lines[ci]

    def data_ready(self, sid: str, ci: int) -> float:
        """Earliest start of ``sid`` on core ``ci``; every predecessor must be placed."""
        m = self.m
        est = 0.0
        prev = m.chain_prev[sid]
        if prev is not None:
            est = self.lookup(prev)[2]
        lat, bw = m.lat_l, m.bw_l
        for q, vol in zip(m.ext_src[sid], m.ext_vol[sid]):
            qc, _, qf = self.lookup(q)
            arrive = qf + (lat[qc][ci] + vol / bw[qc][ci])
            if arrive > est:
                est = arrive
        return est

    def place(self, sid: str, ci: int, est: float) -> None:
        starts, fins, ids = self.line(ci)
        dur = self.m.dur[sid][ci]
        i = bisect_right(fins, est)
        start = est
        n = len(starts)
        while i < n and start + dur > starts[i] + EPS:
            start = fins[i] if fins[i] > est else est
            i += 1
        finish = start + dur
        assert i == 0 or fins[i - 1] <= start + EPS, "placement overlaps its predecessor"
        assert i == n or finish <= starts[i] + EPS, "placement overlaps its successor"
        starts.insert(i, start)
        fins.insert(i, finish)
        ids.insert(i, sid)
        self.placed[sid] = (ci, start, finish)
        self.order.append(sid)

    def pending_successors(self, sid: str) -> list[str]:
        pc = self.s._pending_core
        return [y for y in self.m.succ[sid] if y in pc and y not in self.removed]

    def cascade(self, sid: str, first: list[str] | None = None) -> None:
        """Place pending subtasks unblocked by ``sid``, transitively.

        Alternative reading, not implemented: retry the *predecessors* of the
        newly placed subtask. Those are always placed already, so that reading
        does nothing and pending lists would never drain.
        """
        pc = self.s._pending_core
        base_waiting = self.s._waiting
        queue = deque([(sid, first)])
        while queue:
            x, cands = queue.popleft()
            if cands is None:
                cands = self.pending_successors(x)
            for y in cands:
                if y in self.removed:
                    continue
                left = self.waiting.get(y, base_waiting[y]) - 1
                self.waiting[y] = left
                if left == 0:
                    ci = pc[y]
                    self.place(y, ci, self.data_ready(y, ci))
                    self.removed.add(y)
                    queue.append((y, None))

    def pending_on(self, ci: int) -> list[str]:
        base = [y for y in self.s._pending[ci] if y not in self.removed]
        return base + [y for c, y in self.new_pending if c == ci]


class _TaskContext:
    """Per-selection data shared by every tentative placement of one task."""

    def __init__(self, sched: Schedule, task: str):
        m = sched._m
        self.task = task
        self.subtasks = m.g.tasks[task].subtasks
        self.arrival: list[list[float]] = []
        self.missing: list[list[tuple[str, float]]] = []
        self.pend_succ: list[list[str]] = []
        n = len(m.cores)
        pc = sched._pending_core
        for sid in self.subtasks:
            fin, core, vol, missing = [], [], [], []
            for q, v in zip(m.ext_src[sid], m.ext_vol[sid]):
                r = sched._placed.get(q)
                if r is None:
                    missing.append((q, v))
                else:
                    core.append(r[0])
                    fin.append(r[2])
                    vol.append(v)
            if fin:
                ci = np.asarray(core)
                cost = m.lat[ci] + np.asarray(vol)[:, None] / m.bw[ci]
                arr = (np.asarray(fin)[:, None] + cost).max(axis=0)
                arr = np.maximum(arr, 0.0).tolist()
            else:
                arr = [0.0] * n
            self.arrival.append(arr)
            self.missing.append(missing)
            self.pend_succ.append([y for y in m.succ[sid] if y in pc])


def _run_trial(sched: Schedule, ctx: _TaskContext, ci: int) -> tuple[_Trial, float]:
    """Tentatively place ``ctx.task`` on core ``ci``; return the overlay and its score."""
    m = sched._m
    tr = _Trial(sched)
    lat, bw = m.lat_l, m.bw_l
    blocked = False
    prev_finish = None
    for k, sid in enumerate(ctx.subtasks):
        if not blocked:
            est = ctx.arrival[k][ci]
            for q, vol in ctx.missing[k]:
                r = tr.lookup(q)
                if r is None:
                    blocked = True
                    break
                qc, _, qf = r
                arrive = qf + (lat[qc][ci] + vol / bw[qc][ci])
                if arrive > est:
                    est = arrive
        if blocked:
            tr.new_pending.append((ci, sid))
            continue
        if prev_finish is not None and prev_finish > est:
            est = prev_finish
        tr.place(sid, ci, est)
        prev_finish = tr.placed[sid][2]
        tr.cascade(sid, ctx.pend_succ[k])

    if not blocked:
        score = tr.placed[ctx.subtasks[-1]][2]
    else:
        # last finish on the core plus the run time of everything still pending there
        fins = tr.line_view(ci)[1]
        score = (fins[-1] if fins else 0.0) + math.fsum(m.dur[y][ci] for y in tr.pending_on(ci))
    return tr, score


def _commit(sched: Schedule, tr: _Trial, task: str, ci: int) -> list[str]:
    for c, ln in tr.lines.items():
        sched._lines[c] = ln
    sched._placed.update(tr.placed)
    for y in tr.removed:
        c = sched._pending_core.pop(y)
        sched._pending[c].remove(y)
    for c, y in tr.new_pending:
        sched._pending[c].append(y)
        sched._pending_core[y] = c
    waiting = sched._waiting
    succ = sched._m.succ
    for x in tr.order:
        for y in succ[x]:
            waiting[y] -= 1
    core = sched._m.cores[ci]
    sched.task_assignment[task] = core
    sched.selections.append((task, core))
    return list(tr.order)


def initial_ranks(g: ApplicationGraph, topo: Topology) -> RankTable:
    """Rank every task by the average time of its subtasks with no predecessors."""
    avg = {sid: compute_avg_time(st, topo) for sid, st in g.subtasks.items()}
    task_avg = {tid: math.fsum(avg[s] for s in t.subtasks) for tid, t in g.tasks.items()}
    waiting = {sid: len(predecessors(g, sid)) for sid in g.subtasks}
    ready = {tid: {s for s in t.subtasks if waiting[s] == 0} for tid, t in g.tasks.items()}
    rank = {tid: math.fsum(avg[s] for s in t.subtasks if s in ready[tid]) for tid, t in g.tasks.items()}
    return RankTable(rank, ready, waiting, avg, task_avg)


def select_task(rt: RankTable, g: ApplicationGraph, topo: Topology) -> str:
    """Highest rank wins; then the smaller total average time; then the smaller id."""
    live = [t for t in g.tasks if rt.rank[t] != -1]
    if not live:
        raise ScheduleError("select_task called with every task already assigned")
    best_rank = max(rt.rank[t] for t in live)
    cands = [t for t in live if _close(rt.rank[t], best_rank)]
    for t in cands:
        if t not in rt._task_avg:
            rt._task_avg[t] = math.fsum(compute_avg_time(g.subtasks[s], topo) for s in g.tasks[t].subtasks)
    best_avg = min(rt._task_avg[t] for t in cands)
    cands = [t for t in cands if _close(rt._task_avg[t], best_avg)]
    return min(cands)


def score_core(sched: Schedule, g: ApplicationGraph, topo: Topology, t: str, p: str) -> float:
    """Estimated completion time of task ``t`` if it were assigned to core ``p``.

    When every subtask of ``t`` can be placed, the score is the finish time of
    its last subtask. Otherwise it is the last finish time on ``p`` plus the run
    time on ``p`` of every subtask left pending there. ``sched`` is not modified.
    """
    if t not in g.tasks:
        raise ScheduleError(f"unknown task {t!r}")
    if t in sched.task_assignment:
        raise ScheduleError(f"task {t!r} is already assigned")
    try:
        ci = sched._m.core_idx[p]
    except KeyError:
        raise TopologyError(f"unknown core {p!r}") from None
    return _run_trial(sched, _TaskContext(sched, t), ci)[1]


def _best_core(sched: Schedule, task: str) -> tuple[int, _Trial]:
    ctx = _TaskContext(sched, task)
    trials = [_run_trial(sched, ctx, ci) for ci in range(len(sched._m.cores))]
    best = min(score for _, score in trials)
    cores = sched._m.cores
    ci = min((ci for ci, (_, sc) in enumerate(trials) if _close(sc, best)), key=cores.__getitem__)
    return ci, trials[ci][0]


def assign_task(
    sched: Schedule, rt: RankTable, g: ApplicationGraph, topo: Topology, t: str
) -> tuple[Schedule, RankTable]:
    """Place ``t`` on its best-scoring core and update the ranks, in place."""
    if t in sched.task_assignment:
        raise ScheduleError(f"task {t!r} is already assigned")
    ci, trial = _best_core(sched, t)
    newly = _commit(sched, trial, t, ci)
    update_ranks(rt, g, topo, newly, t)
    return sched, rt


def update_ranks(
    rt: RankTable, g: ApplicationGraph, topo: Topology, newly_placed: Iterable[str], assigned_task: str
) -> RankTable:
    """Retire ``assigned_task`` and credit successors whose predecessors are now all placed."""
    rt.rank[assigned_task] = -1
    rt.ready[assigned_task] = set()
    waiting = rt._waiting
    for x in newly_placed:
        for y in successors(g, x):
            waiting[y] -= 1
            if waiting[y] == 0:
                owner = g.subtasks[y].task_id
                if rt.rank[owner] != -1 and y not in rt.ready[owner]:
                    rt.ready[owner].add(y)
                    if y not in rt._avg:
                        rt._avg[y] = compute_avg_time(g.subtasks[y], topo)
                    rt.rank[owner] += rt._avg[y]
    return rt


def map_graph(g: ApplicationGraph, topo: Topology) -> Schedule:
    """Run AMTHA to completion and return the finished schedule."""
    sched = Schedule(g, topo)
    rt = initial_ranks(g, topo)
    for _ in range(len(g.tasks)):
        t = select_task(rt, g, topo)
        assign_task(sched, rt, g, topo, t)
    if sched._pending_core:
        raise ScheduleError(f"pending subtasks left after mapping: {sorted(sched._pending_core)[:5]}")
    return sched
