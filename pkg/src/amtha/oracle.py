"""Exhaustive optimal schedules for tiny instances.

Every task-to-core assignment is enumerated. For each assignment the best
timeline is found either by listing every per-core subtask order (chains of
the tasks sharing a core, interleaved in all possible ways) when there are at
most ``ORDER_SUBCAP`` combinations, or else by a branch-and-bound over active
schedules (Giffler-Thompson branching), which still returns the exact optimum.
If the branch-and-bound exceeds ``node_cap`` search nodes the result is only
the best schedule found so far and ``exhaustive`` is ``False``.

The cost model is the mapper's: one subtask at a time per core, transfers cost
``comm_cost`` and never occupy a core.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import OracleCapError
from .graph import ApplicationGraph
from .topology import Topology, comm_cost
from .validate import Placement

ORDER_SUBCAP = 2000
NODE_CAP = 2_000_000


@dataclass(frozen=True)
class OracleLimits:
    max_tasks: int = 5
    max_cores: int = 3
    max_subtasks: int = 12


@dataclass
class OracleResult:
    optimal_makespan: float
    optimal_assignment: dict[str, str]
    instances_explored: int
    exhaustive: bool = True
    placements: dict[str, Placement] = field(default_factory=dict, repr=False)


class _Instance:
    def __init__(self, g: ApplicationGraph, topo: Topology, assignment: dict[str, str]):
        self.g = g
        self.topo = topo
        self.core_of = {sid: assignment[st.task_id] for sid, st in g.subtasks.items()}
        self.dur = {
            sid: st.exec_time[topo.cores[self.core_of[sid]].processor_type]
            for sid, st in g.subtasks.items()
        }
        # predecessor -> delay between its finish and the successor's start
        self.preds: dict[str, list[tuple[str, float]]] = {sid: [] for sid in g.subtasks}
        for t in g.tasks.values():
            for a, b in zip(t.subtasks, t.subtasks[1:]):
                self.preds[b].append((a, 0.0))
        for e in g.edges:
            delay = comm_cost(topo, self.core_of[e.source_subtask], self.core_of[e.target_subtask], e.volume)
            self.preds[e.target_subtask].append((e.source_subtask, delay))
        self.succs: dict[str, list[tuple[str, float]]] = {sid: [] for sid in g.subtasks}
        for b, ps in self.preds.items():
            for a, d in ps:
                self.succs[a].append((b, d))
        order = g.topological_order()
        self.tail: dict[str, float] = {}
        for sid in reversed(order):
            self.tail[sid] = self.dur[sid] + max((d + self.tail[b] for b, d in self.succs[sid]), default=0.0)
        head: dict[str, float] = {}
        for sid in order:
            head[sid] = max((head[a] + self.dur[a] + d for a, d in self.preds[sid]), default=0.0)
        self.head = head

    def lower_bound(self) -> float:
        load: dict[str, float] = {}
        for sid, c in self.core_of.items():
            load[c] = load.get(c, 0.0) + self.dur[sid]
        return max(max(load.values()), max(self.head[s] + self.tail[s] for s in self.dur))

    def evaluate(self, orders: dict[str, list[str]]) -> dict[str, tuple[float, float]] | None:
        """Earliest-start timeline for fixed per-core orders; ``None`` if they deadlock."""
        times: dict[str, tuple[float, float]] = {}
        pos = {c: 0 for c in orders}
        avail = {c: 0.0 for c in orders}
        remaining = len(self.dur)
        while remaining:
            progress = False
            for c, seq in orders.items():
                while pos[c] < len(seq):
                    sid = seq[pos[c]]
                    if any(a not in times for a, _ in self.preds[sid]):
                        break
                    est = max([avail[c]] + [times[a][1] + d for a, d in self.preds[sid]])
                    times[sid] = (est, est + self.dur[sid])
                    avail[c] = est + self.dur[sid]
                    pos[c] += 1
                    remaining -= 1
                    progress = True
            if not progress:
                return None
        return times


def _interleavings(chains: list[tuple[str, ...]]):
    """All merges of the given sequences that keep each sequence's order."""
    if not chains:
        yield []
        return
    total = sum(len(c) for c in chains)
    idx = [0] * len(chains)
    out: list[str] = []

    def rec():
        if len(out) == total:
            yield list(out)
            return
        for k, ch in enumerate(chains):
            if idx[k] < len(ch):
                out.append(ch[idx[k]])
                idx[k] += 1
                yield from rec()
                idx[k] -= 1
                out.pop()

    yield from rec()


def _interleaving_count(chains) -> int:
    n = sum(len(c) for c in chains)
    count = math.factorial(n)
    for c in chains:
        count //= math.factorial(len(c))
    return count


def enumerate_orders(inst: _Instance, assignment: dict[str, str], bound: float = math.inf):
    """Best timeline over every per-core order; returns (makespan, times, evaluated)."""
    by_core: dict[str, list[tuple[str, ...]]] = {}
    for tid, c in sorted(assignment.items()):
        by_core.setdefault(c, []).append(inst.g.tasks[tid].subtasks)
    cores = sorted(by_core)
    best, best_times, evaluated = bound, None, 0
    for combo in itertools.product(*(list(_interleavings(by_core[c])) for c in cores)):
        times = inst.evaluate(dict(zip(cores, combo)))
        evaluated += 1
        if times is None:
            continue
        mk = max(f for _, f in times.values())
        if mk < best:
            best, best_times = mk, times
    return best, best_times, evaluated


def branch_and_bound(inst: _Instance, bound: float = math.inf, node_cap: int = NODE_CAP):
    """Exact search over active schedules; returns (makespan, times, nodes, complete)."""
    cores = sorted(set(inst.core_of.values()))
    rem_work = {c: 0.0 for c in cores}
    for sid, c in inst.core_of.items():
        rem_work[c] += inst.dur[sid]
    waiting = {sid: len(ps) for sid, ps in inst.preds.items()}
    times: dict[str, tuple[float, float]] = {}
    avail = {c: 0.0 for c in cores}
    state = {"best": bound, "times": None, "nodes": 0, "complete": True}

    def candidates():
        out = []
        for sid, n in waiting.items():
            if n == 0 and sid not in times:
                c = inst.core_of[sid]
                est = max([avail[c]] + [times[a][1] + d for a, d in inst.preds[sid]])
                out.append((sid, c, est))
        return out

    def rec(makespan: float):
        state["nodes"] += 1
        if state["nodes"] > node_cap:
            state["complete"] = False
            return
        if len(times) == len(inst.dur):
            if makespan < state["best"]:
                state["best"], state["times"] = makespan, dict(times)
            return
        cands = candidates()
        lb = max([makespan] + [avail[c] + rem_work[c] for c in cores] + [est + inst.tail[s] for s, _, est in cands])
        if lb >= state["best"] - 1e-12:
            return
        sid_star, core_star, est_star = min(cands, key=lambda x: (x[2] + inst.dur[x[0]], x[0]))
        ect_star = est_star + inst.dur[sid_star]
        conflict = sorted(x for x in cands if x[1] == core_star and x[2] < ect_star)
        for sid, c, est in conflict:
            fin = est + inst.dur[sid]
            times[sid] = (est, fin)
            prev_avail = avail[c]
            avail[c] = fin
            rem_work[c] -= inst.dur[sid]
            for b, _ in inst.succs[sid]:
                waiting[b] -= 1
            rec(max(makespan, fin))
            for b, _ in inst.succs[sid]:
                waiting[b] += 1
            rem_work[c] += inst.dur[sid]
            avail[c] = prev_avail
            del times[sid]

    rec(0.0)
    return state["best"], state["times"], state["nodes"], state["complete"]


def optimal_schedule(
    g: ApplicationGraph,
    topo: Topology,
    limits: OracleLimits = OracleLimits(),
    node_cap: int = NODE_CAP,
    order_subcap: int = ORDER_SUBCAP,
) -> OracleResult:
    """Minimum makespan over all task-to-core assignments and per-core orders.

    Assignments with more than ``order_subcap`` order combinations are solved
    by branch-and-bound instead of listing every order.
    """
    if len(g.tasks) > limits.max_tasks:
        raise OracleCapError(f"{len(g.tasks)} tasks exceeds the cap of {limits.max_tasks}")
    if len(topo.cores) > limits.max_cores:
        raise OracleCapError(f"{len(topo.cores)} cores exceeds the cap of {limits.max_cores}")
    if len(g.subtasks) > limits.max_subtasks:
        raise OracleCapError(f"{len(g.subtasks)} subtasks exceeds the cap of {limits.max_subtasks}")

    core_ids = list(topo.cores)
    task_ids = list(g.tasks)
    best = math.inf
    best_assignment: dict[str, str] = {}
    best_times = None
    explored = 0
    exhaustive = True
    for combo in itertools.product(core_ids, repeat=len(task_ids)):
        assignment = dict(zip(task_ids, combo))
        inst = _Instance(g, topo, assignment)
        if inst.lower_bound() >= best:
            continue
        by_core: dict[str, list] = {}
        for tid, c in assignment.items():
            by_core.setdefault(c, []).append(g.tasks[tid].subtasks)
        n_orders = math.prod(_interleaving_count(ch) for ch in by_core.values())
        if n_orders <= order_subcap:
            mk, times, n = enumerate_orders(inst, assignment, best)
            complete = True
        else:
            mk, times, n, complete = branch_and_bound(inst, best, node_cap)
        explored += n
        exhaustive &= complete
        if times is not None and mk < best:
            best, best_assignment, best_times = mk, assignment, times
    placements = {
        sid: Placement(sid, best_assignment[g.subtasks[sid].task_id], s, f)
        for sid, (s, f) in (best_times or {}).items()
    }
    return OracleResult(best, best_assignment, explored, exhaustive, placements)
