import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amtha.errors import OracleCapError
from amtha.generator import WorkloadSpec, generate, small_case
from amtha.mapper import map_graph
from amtha.oracle import OracleLimits, optimal_schedule
from amtha.topology import comm_cost, load_topology, topology_to_dict
from amtha.validate import check_placements

from .conftest import chain_graph, flat_topology


def _random_feasible_makespan(g, topo, rng):
    """Makespan of one random schedule: random assignment, random topological priority."""
    cores = list(topo.cores)
    assign = {t: rng.choice(cores) for t in g.tasks}
    core_of = {s: assign[st_.task_id] for s, st_ in g.subtasks.items()}
    preds = {s: [] for s in g.subtasks}
    for t in g.tasks.values():
        for a, b in zip(t.subtasks, t.subtasks[1:]):
            preds[b].append((a, 0))
    for e in g.edges:
        preds[e.target_subtask].append((e.source_subtask, e.volume))
    done, avail, order = {}, dict.fromkeys(cores, 0.0), []
    left = set(g.subtasks)
    while left:
        ready = sorted(s for s in left if all(p in done for p, _ in preds[s]))
        s = rng.choice(ready)
        c = core_of[s]
        start = max([avail[c]] + [done[p] + comm_cost(topo, core_of[p], c, v) for p, v in preds[s]])
        ptype = topo.cores[c].processor_type
        done[s] = start + g.subtasks[s].exec_time[ptype]
        avail[c] = done[s]
        left.remove(s)
        order.append(s)
    return max(done.values())


class TestExamples:
    def test_single_task_single_core(self):
        g = chain_graph({"T1": [5, 10, 5]})
        res = optimal_schedule(g, flat_topology(1))
        assert res.optimal_makespan == 20.0 and res.optimal_assignment == {"T1": "c0"}

    def test_symmetric_pair(self):
        g = chain_graph({"T1": [3, 4], "T2": [3, 4]})
        res = optimal_schedule(g, flat_topology(2))
        assert res.optimal_makespan == 7.0
        assert len(set(res.optimal_assignment.values())) == 2

    def test_slow_link_keeps_tasks_together(self):
        # apart: 2 + 10 s transfer + 3 = 15; together: 5
        g = chain_graph({"T1": [2], "T2": [3]}, [("T1.s0", "T2.s0", 1000)])
        res = optimal_schedule(g, flat_topology(2, bandwidth=100.0))
        assert res.optimal_makespan == 5.0
        assert len(set(res.optimal_assignment.values())) == 1

    def test_fast_link_splits_tasks(self):
        # T1 feeds only T2.s1, so T2.s0 can overlap with T1 on another core
        g = chain_graph({"T1": [4], "T2": [4, 1]}, [("T1.s0", "T2.s1", 100)])
        res = optimal_schedule(g, flat_topology(2, bandwidth=1000.0))
        assert res.optimal_makespan == pytest.approx(5.1)


class TestCaps:
    def test_too_many_tasks(self):
        g = chain_graph({f"T{i}": [1] for i in range(6)})
        with pytest.raises(OracleCapError, match="tasks"):
            optimal_schedule(g, flat_topology(1))

    def test_too_many_cores(self):
        with pytest.raises(OracleCapError, match="cores"):
            optimal_schedule(chain_graph({"T1": [1]}), flat_topology(4))

    def test_too_many_subtasks(self):
        g = chain_graph({"T1": [1] * 7, "T2": [1] * 6})
        with pytest.raises(OracleCapError, match="subtasks"):
            optimal_schedule(g, flat_topology(1))

    def test_custom_limits(self):
        g = chain_graph({f"T{i}": [1] for i in range(6)})
        res = optimal_schedule(g, flat_topology(2), OracleLimits(max_tasks=6))
        assert res.optimal_makespan == 3.0

    def test_node_cap_marks_result_non_exhaustive(self):
        g, topo = small_case(3, max_tasks=4, max_subtasks=3, max_cores=3)
        res = optimal_schedule(g, topo, node_cap=1, order_subcap=0)
        assert res.exhaustive is False


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**63))
    def test_timelines_pass_shared_validator(self, seed):
        g, topo = small_case(seed)
        res = optimal_schedule(g, topo)
        assert check_placements(g, topo, res.placements, res.optimal_assignment) == []
        assert max(p.finish for p in res.placements.values()) == res.optimal_makespan

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**63))
    def test_no_random_schedule_beats_optimum(self, seed):
        g, topo = small_case(seed)
        best = optimal_schedule(g, topo).optimal_makespan
        rng = random.Random(seed)
        for _ in range(30):
            assert _random_feasible_makespan(g, topo, rng) >= best - 1e-9

    @pytest.mark.parametrize("seed", range(25))
    def test_branch_and_bound_agrees_with_enumeration(self, seed):
        g, topo = small_case(seed)
        listed = optimal_schedule(g, topo, order_subcap=10**9)
        searched = optimal_schedule(g, topo, order_subcap=0)
        assert searched.exhaustive
        assert searched.optimal_makespan == pytest.approx(listed.optimal_makespan, rel=1e-12)

    @pytest.mark.parametrize("seed", range(15))
    def test_exchange_stable(self, seed):
        topo = flat_topology(3, bandwidth=800.0, latency=0.1)
        g = generate(WorkloadSpec(n_tasks=(2, 4), subtasks_per_task=(1, 3), comm_probability=(0, 60),
                                  seed=seed), topo)
        doc = topology_to_dict(topo)
        kids = doc["root"]["children"]
        kids[0]["id"], kids[2]["id"] = kids[2]["id"], kids[0]["id"]
        swapped = load_topology(doc)
        a = optimal_schedule(g, topo).optimal_makespan
        b = optimal_schedule(g, swapped).optimal_makespan
        assert a == pytest.approx(b, rel=1e-12)

    @pytest.mark.parametrize("seed", range(100))
    def test_three_task_two_core_dominance(self, seed):
        g, topo = small_case(seed, max_tasks=3, max_subtasks=3, max_cores=2)
        res = optimal_schedule(g, topo)
        assert res.exhaustive
        assert res.optimal_makespan <= map_graph(g, topo).t_est + 1e-9
