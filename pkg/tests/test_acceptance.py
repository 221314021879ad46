"""End-to-end acceptance checks, one test per criterion.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in the
terminal summary.
"""

import json
import statistics
import time

import pytest

from amtha.generator import WorkloadSpec, generate, grain_ratio, small_case
from amtha.graph import scaled_graph
from amtha.mapper import map_graph
from amtha.oracle import optimal_schedule
from amtha.simulator import NONE, SERIALIZE, simulate
from amtha.topology import preset, scaled_topology
from amtha.validate import check_placements

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def fig1():
    return preset("fig1_8core")


@pytest.fixture(scope="module")
def hp64():
    return preset("hp_64core")


def _coarse_instances(spec, topo, count, min_ratio):
    out, seed = [], spec.seed
    while len(out) < count:
        g = generate(spec.replace(seed=seed), topo)
        if grain_ratio(g, topo) > min_ratio:
            out.append(g)
        seed += 1
        assert seed - spec.seed < 50 * count, "too few coarse-grained instances"
    return out


def test_estimator_simulator_coherence(fig1, report):
    t0 = time.perf_counter()
    worst_dif = worst_gap = 0.0
    for seed in range(100):
        g = generate(WorkloadSpec(seed=seed), fig1)
        sched = map_graph(g, fig1)
        res = simulate(sched, g, fig1, NONE)
        worst_dif = max(worst_dif, abs(res.dif_rel_pct))
        est = sched.placements
        for sid, p in res.placements.items():
            worst_gap = max(worst_gap, abs(p.start - est[sid].start), abs(p.finish - est[sid].finish))
    elapsed = time.perf_counter() - t0
    ok = worst_dif <= 1e-9 and worst_gap <= 1e-9 and elapsed < 10
    report("1 coherence", ok, f"100 instances, max |dif|={worst_dif:.3g}%, max placement gap={worst_gap:.3g}s, "
                             f"{elapsed:.1f}s")
    assert worst_dif <= 1e-9 and worst_gap <= 1e-9
    assert elapsed < 10


def test_error_bounds(fig1, hp64, report):
    t0 = time.perf_counter()
    small = _coarse_instances(WorkloadSpec(n_tasks=(15, 25)), fig1, 30, 10.0)
    small_difs = [simulate(map_graph(g, fig1), g, fig1, SERIALIZE).dif_rel_pct for g in small]
    large = [generate(WorkloadSpec(n_tasks=(120, 200), seed=s), hp64) for s in range(30)]
    large_difs = [simulate(map_graph(g, hp64), g, hp64, SERIALIZE).dif_rel_pct for g in large]

    # error trend as the volume range grows ten-fold at a time (same seeds throughout)
    means = []
    for scale in (1, 10, 100, 1000):
        spec = WorkloadSpec(comm_volume=(1000 * scale, 10000 * scale))
        difs = []
        for seed in range(30):
            g = generate(spec.replace(seed=seed), fig1)
            difs.append(simulate(map_graph(g, fig1), g, fig1, SERIALIZE).dif_rel_pct)
        means.append(statistics.fmean(difs))
        assert min(difs) >= 0, f"negative error at volume scale {scale}"
    elapsed = time.perf_counter() - t0

    bound8 = max(small_difs) <= 4.0
    bound64 = max(large_difs) <= 6.0
    nonneg = min(small_difs + large_difs) >= 0
    monotone = all(a <= b for a, b in zip(means, means[1:]))
    ok = bound8 and bound64 and nonneg and monotone and elapsed < 60
    report("2 error bounds", ok,
           f"8-core max={max(small_difs):.4f}% (<=4), 64-core max={max(large_difs):.4f}% (<=6), "
           f"mean by volume x1/x10/x100/x1000 = {', '.join(f'{m:.4f}' for m in means)}%, {elapsed:.1f}s")
    assert nonneg and monotone
    assert bound8 and bound64
    assert elapsed < 60


def test_oracle_dominance(report):
    t0 = time.perf_counter()
    wins = strict = 0
    problems = []
    for seed in range(100):
        g, topo = small_case(seed, max_tasks=4, max_subtasks=3, max_cores=3)
        sched = map_graph(g, topo)
        res = optimal_schedule(g, topo)
        issues = check_placements(g, topo, sched.placements, sched.task_assignment, sched.pending)
        if issues:
            problems.append((seed, issues[:2]))
        if res.exhaustive and sched.t_est >= res.optimal_makespan - 1e-9:
            wins += 1
            strict += sched.t_est > res.optimal_makespan + 1e-9
    elapsed = time.perf_counter() - t0
    ok = wins == 100 and not problems and elapsed < 120
    report("3 oracle dominance", ok, f"{wins}/100 AMTHA >= optimal ({strict} strictly worse), "
                                    f"{len(problems)} invalid, {elapsed:.1f}s")
    assert wins == 100 and not problems
    assert elapsed < 120


def test_schedule_validity(fig1, hp64, report):
    t0 = time.perf_counter()
    bad = []
    cases = [(fig1, WorkloadSpec(n_tasks=(15, 25), seed=s)) for s in range(100)]
    cases += [(hp64, WorkloadSpec(n_tasks=(60, 120), seed=s)) for s in range(100)]
    for topo, spec in cases:
        g = generate(spec, topo)
        sched = map_graph(g, topo)
        issues = check_placements(g, topo, sched.placements, sched.task_assignment, sched.pending)
        if issues or sched.pending or not sched.is_complete():
            bad.append((topo.name, spec.seed, issues[:2]))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    report("4 schedule validity", ok, f"{len(cases) - len(bad)}/{len(cases)} valid, {elapsed:.1f}s")
    assert not bad
    assert elapsed < 60


def test_determinism_and_scale(fig1, hp64, report):
    k = 7
    identical = same_choices = scaled_ok = 0
    cases = [(fig1, WorkloadSpec(seed=s)) for s in range(10)]
    cases += [(hp64, WorkloadSpec(n_tasks=(120, 200), seed=s)) for s in range(3)]
    worst = 0.0
    for topo, spec in cases:
        g = generate(spec, topo)
        a, b = map_graph(g, topo), map_graph(generate(spec, topo), topo)
        identical += json.dumps(a.to_dict()) == json.dumps(b.to_dict())
        s = map_graph(scaled_graph(g, k), scaled_topology(topo, k))
        same_choices += s.selections == a.selections
        rel = abs(s.t_est - k * a.t_est) / (k * a.t_est)
        worst = max(worst, rel)
        scaled_ok += rel <= 1e-6
    n = len(cases)
    ok = identical == same_choices == scaled_ok == n
    report("5 determinism & scale", ok, f"{identical}/{n} byte-identical, {same_choices}/{n} same selections "
                                       f"at k={k}, max t_est rel err={worst:.2g}")
    assert ok


def test_throughput(hp64, report):
    g = generate(WorkloadSpec(n_tasks=(200, 200), seed=0), hp64)
    t0 = time.perf_counter()
    sched = map_graph(g, hp64)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 5 and sched.is_complete() and 600 <= len(g.subtasks) <= 1200
    report("6 throughput", ok, f"{len(g.tasks)} tasks, {len(g.subtasks)} subtasks, {len(g.edges)} edges "
                              f"on 64 cores in {elapsed:.2f}s (<5)")
    assert ok
