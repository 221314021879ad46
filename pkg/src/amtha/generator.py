"""Seeded synthetic workloads.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence(seed)``. Only its raw 64-bit output is used: uniforms and
integers are derived here, so the stream does not depend on how numpy's
distribution methods evolve. For seed 0 the first three raw words are
``0xA30FEBCFD9C2825F``, ``0x4510BDF882D9D721`` and ``0x0A7D3DA94ECDE8B8``.

Draw order for one instance:

1. task count, then one communication probability for the whole instance;
2. per task in id order: subtask count, total task time, then ``k - 1``
   uniforms whose sorted spacings split the time across the subtasks;
3. a Fisher-Yates permutation giving the task order;
4. per source subtask, in task-order position, one uniform for every subtask
   of a later task (an edge when below the probability);
5. one volume per edge, in (source, target) emission order.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field

import numpy as np

from ._io import read_document
from .errors import SpecError
from .graph import ApplicationGraph, build_graph, compute_avg_time
from .topology import Topology, load_topology


class Pcg64Stream:
    """Portable uniform/integer draws on top of raw PCG64 output."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)

    def raw(self, n: int | None = None):
        return self._bits.random_raw(n)

    def uniform(self) -> float:
        return (int(self._bits.random_raw()) >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]``."""
        return min(lo + int(self.uniform() * (hi - lo + 1)), hi)

    def integers(self, lo: int, hi: int, n: int) -> np.ndarray:
        u = self.uniforms(n)
        return np.minimum(lo + np.floor(u * (hi - lo + 1)).astype(np.int64), hi)

    def between(self, lo: float, hi: float) -> float:
        return lo + self.uniform() * (hi - lo)


@dataclass(frozen=True)
class WorkloadSpec:
    n_tasks: tuple[int, int] = (15, 25)
    subtasks_per_task: tuple[int, int] = (3, 6)
    task_time: tuple[float, float] = (5.0, 50.0)  # seconds per task, split over its subtasks
    comm_volume: tuple[int, int] = (1000, 10000)  # bytes per edge
    comm_probability: tuple[float, float] = (5.0, 35.0)  # percent per subtask pair
    heterogeneity: Mapping[str, float] = field(default_factory=dict)  # speed multiplier per type
    seed: int = 0

    def __post_init__(self):
        for name in ("n_tasks", "subtasks_per_task", "task_time", "comm_volume", "comm_probability"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise SpecError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
        if self.n_tasks[0] < 1 or self.subtasks_per_task[0] < 1:
            raise SpecError("n_tasks and subtasks_per_task must be at least 1")
        if self.task_time[0] <= 0:
            raise SpecError("task_time must be positive")
        if self.comm_volume[0] < 1:
            raise SpecError("comm_volume must be at least 1 byte")
        lo, hi = self.comm_probability
        if lo < 0 or hi > 100:
            raise SpecError("comm_probability must lie in [0, 100]")
        for ptype, mult in self.heterogeneity.items():
            if not mult > 0:
                raise SpecError(f"heterogeneity multiplier for {ptype!r} must be positive")
        if not 0 <= self.seed < 2**64:
            raise SpecError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> WorkloadSpec:
        return WorkloadSpec(**{**self.to_dict(), **changes})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["heterogeneity"] = dict(self.heterogeneity)
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> WorkloadSpec:
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {}
        try:
            for key, value in doc.items():
                if key not in known:
                    continue
                if key in ("heterogeneity", "seed"):
                    kwargs[key] = dict(value) if key == "heterogeneity" else int(value)
                else:
                    lo, hi = value
                    cast = int if key in ("n_tasks", "subtasks_per_task", "comm_volume") else float
                    kwargs[key] = (cast(lo), cast(hi))
        except (TypeError, ValueError) as exc:
            raise SpecError(f"invalid workload spec: {exc}") from None
        return cls(**kwargs)


def load_spec(source) -> tuple[WorkloadSpec, dict]:
    """Spec plus the raw document (which may carry extras such as a topology name)."""
    doc = read_document(source)
    return WorkloadSpec.from_dict(doc), doc


PAPER_8CORE = {"topology": "fig1_8core", "n_tasks": [15, 25]}
PAPER_64CORE = {"topology": "hp_64core", "n_tasks": [120, 200]}
SPEC_PRESETS = {"paper_8core": PAPER_8CORE, "paper_64core": PAPER_64CORE}


def generate(spec: WorkloadSpec, topo: Topology) -> ApplicationGraph:
    """Draw one acyclic application graph; identical output for identical seeds."""
    rng = Pcg64Stream(spec.seed)
    types = topo.processor_types
    mult = {t: float(spec.heterogeneity.get(t, 1.0)) for t in types}

    n = rng.integer(*spec.n_tasks)
    prob = rng.between(*spec.comm_probability) / 100.0
    width = len(str(n - 1))
    task_ids = [f"T{i:0{width}d}" for i in range(n)]

    tasks = []
    for tid in task_ids:
        k = rng.integer(*spec.subtasks_per_task)
        total = rng.between(*spec.task_time)
        while True:
            cuts = sorted(rng.uniform() for _ in range(k - 1))
            bounds = [0.0, *cuts, 1.0]
            pieces = [(b - a) * total for a, b in zip(bounds, bounds[1:])]
            if all(p > 0 for p in pieces):
                break
        subs = [
            (f"{tid}.s{j}", {t: base * mult[t] for t in types}) for j, base in enumerate(pieces)
        ]
        tasks.append((tid, subs))

    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.integer(0, i)
        order[i], order[j] = order[j], order[i]

    flat: list[str] = []
    first_of_next: list[int] = []
    for pos in order:
        subs = tasks[pos][1]
        end = len(flat) + len(subs)
        for sid, _ in subs:
            flat.append(sid)
            first_of_next.append(end)
    total_subs = len(flat)

    pairs: list[tuple[int, int]] = []
    for i, start in enumerate(first_of_next):
        if start >= total_subs:
            continue
        hits = np.nonzero(rng.uniforms(total_subs - start) < prob)[0]
        pairs.extend((i, start + int(h)) for h in hits)
    vols = rng.integers(*spec.comm_volume, len(pairs)) if pairs else []
    edges = [(flat[a], flat[b], int(v)) for (a, b), v in zip(pairs, vols)]
    return build_graph(tasks, edges, processor_types=types)


def grain_ratio(g: ApplicationGraph, topo: Topology) -> float:
    """Total average compute time over total average communication time.

    Each edge costs the mean of its transfer time over all ordered pairs of
    distinct cores. Returns ``math.inf`` when nothing is communicated.
    """
    compute = math.fsum(compute_avg_time(st, topo) for st in g.subtasks.values())
    n = len(topo.cores)
    if not g.edges or n < 2:
        return math.inf
    off = ~np.eye(n, dtype=bool)
    mean_lat = float(topo.latency_matrix[off].mean())
    mean_inv_bw = float((1.0 / topo.bandwidth_matrix[off]).mean())
    comm = math.fsum(mean_lat + e.volume * mean_inv_bw for e in g.edges)
    return compute / comm


def small_case(
    seed: int, max_tasks: int = 4, max_subtasks: int = 3, max_cores: int = 3
) -> tuple[ApplicationGraph, Topology]:
    """Tiny random instance (graph plus a 1..max_cores core machine) for oracle checks.

    Links are slow enough that transfers cost seconds, so placement choices matter.
    """
    rng = Pcg64Stream(seed)
    n_cores = rng.integer(1, max_cores)
    hetero = rng.uniform() < 0.5
    types = ["A", "B"] if hetero else ["A"]
    outer_bw = rng.between(500.0, 2000.0)
    outer_lat = rng.between(0.0, 1.0)
    inner_bw = outer_bw * rng.between(1.0, 4.0)
    inner_lat = outer_lat * rng.uniform()
    cores = [
        {"id": f"c{i}", "core": True, "processor_type": types[rng.integer(0, len(types) - 1)]}
        for i in range(n_cores)
    ]
    pair = {"id": "near", "kind": "shared-memory-level", "bandwidth_Bps": inner_bw,
            "latency_s": inner_lat, "children": cores[:2]}
    root = {"id": "far", "kind": "shared-memory-level", "bandwidth_Bps": outer_bw,
            "latency_s": outer_lat, "children": [pair, *cores[2:]]}
    topo = load_topology({"name": f"small_{seed}", "processor_types": types, "root": root}, strict=True)
    spec = WorkloadSpec(
        n_tasks=(1, max_tasks),
        subtasks_per_task=(1, max_subtasks),
        comm_probability=(0.0, 60.0),
        heterogeneity={"B": rng.between(0.5, 2.0)} if hetero else {},
        seed=int(rng.raw()),
    )
    return generate(spec, topo), topo
