"""Batch estimation-error experiments: generate, map, replay, summarize."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
from dataclasses import dataclass, field

from .errors import SpecError
from .generator import WorkloadSpec, generate, grain_ratio
from .mapper import map_graph
from .simulator import simulate
from .topology import Topology, topology_to_dict

ROW_FIELDS = (
    "instance_id",
    "tasks",
    "cores",
    "contention_mode",
    "grain_ratio",
    "t_est_s",
    "t_exec_s",
    "dif_rel_pct",
)


@dataclass(frozen=True)
class ExperimentRow:
    instance_id: str
    tasks: int
    cores: int
    contention_mode: str
    grain_ratio: float
    t_est_s: float
    t_exec_s: float
    dif_rel_pct: float


@dataclass
class ExperimentReport:
    rows: list[ExperimentRow]
    config: dict = field(default_factory=dict)

    @property
    def summary(self) -> dict:
        return summarize([r.dif_rel_pct for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in self.rows:
            w.writerow([getattr(r, f) for f in ROW_FIELDS])
        return buf.getvalue()

    def summary_document(self) -> dict:
        return {"summary": self.summary, "config": self.config}


def summarize(difs: list[float]) -> dict:
    if not difs:
        return {"n": 0, "mean_dif_rel_pct": None, "max_dif_rel_pct": None, "stddev_dif_rel_pct": None}
    return {
        "n": len(difs),
        "mean_dif_rel_pct": statistics.fmean(difs),
        "max_dif_rel_pct": max(difs),
        "min_dif_rel_pct": min(difs),
        # population standard deviation over the rows
        "stddev_dif_rel_pct": statistics.pstdev(difs),
    }


def topology_hash(topo: Topology) -> str:
    canon = json.dumps(topology_to_dict(topo), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def run_experiment(
    spec: WorkloadSpec,
    topo: Topology,
    runs: int,
    contention: str,
    base_seed: int | None = None,
    min_grain_ratio: float | None = None,
    max_attempts: int | None = None,
) -> ExperimentReport:
    """Collect ``runs`` instances from consecutive seeds starting at ``base_seed``.

    With ``min_grain_ratio`` set, instances at or below that ratio are skipped
    (and their seeds recorded as skipped) until enough rows are collected.
    """
    base = spec.seed if base_seed is None else base_seed
    limit = max_attempts if max_attempts is not None else max(runs * 20, 100)
    rows: list[ExperimentRow] = []
    used, skipped = [], []
    seed = base
    while len(rows) < runs:
        if seed - base >= limit:
            raise SpecError(
                f"only {len(rows)} of {runs} instances met grain ratio > {min_grain_ratio} "
                f"after {limit} seeds"
            )
        g = generate(spec.replace(seed=seed), topo)
        ratio = grain_ratio(g, topo)
        if min_grain_ratio is not None and not ratio > min_grain_ratio:
            skipped.append(seed)
            seed += 1
            continue
        sched = map_graph(g, topo)
        res = simulate(sched, g, topo, contention)
        rows.append(ExperimentRow(
            f"seed{seed}", len(g.tasks), len(topo.cores), contention, ratio,
            res.t_est, res.t_exec, res.dif_rel_pct,
        ))
        used.append(seed)
        seed += 1
    config = {
        "spec": {k: v for k, v in spec.to_dict().items() if k != "seed"},
        "base_seed": base,
        "seeds": used,
        "skipped_seeds": skipped,
        "min_grain_ratio": min_grain_ratio,
        "contention": contention,
        "topology": topo.name,
        "topology_sha256": topology_hash(topo),
    }
    return ExperimentReport(rows, config)
