"""Hierarchical machine model: cores as leaves of a tree of memory/network levels.

Two distinct cores communicate through their lowest common level, paying that
level's latency plus ``volume / bandwidth``. A core talking to itself pays nothing.
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import read_document
from .errors import ParseError, TopologyError

SHARED_MEMORY = "shared-memory-level"
NETWORK = "network"
LEVEL_KINDS = (SHARED_MEMORY, NETWORK)


class TopologyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CommLevel:
    id: str
    kind: str
    bandwidth: float  # bytes per second
    latency: float  # seconds


@dataclass(frozen=True)
class Core:
    id: str
    processor_type: str
    path: tuple[str, ...]  # level ids, root first, ending at the parent level


@dataclass(frozen=True, eq=False)
class Topology:
    name: str
    processor_types: tuple[str, ...]
    levels: Mapping[str, CommLevel]
    children: Mapping[str, tuple[str, ...]]
    root: str
    cores: Mapping[str, Core]
    core_index: dict = field(default_factory=dict, repr=False)
    # n x n lowest-common-level tables; the diagonal encodes zero-cost self messages
    level_matrix: np.ndarray = field(default=None, repr=False)
    latency_matrix: np.ndarray = field(default=None, repr=False)
    bandwidth_matrix: np.ndarray = field(default=None, repr=False)
    level_order: tuple[str, ...] = field(default=(), repr=False)

    def __post_init__(self):
        core_ids = list(self.cores)
        n = len(core_ids)
        level_order = tuple(self.levels)
        lvl_pos = {lid: i for i, lid in enumerate(level_order)}
        lvl = np.full((n, n), -1, dtype=np.int64)
        lat = np.zeros((n, n))
        bw = np.full((n, n), np.inf)
        paths = [self.cores[c].path for c in core_ids]
        for i in range(n):
            for j in range(i + 1, n):
                common = _lowest_common(paths[i], paths[j])
                level = self.levels[common]
                lvl[i, j] = lvl[j, i] = lvl_pos[common]
                lat[i, j] = lat[j, i] = level.latency
                bw[i, j] = bw[j, i] = level.bandwidth
        for arr in (lvl, lat, bw):
            arr.flags.writeable = False
        object.__setattr__(self, "core_index", {c: i for i, c in enumerate(core_ids)})
        object.__setattr__(self, "level_matrix", lvl)
        object.__setattr__(self, "latency_matrix", lat)
        object.__setattr__(self, "bandwidth_matrix", bw)
        object.__setattr__(self, "level_order", level_order)

    @property
    def depth(self) -> int:
        return max(len(c.path) for c in self.cores.values())

    def core_ids(self) -> list[str]:
        return list(self.cores)

    def lowest_common_level(self, a: str, b: str) -> CommLevel | None:
        """Level shared by cores ``a`` and ``b``; ``None`` when ``a == b``."""
        i, j = self._idx(a), self._idx(b)
        k = self.level_matrix[i, j]
        return None if k < 0 else self.levels[self.level_order[k]]

    def leaves(self) -> list[str]:
        """Cores found by walking the tree from the root, in child order."""
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node in self.cores:
                out.append(node)
            else:
                stack.extend(reversed(self.children.get(node, ())))
        return out

    def _idx(self, core: str) -> int:
        try:
            return self.core_index[core]
        except KeyError:
            raise TopologyError(f"unknown core {core!r}") from None


def _lowest_common(p: tuple[str, ...], q: tuple[str, ...]) -> str:
    common = None
    for a, b in zip(p, q):
        if a != b:
            break
        common = a
    assert common is not None, "cores share no root"
    return common


def comm_cost(topo: Topology, src: str, dst: str, volume: float) -> float:
    """Seconds to move ``volume`` bytes from core ``src`` to core ``dst``."""
    i, j = topo._idx(src), topo._idx(dst)
    if i == j:
        return 0.0
    return float(topo.latency_matrix[i, j]) + volume / float(topo.bandwidth_matrix[i, j])


def load_topology(source, strict: bool = False) -> Topology:
    """Build a topology from a nested tree document.

    Levels must get faster toward the leaves (bandwidth non-decreasing, latency
    non-increasing). A violation warns, or raises when ``strict`` is set.
    """
    doc = read_document(source)
    try:
        types = tuple(str(t) for t in doc["processor_types"])
        root_node = doc["root"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"topology document does not match schema: {exc!r}") from None
    if not types:
        raise TopologyError("processor_types is empty")

    levels: dict[str, CommLevel] = {}
    children: dict[str, tuple[str, ...]] = {}
    cores: dict[str, Core] = {}
    seen: set[str] = set()

    def visit(node, path: tuple[str, ...], parent: CommLevel | None):
        if not isinstance(node, Mapping) or "id" not in node:
            raise ParseError(f"topology node without id under {'/'.join(path) or 'root'}")
        nid = str(node["id"])
        if nid in seen:
            raise TopologyError(f"node id {nid!r} appears twice; topology must be a tree")
        seen.add(nid)
        if node.get("core"):
            if node.get("children"):
                raise TopologyError(f"core {nid!r} cannot have children")
            if not path:
                raise TopologyError(f"core {nid!r} must sit under at least one level")
            ptype = str(node.get("processor_type", ""))
            if ptype not in types:
                raise TopologyError(f"core {nid!r} has undeclared processor type {ptype!r}")
            cores[nid] = Core(nid, ptype, path)
            return
        try:
            kind = str(node["kind"])
            level = CommLevel(nid, kind, float(node["bandwidth_Bps"]), float(node["latency_s"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"level {nid!r} does not match schema: {exc!r}") from None
        if kind not in LEVEL_KINDS:
            raise TopologyError(f"level {nid!r} has unknown kind {kind!r}")
        if not level.bandwidth > 0 or not level.latency >= 0:
            raise TopologyError(f"level {nid!r} needs bandwidth > 0 and latency >= 0")
        if parent is not None and (
            level.bandwidth < parent.bandwidth or level.latency > parent.latency
        ):
            msg = f"level {nid!r} is slower than its parent {parent.id!r}"
            if strict:
                raise TopologyError(msg)
            warnings.warn(msg, TopologyWarning, stacklevel=3)
        kids = node.get("children") or []
        if not kids:
            raise TopologyError(f"level {nid!r} has no children; leaves must be cores")
        levels[nid] = level
        for k in kids:
            visit(k, path + (nid,), level)
        children[nid] = tuple(str(k["id"]) for k in kids)

    visit(root_node, (), None)
    return Topology(
        name=str(doc.get("name", "")),
        processor_types=types,
        levels=levels,
        children=children,
        root=str(root_node["id"]),
        cores=cores,
    )


def topology_to_dict(topo: Topology) -> dict:
    def node(nid: str) -> dict:
        if nid in topo.cores:
            return {"id": nid, "core": True, "processor_type": topo.cores[nid].processor_type}
        lv = topo.levels[nid]
        return {
            "id": nid,
            "kind": lv.kind,
            "bandwidth_Bps": lv.bandwidth,
            "latency_s": lv.latency,
            "children": [node(c) for c in topo.children[nid]],
        }

    return {"name": topo.name, "processor_types": list(topo.processor_types), "root": node(topo.root)}


def scaled_topology(topo: Topology, k: float) -> Topology:
    """Latencies multiplied by ``k``; together with volumes scaled by ``k`` every
    transfer time scales by ``k``."""
    doc = topology_to_dict(topo)

    def walk(n):
        if "latency_s" in n:
            n["latency_s"] *= k
            for c in n["children"]:
                walk(c)

    walk(doc["root"])
    return load_topology(doc)


def _level(lid, kind, bw, lat, children):
    return {"id": lid, "kind": kind, "bandwidth_Bps": bw, "latency_s": lat, "children": children}


def _core(cid, ptype):
    return {"id": cid, "core": True, "processor_type": ptype}


# Illustrative timings, not measurements of the machines they are named after:
# effective per-message costs of a message-passing runtime through each tier.
FIG1_TIMINGS = {
    "ram": (2.0e6, 2.0e-3),
    "l3": (8.0e6, 5.0e-4),
    "l2": (2.0e7, 1.0e-4),
    "l1": (5.0e7, 1.0e-5),
}

HP64_TIMINGS = {
    "net": (1.0e6, 1.0e-2),
    "ram": (2.0e6, 2.0e-3),
    "fsb": (4.0e6, 1.0e-3),
    "l2": (2.0e7, 1.0e-4),
    "l1": (5.0e7, 1.0e-5),
}


def fig1_8core_document(timings=FIG1_TIMINGS) -> dict:
    """Two quad-core processors sharing RAM; L3 per quad, L2 per pair, private L1."""
    ptype = "xeon_e5410"
    core_no = 0
    quads = []
    for p in range(2):
        pairs = []
        for q in range(2):
            l1s = []
            for _ in range(2):
                l1s.append(_level(f"l1_{core_no}", SHARED_MEMORY, *timings["l1"], [_core(f"c{core_no}", ptype)]))
                core_no += 1
            pairs.append(_level(f"l2_{2 * p + q}", SHARED_MEMORY, *timings["l2"], l1s))
        quads.append(_level(f"l3_{p}", SHARED_MEMORY, *timings["l3"], pairs))
    root = _level("ram", SHARED_MEMORY, *timings["ram"], quads)
    return {"name": "fig1_8core", "processor_types": [ptype], "root": root}


def hp_64core_document(timings=HP64_TIMINGS) -> dict:
    """Eight blades on a network; two quad-core processors per blade, L2 per core pair."""
    ptype = "xeon_e5405"
    core_no = 0
    pair_no = 0
    blades = []
    for b in range(8):
        procs = []
        for p in range(2):
            pairs = []
            for _ in range(2):
                l1s = []
                for _ in range(2):
                    cid = f"c{core_no:02d}"
                    l1s.append(_level(f"l1_{core_no:02d}", SHARED_MEMORY, *timings["l1"], [_core(cid, ptype)]))
                    core_no += 1
                pairs.append(_level(f"l2_{pair_no:02d}", SHARED_MEMORY, *timings["l2"], l1s))
                pair_no += 1
            procs.append(_level(f"fsb_{2 * b + p:02d}", SHARED_MEMORY, *timings["fsb"], pairs))
        blades.append(_level(f"ram_{b}", SHARED_MEMORY, *timings["ram"], procs))
    root = _level("net", NETWORK, *timings["net"], blades)
    return {"name": "hp_64core", "processor_types": [ptype], "root": root}


PRESETS = {
    "fig1_8core": fig1_8core_document,
    "hp_64core": hp_64core_document,
}


def preset(name: str) -> Topology:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise TopologyError(f"unknown topology preset {name!r}; known: {', '.join(PRESETS)}") from None
    return load_topology(factory(), strict=True)


def resolve_topology(ref, strict: bool = False) -> Topology:
    """Preset name or topology document source."""
    if isinstance(ref, str) and ref in PRESETS:
        return preset(ref)
    if isinstance(ref, str) and not ref.lstrip().startswith("{") and not Path(ref).exists():
        raise TopologyError(f"topology {ref!r} is neither a file nor a preset ({', '.join(PRESETS)})")
    return load_topology(ref, strict=strict)
