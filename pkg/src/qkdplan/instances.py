"""Random ER-style instance families and the bundled NSFNET fixture."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .topology import (
    Demand,
    DemandMatrix,
    Topology,
    dump_demands,
    dump_topology,
    load_demands,
    load_topology,
    read_demands,
    read_topology,
)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one random family (defaults: the 10-node setup)."""

    n_nodes: int = 10
    instances: int = 10
    avg_degree: float = 3.0
    length_range_km: tuple[float, float] = (10.0, 500.0)
    demand_range_kbps: tuple[float, float] = (100.0, 500.0)
    user_fraction: float = 0.2
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if not 0 < self.user_fraction <= 1:
            raise ValueError("user_fraction must be in (0, 1]")
        for name in ("length_range_km", "demand_range_kbps"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi")
        if self.edge_count > self.n_nodes * (self.n_nodes - 1) // 2:
            raise ValueError(
                f"{self.edge_count} edges do not fit in a simple graph on {self.n_nodes} nodes"
            )

    @property
    def edge_count(self) -> int:
        return int(math.floor(self.avg_degree * self.n_nodes / 2 + 0.5))

    @property
    def user_count(self) -> int:
        return math.ceil(self.user_fraction * self.n_nodes - 1e-9)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["length_range_km"] = list(self.length_range_km)
        d["demand_range_kbps"] = list(self.demand_range_kbps)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> GenSpec:
        data = dict(data)
        for key in ("length_range_km", "demand_range_kbps"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class Instance:
    index: int
    seed: int
    topology: Topology
    demands: DemandMatrix
    users: tuple[int, ...]


@dataclass(frozen=True)
class InstanceFamily:
    spec: GenSpec
    instances: tuple[Instance, ...]

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


def _connected(n: int, edges: list[tuple[int, int]]) -> bool:
    if not edges:
        return n <= 1
    u, v = zip(*edges)
    graph = sp.coo_matrix((np.ones(len(edges)), (u, v)), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return count == 1


def gen_instance(spec: GenSpec, index: int, seed: int) -> Instance:
    rng = np.random.default_rng(seed)
    n, m = spec.n_nodes, spec.edge_count
    all_pairs = list(combinations(range(n), 2))
    for _ in range(spec.max_retries):
        chosen = np.sort(rng.choice(len(all_pairs), size=m, replace=False))
        edges = [all_pairs[i] for i in chosen]
        if _connected(n, edges):
            break
    else:
        raise RuntimeError(f"no connected graph after {spec.max_retries} draws (n={n}, m={m})")

    lo, hi = spec.length_range_km
    lengths = rng.uniform(lo, hi, size=m)
    users = tuple(sorted(int(u) for u in rng.permutation(n)[: spec.user_count]))
    dlo, dhi = spec.demand_range_kbps
    pairs = [(s, t) for s in users for t in users if s != t]
    rates = rng.uniform(dlo, dhi, size=len(pairs))
    topology = Topology.build(
        range(n),
        [(u, v, float(length)) for (u, v), length in zip(edges, lengths)],
        name=f"er{n}-{index}",
    )
    demands = DemandMatrix.build(Demand(s, t, float(r), 1.0) for (s, t), r in zip(pairs, rates))
    return Instance(index, seed, topology, demands, users)


def instance_seeds(spec: GenSpec) -> list[int]:
    children = np.random.SeedSequence(spec.seed).spawn(spec.instances)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> 1) for c in children]


def gen_family(spec: GenSpec) -> InstanceFamily:
    """Draw ``spec.instances`` connected G(n, m) graphs with uniform lengths,
    a seeded user subset and uniform demands between every ordered user pair.
    """
    seeds = instance_seeds(spec)
    return InstanceFamily(spec, tuple(gen_instance(spec, i, s) for i, s in enumerate(seeds)))


def nsfnet_fixture() -> tuple[Topology, DemandMatrix]:
    data = resources.files("qkdplan") / "data"
    topology = load_topology((data / "nsfnet.yaml").read_text(), source="nsfnet.yaml")
    demands = load_demands((data / "nsfnet_demands.csv").read_text(), source="nsfnet_demands.csv")
    return topology, demands


# -- family directories -------------------------------------------------------


def write_family(family: InstanceFamily, out_dir: str | Path, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "spec": family.spec.to_dict(),
        "instances": [],
        **(extra or {}),
    }
    for inst in family:
        sub = out / f"instance_{inst.index:03d}"
        sub.mkdir(exist_ok=True)
        (sub / "topology.yaml").write_text(dump_topology(inst.topology))
        (sub / "demands.csv").write_text(dump_demands(inst.demands))
        manifest["instances"].append(
            {"index": inst.index, "seed": inst.seed, "dir": sub.name, "users": list(inst.users)}
        )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


def read_family(path: str | Path) -> InstanceFamily:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    instances = []
    for entry in manifest["instances"]:
        sub = root / entry["dir"]
        instances.append(
            Instance(
                entry["index"], entry["seed"],
                read_topology(sub / "topology.yaml"), read_demands(sub / "demands.csv"),
                tuple(entry["users"]),
            )
        )
    return InstanceFamily(GenSpec.from_dict(manifest["spec"]), tuple(instances))
