"""Distance-parameterized key-generation rates for C2C and CSC devices."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from .topology import CscEdge, NodeId, Topology, enumerate_csc_edges


@dataclass(frozen=True)
class C2CRateModel:
    """Point-to-point device: ``r0 * 10^(-alpha L / 10)`` up to ``l_max``."""

    r0: float = 1000.0
    alpha: float = 0.2
    l_max: float = 200.0

    def __post_init__(self):
        if self.r0 < 0 or self.alpha < 0 or self.l_max <= 0:
            raise ValueError(f"invalid C2C rate model {self}")

    def __call__(self, length_km: float) -> float:
        return c2c_rate(self, length_km)


@dataclass(frozen=True)
class CSCRateModel:
    """Two-leg device through an untrusted server.

    Loss enters with half the exponent of the C2C model (square-root scaling)
    and an extra penalty on leg asymmetry.
    """

    r0_hat: float = 1000.0
    alpha: float = 0.2
    asym_gamma: float = 0.05
    l_max_total: float = 600.0

    def __post_init__(self):
        if min(self.r0_hat, self.alpha, self.asym_gamma) < 0 or self.l_max_total <= 0:
            raise ValueError(f"invalid CSC rate model {self}")

    def __call__(self, l1_km: float, l2_km: float) -> float:
        return csc_rate(self, l1_km, l2_km)


def c2c_rate(m: C2CRateModel, length_km: float) -> float:
    if length_km < 0:
        raise ValueError(f"negative length {length_km}")
    if length_km > m.l_max:
        return 0.0
    return m.r0 * 10.0 ** (-m.alpha * length_km / 10.0)


def csc_rate(m: CSCRateModel, l1_km: float, l2_km: float) -> float:
    if l1_km < 0 or l2_km < 0:
        raise ValueError(f"negative length ({l1_km}, {l2_km})")
    if l1_km + l2_km > m.l_max_total:
        return 0.0
    return (
        m.r0_hat
        * 10.0 ** (-m.alpha * (l1_km + l2_km) / 20.0)
        * 10.0 ** (-m.asym_gamma * abs(l1_km - l2_km) / 10.0)
    )


def edge_label(*nodes: NodeId) -> str:
    """Override key for an edge (``"u-v"``) or CSC edge (``"u-p-v"``)."""
    return "-".join(str(n) for n in nodes)


@dataclass(frozen=True)
class RateConfig:
    """Default models plus per-position overrides.

    An override value is either a fixed rate in kbps or a mapping of model
    parameters replacing the defaults for that one position. Keys are
    :func:`edge_label` strings in either orientation.
    """

    c2c: C2CRateModel = field(default_factory=C2CRateModel)
    csc: CSCRateModel = field(default_factory=CSCRateModel)
    c2c_overrides: Mapping[str, Any] = field(default_factory=dict)
    csc_overrides: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "c2c": vars(self.c2c).copy(),
            "csc": vars(self.csc).copy(),
            "c2c_overrides": dict(self.c2c_overrides),
            "csc_overrides": dict(self.csc_overrides),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RateConfig:
        unknown = set(data) - {"c2c", "csc", "c2c_overrides", "csc_overrides"}
        if unknown:
            raise ValueError(f"unknown rate config field(s) {sorted(unknown)}")
        return cls(
            c2c=C2CRateModel(**data.get("c2c", {})),
            csc=CSCRateModel(**data.get("csc", {})),
            c2c_overrides=dict(data.get("c2c_overrides", {})),
            csc_overrides=dict(data.get("csc_overrides", {})),
        )


@dataclass(frozen=True)
class Rates:
    """Precomputed per-device capability, keyed by canonical edge tuples."""

    c2c: dict[tuple[NodeId, NodeId], float]
    csc: dict[tuple[NodeId, NodeId, NodeId], float]


def _lookup(overrides: Mapping[str, Any], *labels: str):
    for label in labels:
        if label in overrides:
            return overrides[label]
    return None


def compute_rates(
    topology: Topology,
    config: RateConfig | None = None,
    csc_edges: list[CscEdge] | None = None,
    c2c_fn: Callable[[float], float] | None = None,
    csc_fn: Callable[[float, float], float] | None = None,
) -> Rates:
    """Evaluate the rate functions once per edge and CSC edge.

    ``c2c_fn``/``csc_fn`` replace the default models when given; overrides in
    ``config`` still take precedence.
    """
    config = config or RateConfig()
    if csc_edges is None:
        csc_edges = enumerate_csc_edges(topology)
    c2c_fn = c2c_fn or config.c2c
    csc_fn = csc_fn or config.csc

    c2c = {}
    for u, v, length in topology.edges:
        ov = _lookup(config.c2c_overrides, edge_label(u, v), edge_label(v, u))
        if ov is None:
            c2c[(u, v)] = float(c2c_fn(length))
        elif isinstance(ov, Mapping):
            c2c[(u, v)] = c2c_rate(replace(config.c2c, **ov), length)
        else:
            c2c[(u, v)] = float(ov)

    csc = {}
    for e in csc_edges:
        ov = _lookup(config.csc_overrides, edge_label(e.u, e.p, e.v), edge_label(e.v, e.p, e.u))
        if ov is None:
            csc[e.key] = float(csc_fn(e.l_up, e.l_pv))
        elif isinstance(ov, Mapping):
            csc[e.key] = csc_rate(replace(config.csc, **ov), e.l_up, e.l_pv)
        else:
            csc[e.key] = float(ov)

    for table in (c2c, csc):
        for key, rate in table.items():
            if not rate >= 0:
                raise ValueError(f"rate for {key} must be >= 0, got {rate}")
    return Rates(c2c, csc)
