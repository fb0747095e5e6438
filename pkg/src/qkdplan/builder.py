"""Builds the device-placement / trusted-relay MILP for a hybrid QKD network."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal, Union

from . import naming
from .model import Constraint, Domain, ModelIR, Variable
from .rates import Rates
from .topology import (
    DemandMatrix,
    InputError,
    Topology,
    check_demands,
    enumerate_csc_edges,
    incident_device_count_expr,
)

Mode = Literal["hybrid", "pure-c2c", "pure-csc"]
MODES: tuple[str, ...] = ("hybrid", "pure-c2c", "pure-csc")
BASELINES = ("all-nodes", "device-roles")


@dataclass(frozen=True)
class BuildConfig:
    """Cost and mode parameters of a model build.

    ``baseline`` chooses how trust is forced when ``relay_selection`` is off:
    ``"all-nodes"`` trusts every node of the network, ``"device-roles"`` only
    nodes hosting any device role, CSC servers included.
    """

    budget: float = 10000.0
    q1: float = 1.0
    q2: float = 100.0
    mode: Mode = "hybrid"
    relay_selection: bool = True
    big_m: Union[float, str] = "auto"
    tighten_trust: bool = True
    baseline: str = "all-nodes"

    def __post_init__(self):
        if not self.budget >= 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")
        if not self.q1 > 0:
            raise ValueError(f"q1 must be > 0, got {self.q1}")
        if not self.q2 >= 0:
            raise ValueError(f"q2 must be >= 0, got {self.q2}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if self.big_m != "auto" and not (isinstance(self.big_m, (int, float)) and self.big_m > 0):
            raise ValueError(f"big_m must be 'auto' or a positive number, got {self.big_m!r}")

    @property
    def big_m_value(self) -> float:
        # total devices <= C / min(1, q1); each device touches at most 2 clients
        if self.big_m == "auto":
            return 1.0 + 2.0 * self.budget / min(1.0, self.q1)
        return float(self.big_m)

    def to_dict(self) -> dict:
        return asdict(self)


def _add(expr: dict[str, float], name: str, coef: float) -> None:
    expr[name] = expr.get(name, 0.0) + coef


def build_model(
    topology: Topology,
    demands: DemandMatrix,
    rates: Rates,
    cfg: BuildConfig | None = None,
) -> ModelIR:
    """Assemble the MILP maximizing the global satisfaction degree ``B``.

    Variable order: ``B``, C2C counts, CSC counts, per-node trust triples,
    optional role indicators, then per-pair flows (C2C then CSC, both
    orientations). Only pairs with ``D * beta > 0`` get flows.
    """
    cfg = cfg or BuildConfig()
    check_demands(topology, demands)
    pairs = demands.active()
    if not pairs:
        raise InputError("no demand pairs with positive key demand")
    csc_edges = enumerate_csc_edges(topology)
    for u, v, _ in topology.edges:
        if (u, v) not in rates.c2c:
            raise InputError(f"missing C2C rate for edge ({u!r}, {v!r})")
    for e in csc_edges:
        if e.key not in rates.csc:
            raise InputError(f"missing CSC rate for CSC edge {e.key!r}")

    selection = cfg.relay_selection
    roles = not selection and cfg.baseline == "device-roles"
    big_m = cfg.big_m_value
    variables: list[Variable] = []
    keys: dict[str, tuple] = {}

    def var(name, key, domain=Domain.CONTINUOUS, lb=0.0, ub=math.inf):
        variables.append(Variable(name, domain, lb, ub))
        keys[name] = key

    var(naming.B, ("B",))
    for u, v, _ in topology.edges:
        var(naming.s_var(u, v), ("S", (u, v)), Domain.INTEGER,
            ub=0.0 if cfg.mode == "pure-csc" else math.inf)
    for e in csc_edges:
        var(naming.shat_var(*e.key), ("Shat", e.key), Domain.INTEGER,
            ub=0.0 if cfg.mode == "pure-c2c" else math.inf)
    force_all = not selection and cfg.baseline == "all-nodes"
    for n in topology.nodes:
        var(naming.t_var(n), ("T", n), Domain.BINARY, lb=1.0 if force_all else 0.0, ub=1.0)
        var(naming.tp_var(n), ("Tp", n), Domain.BINARY, ub=1.0)
        var(naming.tpp_var(n), ("Tpp", n))
    if roles:
        for n in topology.nodes:
            var(naming.role_var(n), ("Trole", n), Domain.BINARY, ub=1.0)
    for d in pairs:
        s, t = d.s, d.t
        for u, v, _ in topology.edges:
            var(naming.f_var(s, t, u, v), ("F", (s, t), (u, v)))
            var(naming.f_var(s, t, v, u), ("F", (s, t), (v, u)))
        for e in csc_edges:
            var(naming.fhat_var(s, t, e.u, e.p, e.v), ("Fhat", (s, t), (e.u, e.p, e.v)))
            var(naming.fhat_var(s, t, e.v, e.p, e.u), ("Fhat", (s, t), (e.v, e.p, e.u)))

    constraints: list[Constraint] = []

    def con(name, expr, sense, rhs=0.0):
        coeffs = tuple((n, c) for n, c in expr.items() if c != 0)
        constraints.append(Constraint(name, coeffs, sense, rhs))

    # capacity: both orientations pooled against the devices on the position
    for u, v, _ in topology.edges:
        expr: dict[str, float] = {}
        for d in pairs:
            _add(expr, naming.f_var(d.s, d.t, u, v), 1.0)
            _add(expr, naming.f_var(d.s, d.t, v, u), 1.0)
        _add(expr, naming.s_var(u, v), -rates.c2c[(u, v)])
        con(f"cap_{u}_{v}", expr, "<=")
    for e in csc_edges:
        expr = {}
        for d in pairs:
            _add(expr, naming.fhat_var(d.s, d.t, e.u, e.p, e.v), 1.0)
            _add(expr, naming.fhat_var(d.s, d.t, e.v, e.p, e.u), 1.0)
        _add(expr, naming.shat_var(*e.key), -rates.csc[e.key])
        con(f"capx_{e.u}_{e.p}_{e.v}", expr, "<=")

    # key flows only conserve at CSC *clients*; the server p is not on the key path
    for d in pairs:
        s, t = d.s, d.t
        netout = {n: {} for n in topology.nodes}
        for u, v, _ in topology.edges:
            for a, b in ((u, v), (v, u)):
                name = naming.f_var(s, t, a, b)
                _add(netout[a], name, 1.0)
                _add(netout[b], name, -1.0)
        for e in csc_edges:
            for a, b in ((e.u, e.v), (e.v, e.u)):
                name = naming.fhat_var(s, t, a, e.p, b)
                _add(netout[a], name, 1.0)
                _add(netout[b], name, -1.0)
        for n in topology.nodes:
            if n in (s, t) or not netout[n]:
                continue
            con(f"flow_{s}_{t}_{n}", netout[n], "=")
        sink = dict(netout[t])
        for name, c in netout[s].items():
            _add(sink, name, c)
        if sink:
            con(f"sink_{s}_{t}", sink, "=")
        dem = dict(netout[s])
        _add(dem, naming.B, -d.key_demand)
        con(f"demand_{s}_{t}", dem, ">=")

    budget: dict[str, float] = {}
    for u, v, _ in topology.edges:
        _add(budget, naming.s_var(u, v), 1.0)
    for e in csc_edges:
        _add(budget, naming.shat_var(*e.key), cfg.q1)
    for n in topology.nodes:
        _add(budget, naming.t_var(n), cfg.q2)
    con("budget", budget, "<=", cfg.budget)

    for n in topology.nodes:
        incidence = incident_device_count_expr(topology, n, csc_edges)
        T, Tp, Tpp = naming.t_var(n), naming.tp_var(n), naming.tpp_var(n)
        con(f"tsplit_{n}", {Tp: 1.0, Tpp: 1.0}, "=", 1.0)
        con(f"tbigm_{n}", {**incidence, T: -big_m}, "<=")
        con(f"tfloor_{n}", {**incidence, Tp: 1.0, Tpp: -1.0}, ">=")
        if cfg.tighten_trust and selection:
            con(f"ttight_{n}", {T: 1.0, **{k: -c for k, c in incidence.items()}}, "<=")
        if roles:
            extended = dict(incidence)
            for e in csc_edges:
                if e.p == n:
                    _add(extended, naming.shat_var(*e.key), 1.0)
            R = naming.role_var(n)
            con(f"trole_{n}", {**extended, R: -big_m}, "<=")
            con(f"tforce_{n}", {T: 1.0, R: -1.0}, ">=")

    # the empty deployment (B = 0, no devices) is feasible whenever the
    # forced trust fits the budget; T' = 1 satisfies the I = 0 split
    start = {v.name: 0.0 for v in variables}
    for n in topology.nodes:
        start[naming.tp_var(n)] = 1.0
        if force_all:
            start[naming.t_var(n)] = 1.0
    return ModelIR(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=((naming.B, 1.0),),
        sense="maximize",
        name=f"qkdplan {topology.name or 'topology'} {cfg.mode}"
        f" {'selection' if selection else 'no-selection'}",
        keys=keys,
        start=start,
    )
