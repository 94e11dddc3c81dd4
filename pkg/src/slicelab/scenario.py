"""Scenario files: everything one reconfiguration experiment needs, in YAML.

A scenario bundles the slice set, the substrate, the starting allocation,
simulation knobs, and algorithm knobs, plus which slice is the new
arrival. Files round-trip exactly: load(save(sc)) == sc, floats included.
An unbounded delay requirement is written as the string "unbounded".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .domain import (
    AllocationMatrix,
    AllocationVector,
    InvariantViolation,
    QoeRequirement,
    SliceSpec,
    Topology,
    TrafficModel,
    UNBOUNDED,
    validate_scenario,
)
from .osra import OsraConfig, order_key
from .simulator import SimConfig, delay_statistic


class ScenarioError(ValueError):
    """A scenario file that cannot be interpreted; message names the key."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    slices: tuple
    topology: Topology
    initial_alloc: AllocationMatrix
    sim: SimConfig
    osra: OsraConfig
    new_slice_id: str

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))

    def slice_by_id(self, slice_id: str) -> SliceSpec:
        for s in self.slices:
            if s.id == slice_id:
                return s
        raise KeyError(f"unknown slice id {slice_id!r}")

    @property
    def new_slice(self) -> SliceSpec:
        return self.slice_by_id(self.new_slice_id)

    def donors(self) -> tuple:
        me = self.new_slice
        return tuple(s for s in self.slices if order_key(s) > order_key(me))

    def validate(self) -> "ScenarioConfig":
        """Every cross-cutting invariant; raises listing all failures."""
        errs = []
        try:
            validate_scenario(self.slices, self.topology, self.initial_alloc)
        except InvariantViolation as e:
            errs += e.violations
        ids = [s.id for s in self.slices]
        if self.new_slice_id not in ids:
            errs.append(f"new_slice {self.new_slice_id!r} is not a slice id")
        else:
            new = self.new_slice
            donors = self.donors()
            if not donors:
                errs.append(
                    f"new slice {self.new_slice_id!r} has no lower-priority slices")
            for d in donors:
                if new.alpha_rho <= d.alpha_rho:
                    errs.append(
                        f"alpha_rho of new slice ({new.alpha_rho}) must exceed "
                        f"lower-priority {d.id!r} ({d.alpha_rho})")
                if (new.requirement.bounded and d.requirement.bounded
                        and new.alpha_tau <= d.alpha_tau):
                    errs.append(
                        f"alpha_tau of new slice ({new.alpha_tau}) must exceed "
                        f"lower-priority {d.id!r} ({d.alpha_tau})")
            if isinstance(self.osra.eta, dict):
                missing = [d.id for d in donors if d.id not in self.osra.eta]
                if missing:
                    errs.append(f"osra.eta map missing donor slices {missing}")
        try:
            delay_statistic(np.array([1.0]), self.osra.statistic)
        except ValueError as e:
            errs.append(f"osra.statistic: {e}")
        if errs:
            raise InvariantViolation(errs)
        return self


def _req(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{where} must be a mapping, got {type(mapping).__name__}")
    if key not in mapping:
        raise ScenarioError(f"missing key {key!r} in {where}")
    return mapping[key]


def _tau_from_yaml(value, where):
    if value is None or value == "unbounded":
        return UNBOUNDED
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(
            f"{where}.tau_ms must be a number or \"unbounded\", got {value!r}") from None
    return v


def _tau_to_yaml(tau_ms):
    return "unbounded" if math.isinf(tau_ms) else float(tau_ms)


def _traffic_from_dict(d, where) -> TrafficModel:
    kind = _req(d, "kind", where)
    known = {"kind", "mean_rate", "burst_len", "off_time_ms",
             "size_min", "size_max", "size_dist", "size_mean"}
    stray = set(d) - known
    if stray:
        raise ScenarioError(f"unknown key(s) {sorted(stray)} in {where}")
    return TrafficModel(
        kind=kind,
        mean_rate=float(_req(d, "mean_rate", where)),
        burst_len=None if d.get("burst_len") is None else float(d["burst_len"]),
        off_time_ms=None if d.get("off_time_ms") is None else float(d["off_time_ms"]),
        size_min=int(d.get("size_min", 20)),
        size_max=int(d.get("size_max", 65535)),
        size_dist=d.get("size_dist", "uniform"),
        size_mean=None if d.get("size_mean") is None else float(d["size_mean"]),
    )


def _traffic_to_dict(tm: TrafficModel) -> dict:
    out = {"kind": tm.kind, "mean_rate": float(tm.mean_rate)}
    if tm.burst_len is not None:
        out["burst_len"] = float(tm.burst_len)
    if tm.off_time_ms is not None:
        out["off_time_ms"] = float(tm.off_time_ms)
    out.update(size_min=int(tm.size_min), size_max=int(tm.size_max),
               size_dist=tm.size_dist)
    if tm.size_mean is not None:
        out["size_mean"] = float(tm.size_mean)
    return out


def _slice_from_dict(d) -> SliceSpec:
    sid = str(_req(d, "id", "slices[]"))
    where = f"slice {sid!r}"
    return SliceSpec(
        id=sid,
        requirement=QoeRequirement(
            tau_ms=_tau_from_yaml(_req(d, "tau_ms", where), where),
            rho=float(_req(d, "rho", where)),
        ),
        alpha_tau=float(_req(d, "alpha_tau", where)),
        alpha_rho=float(_req(d, "alpha_rho", where)),
        traffic=_traffic_from_dict(_req(d, "traffic", where), f"{where}.traffic"),
        demand_mi=float(_req(d, "demand_mi", where)),
        priority_rank=int(_req(d, "priority_rank", where)),
    )


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build an (already validated) ScenarioConfig from plain YAML data."""
    topo_d = _req(data, "topology", "scenario")
    topology = Topology(
        edges=tuple(_req(topo_d, "edges", "topology").items()),
        cores=tuple(_req(topo_d, "cores", "topology").items()),
        buffer_pkts=int(topo_d.get("buffer_pkts", 100)),
    )
    slices = tuple(_slice_from_dict(d) for d in _req(data, "slices", "scenario"))

    alloc_d = _req(data, "initial_alloc", "scenario")
    rows = {}
    for sid, row in alloc_d.items():
        rows[str(sid)] = AllocationVector(
            flows=np.array(_req(row, "flows", f"initial_alloc.{sid}"), dtype=float),
            cpu=np.array(_req(row, "cpu", f"initial_alloc.{sid}"), dtype=float),
        )
    try:
        alloc = AllocationMatrix.from_rows(rows)
    except InvariantViolation as e:
        raise ScenarioError(f"initial_alloc: {'; '.join(e.violations)}") from None

    sim_d = data.get("sim", {})
    sim = SimConfig(
        horizon_s=float(sim_d.get("horizon_s", 10.0)),
        warmup_s=float(sim_d.get("warmup_s", 1.0)),
        propagation_ms=float(sim_d.get("propagation_ms", 0.1)),
        seed=int(sim_d.get("seed", 0)),
    )

    osra_d = dict(data.get("osra", {}))
    eta = osra_d.get("eta", 0.05)
    if isinstance(eta, dict):
        eta = {str(k): float(v) for k, v in eta.items()}
    else:
        eta = float(eta)
    osra = OsraConfig(
        eta=eta,
        eta_schedule=osra_d.get("eta_schedule", "constant"),
        delta=float(osra_d.get("delta", 0.02)),
        probes=int(osra_d.get("probes", 10)),
        epsilon=float(osra_d.get("epsilon", 1e-3)),
        max_iters=int(osra_d.get("max_iters", 25)),
        transfer_rule=osra_d.get("transfer_rule", "algorithm1"),
        statistic=osra_d.get("statistic", "max"),
        penalty_exponent=int(osra_d.get("penalty_exponent", 2)),
        delay_ceiling_ms=float(osra_d.get("delay_ceiling_ms", 1e4)),
        donor_gradients=osra_d.get("donor_gradients", "analytic"),
    )

    sc = ScenarioConfig(
        name=str(data.get("name", "scenario")),
        slices=slices,
        topology=topology,
        initial_alloc=alloc,
        sim=sim,
        osra=osra,
        new_slice_id=str(_req(data, "new_slice", "scenario")),
    )
    return sc.validate()


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    return {
        "name": sc.name,
        "new_slice": sc.new_slice_id,
        "topology": {
            "edges": {e: float(c) for e, c in sc.topology.edges},
            "cores": {c: float(m) for c, m in sc.topology.cores},
            "buffer_pkts": int(sc.topology.buffer_pkts),
        },
        "slices": [
            {
                "id": s.id,
                "priority_rank": int(s.priority_rank),
                "tau_ms": _tau_to_yaml(s.requirement.tau_ms),
                "rho": float(s.requirement.rho),
                "alpha_tau": float(s.alpha_tau),
                "alpha_rho": float(s.alpha_rho),
                "demand_mi": float(s.demand_mi),
                "traffic": _traffic_to_dict(s.traffic),
            }
            for s in sc.slices
        ],
        "initial_alloc": {
            sid: {
                "flows": [float(x) for x in sc.initial_alloc.row(sid).flows],
                "cpu": [float(x) for x in sc.initial_alloc.row(sid).cpu],
            }
            for sid in sc.initial_alloc.slice_ids
        },
        "sim": {
            "horizon_s": float(sc.sim.horizon_s),
            "warmup_s": float(sc.sim.warmup_s),
            "propagation_ms": float(sc.sim.propagation_ms),
            "seed": int(sc.sim.seed),
        },
        "osra": {
            "eta": (
                {k: float(v) for k, v in sc.osra.eta.items()}
                if isinstance(sc.osra.eta, dict) else float(sc.osra.eta)
            ),
            "eta_schedule": sc.osra.eta_schedule,
            "delta": float(sc.osra.delta),
            "probes": int(sc.osra.probes),
            "epsilon": float(sc.osra.epsilon),
            "max_iters": int(sc.osra.max_iters),
            "transfer_rule": sc.osra.transfer_rule,
            "statistic": sc.osra.statistic,
            "penalty_exponent": int(sc.osra.penalty_exponent),
            "delay_ceiling_ms": float(sc.osra.delay_ceiling_ms),
            "donor_gradients": sc.osra.donor_gradients,
        },
    }


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return scenario_from_dict(data)


def save_scenario(sc: ScenarioConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)


def with_overrides(sc: ScenarioConfig, **osra_fields) -> ScenarioConfig:
    """Copy a scenario with some algorithm knobs replaced (CLI flags)."""
    return replace(sc, osra=replace(sc.osra, **osra_fields)).validate()


def reference_scenario() -> ScenarioConfig:
    """The built-in three-slice hand-off scenario.

    Slice 1 is the new arrival: 2 ms / 99.9% with 5e4 MI per request.
    Slice 2 runs 5 ms / 95% at 8e4 MI; slice 3 is best-effort (unbounded
    delay, zero-loss target). The server has two 3e8 MIPS cores; packet
    sizes are uniform on [20, 65535] bytes. Remaining numbers (rates,
    burst shape, link capacity, starting split, algorithm knobs) are lab
    defaults, tuned so the hand-off needs roughly half the link and most
    of a core; they carry no outside meaning.
    """
    traffic = dict(kind="bursty-onoff", burst_len=8.0, off_time_ms=38.0,
                   size_min=20, size_max=65535)
    slices = (
        SliceSpec(
            id="slice1",
            requirement=QoeRequirement(tau_ms=2.0, rho=0.999),
            alpha_tau=3.0, alpha_rho=3.0,
            traffic=TrafficModel(mean_rate=200.0, **traffic),
            demand_mi=5e4, priority_rank=0,
        ),
        SliceSpec(
            id="slice2",
            requirement=QoeRequirement(tau_ms=5.0, rho=0.95),
            alpha_tau=1.0, alpha_rho=1.0,
            traffic=TrafficModel(mean_rate=150.0, **traffic),
            demand_mi=8e4, priority_rank=1,
        ),
        SliceSpec(
            id="slice3",
            requirement=QoeRequirement(tau_ms=UNBOUNDED, rho=1.0),
            alpha_tau=0.25, alpha_rho=0.5,
            traffic=TrafficModel(mean_rate=100.0, **traffic),
            demand_mi=6e4, priority_rank=2,
        ),
    )
    topology = Topology(edges=(("link", 2500.0),),
                        cores=(("core0", 3e8), ("core1", 3e8)),
                        buffer_pkts=100)
    alloc = AllocationMatrix.from_rows({
        "slice1": AllocationVector(np.array([0.04]), np.array([0.02, 0.02])),
        "slice2": AllocationVector(np.array([0.60]), np.array([0.55, 0.55])),
        "slice3": AllocationVector(np.array([0.36]), np.array([0.43, 0.43])),
    })
    sc = ScenarioConfig(
        name="reference",
        slices=slices,
        topology=topology,
        initial_alloc=alloc,
        sim=SimConfig(horizon_s=10.0, warmup_s=1.0, propagation_ms=0.1, seed=0),
        osra=OsraConfig(
            eta=0.06, eta_schedule="constant", delta=0.02, probes=10,
            epsilon=0.05, max_iters=15, transfer_rule="algorithm1",
            statistic="p99", penalty_exponent=1, delay_ceiling_ms=250.0,
            donor_gradients="analytic",
        ),
        new_slice_id="slice1",
    )
    return sc.validate()
