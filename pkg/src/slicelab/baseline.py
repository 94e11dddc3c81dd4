"""Sizing from stationary queueing formulas, and the audit that exposes it.

The sizing half answers "how much resource does this slice need?" with the
textbook recipe: split the delay target between the network and server
stages, give each stage the service rate a single-server Markov queue
needs to meet its share of the mean sojourn, and convert rates to
fractions. By construction the analytic mean delay at the returned
allocation equals the target exactly (when nothing clamps).

The audit half replays any allocation through the bursty simulator and
counts what the mean-based sizing ignores: requests whose end-to-end
delay exceeds the bound. Sizing for the mean under bursty arrivals is
precisely the failure mode the reconfiguration loop exists to fix, so the
two halves are meant to be run side by side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import AllocationMatrix, AllocationVector, SliceSpec, Topology
from .simulator import SimConfig, run_sim

STABILITY_MARGIN = 0.1  # rate headroom used when there is no delay bound


class InfeasibleDemand(ValueError):
    pass


def mm1_demand(spec: SliceSpec, topology: Topology, budget_split: float = 0.5,
               clamp: bool = True) -> tuple[AllocationVector, bool]:
    """Size one slice from mean-delay formulas.

    The delay bound splits as budget_split to the network (spread evenly
    over edges) and the rest to the server; each stage gets the service
    rate mu = lam + 1/W for its sojourn share W. Unbounded delay sizes for
    stability only (10% headroom). Required fractions above 1 either raise
    InfeasibleDemand (clamp=False) or clip, returning infeasible=True.
    """
    if not 0.0 < budget_split < 1.0:
        raise ValueError(f"budget_split must be in (0, 1), got {budget_split}")
    lam = spec.traffic.mean_rate
    mean_size = spec.traffic.mean_size_bytes()

    if spec.requirement.bounded:
        w_net_s = (spec.requirement.tau_ms / 1e3) * budget_split / topology.n_edges
        w_srv_s = (spec.requirement.tau_ms / 1e3) * (1.0 - budget_split)
        mu_edge = lam + 1.0 / w_net_s
        mu_srv = lam + 1.0 / w_srv_s
    else:
        mu_edge = mu_srv = lam * (1.0 + STABILITY_MARGIN)

    flows = mu_edge * 8.0 * mean_size / topology.edge_bps()
    cpu_total_ips = mu_srv * spec.demand_mi
    cpu = np.full(topology.n_cores, cpu_total_ips / topology.core_mips().sum())

    worst = max(flows.max(), cpu.max())
    infeasible = bool(worst > 1.0)
    if infeasible and not clamp:
        raise InfeasibleDemand(
            f"slice {spec.id!r} needs fraction {worst:.4f} > 1 of some resource")
    return AllocationVector(np.minimum(flows, 1.0), np.minimum(cpu, 1.0)), infeasible


def size_all(slices, topology: Topology, budget_split: float = 0.5,
             ) -> tuple[AllocationMatrix, dict[str, bool]]:
    """Size every slice independently and assemble the joint allocation.

    Raises InfeasibleDemand if the independently-sized rows overrun a
    resource jointly; per-slice clamping is reported in the flags map.
    """
    rows, flags = {}, {}
    for s in slices:
        rows[s.id], flags[s.id] = mm1_demand(s, topology, budget_split)
    flows = np.array([rows[s.id].flows for s in slices])
    cpu = np.array([rows[s.id].cpu for s in slices])
    for name, arr in (("edge", flows), ("core", cpu)):
        sums = arr.sum(axis=0)
        if sums.max() > 1.0:
            raise InfeasibleDemand(
                f"sized rows jointly need {sums.max():.4f} > 1 of {name} "
                f"{int(sums.argmax())}")
    return AllocationMatrix(tuple(s.id for s in slices), flows, cpu), flags


def size_all_clamped(slices, topology: Topology, budget_split: float = 0.5,
                     ) -> tuple[AllocationMatrix, dict[str, bool]]:
    """Like size_all, but always returns a feasible allocation.

    A joint overrun of some resource column is scaled back to a sum of 1,
    and every slice on that column gets its infeasible flag set. For
    reports that must proceed even when the sizing cannot be honored.
    """
    rows, flags = {}, {}
    for s in slices:
        rows[s.id], flags[s.id] = mm1_demand(s, topology, budget_split)
    flows = np.array([rows[s.id].flows for s in slices])
    cpu = np.array([rows[s.id].cpu for s in slices])
    for arr in (flows, cpu):
        sums = arr.sum(axis=0)
        over = sums > 1.0
        if over.any():
            arr[:, over] /= sums[over]
            for s in slices:
                flags[s.id] = True
    return AllocationMatrix(tuple(s.id for s in slices), flows, cpu), flags


@dataclass(frozen=True)
class SliceAudit:
    """Pooled-over-seeds QoE audit of one slice under one allocation."""

    slice_id: str
    offered: int
    success: int
    violation_fraction: float  # successful requests with delay > bound
    mean_delay_ms: float
    max_delay_ms: float
    throughput: float
    empty: bool                # no successful request observed
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    delays_ms: np.ndarray      # pooled successful-request delays


def audit_allocation(slices, topology: Topology, alloc: AllocationMatrix,
                     sim_config: SimConfig, seeds, hist_bins=40) -> dict:
    """Measure every slice's delivered QoE under `alloc`, pooled over seeds.

    The violation fraction counts successful requests whose delay exceeds
    the slice's bound, out of all successful requests; an unbounded slice
    scores 0. No successes at all is reported as 0 with empty=True.
    hist_bins may be a count or explicit edges (shared edges let two
    allocations be compared bin by bin).
    """
    by_id = {s.id: s for s in slices}
    delays = {s.id: [] for s in slices}
    offered = {s.id: 0 for s in slices}
    success = {s.id: 0 for s in slices}
    for seed in seeds:
        results = run_sim(slices, topology, alloc, sim_config, seed=seed)
        for sid, res in results.items():
            delays[sid].append(res.delays_ms)
            offered[sid] += res.offered
            success[sid] += res.success

    report = {}
    for sid in delays:
        pooled = np.concatenate(delays[sid]) if delays[sid] else np.array([])
        empty = pooled.size == 0
        req = by_id[sid].requirement
        if empty:
            viol, mean_d, max_d = 0.0, float("nan"), float("nan")
        else:
            viol = float(np.mean(pooled > req.tau_ms)) if req.bounded else 0.0
            mean_d = float(pooled.mean())
            max_d = float(pooled.max())
        counts, edges = np.histogram(pooled, bins=hist_bins)
        report[sid] = SliceAudit(
            slice_id=sid, offered=offered[sid], success=success[sid],
            violation_fraction=viol, mean_delay_ms=mean_d, max_delay_ms=max_d,
            throughput=success[sid] / offered[sid] if offered[sid] else 1.0,
            empty=empty, hist_counts=counts, hist_edges=edges, delays_ms=pooled)
    return report


def evaluate_baseline(slices, topology: Topology, sim_config: SimConfig, seeds,
                      budget_split: float = 0.5, hist_bins=40):
    """Size every slice analytically, then audit that allocation as-is.

    Returns (report, allocation, clamp flags).
    """
    alloc, flags = size_all(slices, topology, budget_split)
    report = audit_allocation(slices, topology, alloc, sim_config, seeds,
                              hist_bins=hist_bins)
    return report, alloc, flags
