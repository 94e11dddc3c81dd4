"""Two-stage tandem-queue simulator for sliced traffic.

Each slice owns a dedicated FIFO queue at every link edge, draining at its
bandwidth share f*B with a finite packet buffer, followed by an unbounded
FIFO server queue draining at its CPU share sum(phi_c * MIPS_c). Slices
never share a queue, so each slice's pipeline is simulated independently
in arrival order; a departure at time t frees its buffer slot before an
arrival at the same instant claims one.

A request's E2E delay is (service completion - creation) + propagation.
Requests created during the warmup window are simulated but excluded from
statistics. Every offered request is either served or dropped: the run
drains all queues after the horizon, and slices with a zero-rate stage
count their stranded requests as dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import AllocationMatrix, QoeSample, SliceSpec, Topology, TrafficModel


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Run-level knobs: horizon/warmup (s), propagation (ms), default seed."""

    horizon_s: float = 10.0
    warmup_s: float = 1.0
    propagation_ms: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (self.horizon_s > 0):
            raise ValueError(f"horizon_s must be > 0, got {self.horizon_s}")
        if not (0 <= self.warmup_s < self.horizon_s):
            raise ValueError(
                f"need 0 <= warmup_s < horizon_s, got {self.warmup_s} vs {self.horizon_s}"
            )
        if self.propagation_ms < 0:
            raise ValueError("propagation_ms must be >= 0")


@dataclass
class SliceRunResult:
    """Per-slice outcome of one run: post-warmup counters and raw delays."""

    delays_ms: np.ndarray       # E2E delays of successful post-warmup requests
    offered: int
    success: int
    dropped: int
    created_s: np.ndarray | None = None   # per-packet trace (optional)
    served: np.ndarray | None = None      # bool mask aligned with created_s


def slice_rng(seed: int, slice_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(slice_index)]))


def generate_traffic(model: TrafficModel, horizon_s: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Arrival times (s, sorted) and packet sizes (bytes) over [0, horizon)."""
    if model.kind == "poisson":
        arrivals = _poisson_arrivals(model.mean_rate, horizon_s, rng)
    else:
        arrivals = _onoff_arrivals(model, horizon_s, rng)
    sizes = _draw_sizes(model, arrivals.size, rng)
    return arrivals, sizes


def _poisson_arrivals(rate, horizon_s, rng):
    chunks = []
    t = 0.0
    n = max(64, int(rate * horizon_s * 1.2) + 16)
    while t < horizon_s:
        gaps = rng.exponential(1.0 / rate, size=n)
        arr = t + np.cumsum(gaps)
        chunks.append(arr)
        t = arr[-1]
    arrivals = np.concatenate(chunks)
    return arrivals[arrivals < horizon_s]


def _onoff_arrivals(model, horizon_s, rng):
    gap = model.intra_burst_gap_s()
    p = 1.0 / model.burst_len
    off_mean = model.off_time_ms / 1000.0
    starts = []
    counts = []
    t = rng.exponential(off_mean) if off_mean > 0 else 0.0
    while t < horizon_s:
        n = int(rng.geometric(p))
        starts.append(t)
        counts.append(n)
        t += n * gap + (rng.exponential(off_mean) if off_mean > 0 else 0.0)
        if off_mean == 0.0 and gap == 0.0:
            raise SimulationError("on/off source with zero gap and zero off time cannot advance")
    if not starts:
        return np.empty(0)
    starts = np.array(starts)
    counts = np.array(counts)
    # expand each burst into gap-spaced packets
    within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    arrivals = np.repeat(starts, counts) + within * gap
    return arrivals[arrivals < horizon_s]


def _draw_sizes(model, n, rng):
    if model.size_dist == "exponential":
        mean = model.mean_size_bytes()
        return np.clip(rng.exponential(mean, size=n), model.size_min, model.size_max)
    return rng.integers(model.size_min, model.size_max + 1, size=n).astype(float)


def simulate_pipeline(arrivals, sizes_bytes, link_rates_bps, buffer_pkts,
                      service_rate_ips, demand_mi, propagation_ms):
    """Push one slice's packets through its link queues and server queue.

    arrivals must be sorted. Returns (delays_ms of served packets in
    arrival order of survivors, served_mask over all offered packets).
    Zero-rate stages strand everything behind them (served_mask False).
    """
    arrivals = np.asarray(arrivals, dtype=float)
    n = len(arrivals)
    served_mask = np.ones(n, dtype=bool)
    times = arrivals.tolist()
    sizes = (np.asarray(sizes_bytes, dtype=float) * 8.0).tolist()  # bits
    created = arrivals.tolist()
    idx = list(range(n))

    # link stages in series, each with its own finite buffer
    for rate in link_rates_bps:
        if rate <= 0.0:
            for i in idx:
                served_mask[i] = False
            times, sizes, created, idx = [], [], [], []
            break
        out_times = []
        head = 0
        prev_out = -math.inf
        keep_t, keep_s, keep_c, keep_i = [], [], [], []
        for t, bits, c, i in zip(times, sizes, created, idx):
            while head < len(out_times) and out_times[head] <= t:
                head += 1
            if len(out_times) - head >= buffer_pkts:
                served_mask[i] = False
                continue
            start = t if t > prev_out else prev_out
            prev_out = start + bits / rate
            out_times.append(prev_out)
            keep_t.append(prev_out)
            keep_s.append(bits)
            keep_c.append(c)
            keep_i.append(i)
        times, sizes, created, idx = keep_t, keep_s, keep_c, keep_i

    # server stage: unbounded FIFO, deterministic per-request service time
    if service_rate_ips <= 0.0:
        for i in idx:
            served_mask[i] = False
        return np.empty(0), served_mask

    proc = demand_mi / service_rate_ips
    prop_s = propagation_ms / 1000.0
    delays = []
    prev_end = -math.inf
    for t, c in zip(times, created):
        start = t if t > prev_end else prev_end
        prev_end = start + proc
        delays.append((prev_end - c + prop_s) * 1000.0)
    return np.array(delays), served_mask


def run_sim(slices, topology: Topology, alloc: AllocationMatrix, config: SimConfig,
            seed: int | None = None, only_slice: str | None = None,
            keep_trace: bool = False, row_override=None) -> dict:
    """Simulate every slice (or one) at the given allocation.

    Returns {slice_id: SliceRunResult}. Identical inputs and seed give
    identical results; each slice draws from its own seeded stream, so a
    slice's traffic does not depend on which other slices are simulated.
    row_override, a (slice_id, AllocationVector) pair, answers what-if
    queries about one slice's row without touching the joint allocation
    (slices are isolated, so no other slice could notice anyway).
    """
    if seed is None:
        seed = config.seed
    edge_bps = topology.edge_bps()
    core_mips = topology.core_mips()
    results = {}
    for k, spec in enumerate(slices):
        if only_slice is not None and spec.id != only_slice:
            continue
        if row_override is not None and spec.id == row_override[0]:
            row = row_override[1]
        else:
            row = alloc.row(spec.id)
        rng = slice_rng(seed, k)
        arrivals, sizes = generate_traffic(spec.traffic, config.horizon_s, rng)
        link_rates = row.flows * edge_bps
        cpu_rate = float(row.cpu @ core_mips)
        delays, served = simulate_pipeline(
            arrivals, sizes, link_rates, topology.buffer_pkts,
            cpu_rate, spec.demand_mi, config.propagation_ms,
        )
        keep = arrivals >= config.warmup_s
        offered = int(keep.sum())
        kept_served = served & keep
        success = int(kept_served.sum())
        served_delays = delays[keep[served]] if delays.size else delays
        if success + int((~served & keep).sum()) != offered:
            raise SimulationError("request accounting lost packets")
        results[spec.id] = SliceRunResult(
            delays_ms=served_delays,
            offered=offered,
            success=success,
            dropped=offered - success,
            created_s=arrivals if keep_trace else None,
            served=served if keep_trace else None,
        )
    return results


def delay_statistic(delays_ms: np.ndarray, statistic: str) -> float:
    """Reduce raw delays to one number: "max", "mean", or "pNN" percentile.

    Percentile is nearest-rank. Empty input yields inf (no request
    survived, the unbounded marker).
    """
    if delays_ms.size == 0:
        return math.inf
    if statistic == "max":
        return float(delays_ms.max())
    if statistic == "mean":
        return float(delays_ms.mean())
    if statistic.startswith("p"):
        p = float(statistic[1:])
        if not (0 < p <= 100):
            raise ValueError(f"percentile out of (0,100]: {statistic}")
        k = max(1, math.ceil(p / 100.0 * delays_ms.size))
        return float(np.sort(delays_ms)[k - 1])
    raise ValueError(f"unknown statistic {statistic!r}")


def summarize(results: dict, statistic: str = "max", seed: int | None = None,
              keep_raw: bool = False) -> dict:
    """Collapse SliceRunResults into QoeSamples under the chosen statistic."""
    samples = {}
    for sid, r in results.items():
        throughput = r.success / r.offered if r.offered else 1.0
        samples[sid] = QoeSample(
            delay_stat_ms=delay_statistic(r.delays_ms, statistic),
            throughput=throughput,
            n_requests=r.offered,
            raw_delays_ms=r.delays_ms if keep_raw else None,
            seed=seed,
        )
    return samples


def write_packet_trace(path, slices, topology, alloc, config, seed):
    """Dump one per-request CSV row: slice, created_s, served flag, delay_ms."""
    import csv

    results = run_sim(slices, topology, alloc, config, seed=seed, keep_trace=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slice", "created_s", "served", "delay_ms"])
        for spec in slices:
            r = results[spec.id]
            it = iter(r.delays_ms)
            keep = r.created_s >= config.warmup_s
            for t, ok, kept in zip(r.created_s, r.served, keep):
                d = next(it) if ok and kept else ""
                if kept:
                    w.writerow([spec.id, f"{t:.9f}", int(ok), d])
    return path
