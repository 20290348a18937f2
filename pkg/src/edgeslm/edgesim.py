"""Discrete-event simulation of an edge device classifying arriving packets.

A source emits one packet per interval into a FIFO single-server queue whose
service time comes either from the analytical cost model or from timing the
built-in classifier. Analytical runs are a pure event-loop computation with
no wall-clock dependence; an optional real-time mode runs two concurrent
workers (classifier and primary task) against actual wall-clock arrivals.
"""

from __future__ import annotations

import bisect
import math
import queue
import threading
import time
from dataclasses import dataclass, field

from . import costmodel, learner
from .registry import HardwareProfile, ModelProfile


@dataclass(frozen=True)
class AnalyticalSource:
    model: ModelProfile
    hardware: HardwareProfile
    unit: str
    workload: costmodel.WorkloadSpec = costmodel.WorkloadSpec()


@dataclass(frozen=True)
class MeasuredSource:
    state: learner.ClassifierState
    sample_texts: tuple[str, ...] = ()
    n_timings: int = 32


@dataclass(frozen=True)
class SimConfig:
    latency_source: AnalyticalSource | MeasuredSource
    arrival_interval: float = 1.0
    duration: float = 60.0
    queue_capacity: int | None = None  # None = unbounded
    primary_task_share: float = 0.0

    def __post_init__(self):
        if self.arrival_interval <= 0:
            raise ValueError("arrival_interval must be > 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if not (0.0 <= self.primary_task_share < 1.0):
            raise ValueError("primary_task_share must lie in [0, 1)")


@dataclass(frozen=True)
class SimReport:
    arrivals: int
    completed: int
    dropped: int
    final_backlog: int
    max_backlog: int
    mean_sojourn: float
    utilization: float
    service_time_used: float
    error: str | None = None


def service_time(config: SimConfig) -> float:
    """Seconds per classification after reserving the primary-task share."""
    src = config.latency_source
    if isinstance(src, AnalyticalSource):
        total = costmodel.total_flops(src.model, src.workload.seq_length)
        per_unit = costmodel.latency(total, src.hardware)
        if src.unit not in per_unit:
            raise ValueError(f"hardware {src.hardware.name!r} has no unit {src.unit!r}")
        base = per_unit[src.unit]
    else:
        texts = list(src.sample_texts) or [f"pkt={i} proto=tcp len={64 + i}" for i in range(src.n_timings)]
        while len(texts) < src.n_timings:
            texts = texts + texts
        base = learner.time_predictions(src.state, texts[:src.n_timings])
    return base / (1.0 - config.primary_task_share)


def run(config: SimConfig, service: float | None = None) -> tuple[SimReport, list[tuple[float, int]]]:
    """Deterministic event loop; returns the report and the backlog trajectory
    sampled at every event time."""
    s = service_time(config) if service is None else service
    interval = config.arrival_interval
    arrivals = [k * interval for k in range(int(math.ceil(config.duration / interval)))
                ] if config.duration > 0 else []
    # Guard against float edge cases: arrivals strictly before duration.
    arrivals = [t for t in arrivals if t < config.duration]

    n_arrivals = len(arrivals)
    completed = 0
    dropped = 0
    max_backlog = 0
    busy_time = 0.0
    sojourn_sum = 0.0
    trajectory: list[tuple[float, int]] = []

    # Deterministic service + FIFO queue means departures follow directly:
    # start_n = max(arrival_n, finish_{n-1}).
    finish_prev = 0.0
    accepted: list[tuple[float, float]] = []  # (arrival, finish), both sorted
    acc_arrivals: list[float] = []
    finishes: list[float] = []
    for t in arrivals:
        in_system = bisect.bisect_right(acc_arrivals, t) - bisect.bisect_right(finishes, t)
        if config.queue_capacity is not None and in_system >= config.queue_capacity:
            dropped += 1
            continue
        start = max(t, finish_prev)
        finish = start + s
        accepted.append((t, finish))
        acc_arrivals.append(t)
        finishes.append(finish)
        finish_prev = finish

    event_times = sorted({t for t in arrivals} | {f for f in finishes if f <= config.duration})
    for t in event_times:
        in_system = bisect.bisect_right(acc_arrivals, t) - bisect.bisect_right(finishes, t)
        max_backlog = max(max_backlog, in_system)
        trajectory.append((t, in_system))

    for a, f in accepted:
        if f <= config.duration:
            completed += 1
            sojourn_sum += f - a
            busy_time += s
        else:
            # partially served or waiting at the horizon
            start = f - s
            if start < config.duration:
                busy_time += config.duration - max(start, 0.0)

    final_backlog = n_arrivals - dropped - completed
    mean_sojourn = sojourn_sum / completed if completed else 0.0
    utilization = min(1.0, busy_time / config.duration) if config.duration > 0 else 0.0
    report = SimReport(arrivals=n_arrivals, completed=completed, dropped=dropped,
                       final_backlog=final_backlog, max_backlog=max_backlog,
                       mean_sojourn=mean_sojourn, utilization=utilization,
                       service_time_used=s)
    return report, trajectory


def lindley_waits(service: float, interval: float, n: int) -> list[float]:
    """Waiting times for the first n jobs: W0 = 0, W_n = max(0, W_{n-1} + S - interval)."""
    waits = [0.0]
    for _ in range(1, n):
        waits.append(max(0.0, waits[-1] + service - interval))
    return waits[:n]


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    rho: float


def stability(config: SimConfig, service: float | None = None) -> StabilityVerdict:
    s = service_time(config) if service is None else service
    rho = s / config.arrival_interval
    return StabilityVerdict(stable=rho <= 1.0, rho=rho)


def export_trajectory_csv(trajectory: list[tuple[float, int]]) -> str:
    lines = ["time,backlog"]
    for t, b in trajectory:
        lines.append(f"{t:.6f},{b}")
    return "\n".join(lines) + "\n"


def run_realtime(config: SimConfig, primary_task=None) -> SimReport:
    """Two concurrent workers against wall-clock arrivals (measured mode only).

    One worker classifies queued packets, the other repeatedly runs the
    device's primary task (a no-op by default). Timing-noisy by nature, so
    callers should assert only structural invariants.
    """
    src = config.latency_source
    if not isinstance(src, MeasuredSource):
        raise ValueError("run_realtime requires a measured latency source")

    packets: queue.Queue = queue.Queue() if config.queue_capacity is None else queue.Queue(
        maxsize=config.queue_capacity)
    stop = threading.Event()
    stats = {"arrivals": 0, "completed": 0, "dropped": 0, "sojourn": 0.0,
             "busy": 0.0, "max_backlog": 0, "error": None}
    lock = threading.Lock()

    sample = list(src.sample_texts) or ["pkt=0 proto=tcp len=64"]

    def classifier_worker():
        while not stop.is_set() or not packets.empty():
            try:
                arrived_at, text = packets.get(timeout=0.05)
            except queue.Empty:
                continue
            t0 = time.perf_counter()
            try:
                learner.predict(src.state, text)
            except Exception as exc:  # noqa: BLE001 - reported, not raised
                with lock:
                    stats["error"] = f"classifier failure: {exc}"
                return
            t1 = time.perf_counter()
            with lock:
                stats["completed"] += 1
                stats["sojourn"] += t1 - arrived_at
                stats["busy"] += t1 - t0

    def primary_worker():
        while not stop.is_set():
            if primary_task is not None:
                primary_task()
            else:
                time.sleep(0.01)

    t_start = time.perf_counter()
    workers = [threading.Thread(target=classifier_worker),
               threading.Thread(target=primary_worker)]
    for w in workers:
        w.start()
    try:
        k = 0
        while True:
            now = time.perf_counter() - t_start
            due = k * config.arrival_interval
            if due >= config.duration:
                break
            if now < due:
                time.sleep(min(due - now, 0.05))
                continue
            text = sample[k % len(sample)]
            with lock:
                stats["arrivals"] += 1
                backlog = packets.qsize() + 1
                stats["max_backlog"] = max(stats["max_backlog"], backlog)
            try:
                packets.put_nowait((time.perf_counter(), text))
            except queue.Full:
                with lock:
                    stats["dropped"] += 1
            k += 1
    finally:
        stop.set()
        for w in workers:
            w.join(timeout=10.0)

    elapsed = max(time.perf_counter() - t_start, 1e-9)
    with lock:
        completed = stats["completed"]
        final_backlog = stats["arrivals"] - stats["dropped"] - completed
        return SimReport(
            arrivals=stats["arrivals"], completed=completed, dropped=stats["dropped"],
            final_backlog=final_backlog, max_backlog=stats["max_backlog"],
            mean_sojourn=stats["sojourn"] / completed if completed else 0.0,
            utilization=min(1.0, stats["busy"] / elapsed),
            service_time_used=stats["busy"] / completed if completed else 0.0,
            error=stats["error"])
