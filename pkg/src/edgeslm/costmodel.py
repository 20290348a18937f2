"""Analytical FLOPs / memory / latency estimator for transformer inference.

All counts are computed in exact integer arithmetic; the only division is
the final latency (FLOPs over sustained throughput). Displayed MB means
10**6 bytes and GFLOPs means 10**9 operations, matching the published
per-model arithmetic.

The estimator is compute-bound only: KV-cache, quantization, memory
bandwidth and energy are deliberately out of scope.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .registry import HardwareProfile, ModelProfile

MB = 10**6

# Python ints are arbitrary precision, but estimates beyond this bound mean a
# nonsensical workload and would break downstream consumers that assume 64-bit.
_COUNT_LIMIT = 2**63 - 1


class CostOverflowError(OverflowError):
    """A FLOP or byte count exceeded 64-bit range."""


def _checked(value: int, what: str) -> int:
    if value > _COUNT_LIMIT:
        raise CostOverflowError(f"{what} = {value} exceeds 64-bit integer range")
    return value


@dataclass(frozen=True)
class WorkloadSpec:
    batch_size: int = 8
    seq_length: int = 128
    bytes_per_scalar: int = 4
    runtime_overhead_bytes: int = 100 * MB

    def __post_init__(self):
        if self.batch_size < 1 or self.seq_length < 1:
            raise ValueError("batch_size and seq_length must be >= 1")
        if self.bytes_per_scalar not in (2, 4, 8):
            raise ValueError(f"bytes_per_scalar must be 2, 4 or 8, got {self.bytes_per_scalar}")
        if self.runtime_overhead_bytes < 0:
            raise ValueError("runtime_overhead_bytes must be >= 0")


@dataclass(frozen=True)
class CostReport:
    model: str
    attention_flops_per_layer: int
    feedforward_flops_per_layer: int
    total_flops: int
    weight_bytes: int
    input_bytes: int
    activation_bytes: int
    output_bytes: int
    ram_estimate_bytes: int
    latency_seconds: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class FeasibilityVerdict:
    fits_ram: bool
    keeps_up: dict[str, bool]
    limiting_factor: str  # "ram" | "throughput" | "none"


def attention_flops(seq_length: int, hidden_size: int, n_heads: int) -> int:
    """Self-attention cost per layer: 4 * S^2 * hidden * heads."""
    if min(seq_length, hidden_size, n_heads) < 1:
        raise ValueError("all arguments must be >= 1")
    return _checked(4 * seq_length * seq_length * hidden_size * n_heads, "attention FLOPs")


def feedforward_flops(seq_length: int, hidden_size: int) -> int:
    """Feedforward cost per layer: 8 * S * hidden^2."""
    if min(seq_length, hidden_size) < 1:
        raise ValueError("all arguments must be >= 1")
    return _checked(8 * seq_length * hidden_size * hidden_size, "feedforward FLOPs")


def total_flops(profile: ModelProfile, seq_length: int) -> int:
    """One forward pass: n_layers * (attention + feedforward) per-layer FLOPs."""
    if profile.n_layers == 0:
        return 0
    per_layer = attention_flops(seq_length, profile.hidden_size, profile.n_heads) + feedforward_flops(
        seq_length, profile.hidden_size
    )
    return _checked(profile.n_layers * per_layer, "total FLOPs")


def memory_components(profile: ModelProfile, workload: WorkloadSpec) -> tuple[int, int, int, int]:
    """(weight, input, activation, output) bytes for one batch."""
    b, s, fpa = workload.batch_size, workload.seq_length, workload.bytes_per_scalar
    weights = _checked(profile.n_params * fpa, "weight bytes")
    inputs = _checked(b * s * fpa, "input bytes")
    activations = _checked(b * s * profile.hidden_size * profile.n_layers * fpa, "activation bytes")
    outputs = _checked(b * s * profile.vocab_size * fpa, "output bytes")
    return weights, inputs, activations, outputs


def ram_estimate(profile: ModelProfile, workload: WorkloadSpec) -> int:
    """Component sum plus runtime overhead.

    Note: this derived sum does not match the separately published per-model
    RAM figures (residuals around +-100 MB with no stated reconciliation);
    both numbers are reported side by side rather than merged.
    """
    weights, inputs, activations, outputs = memory_components(profile, workload)
    return weights + inputs + activations + outputs + workload.runtime_overhead_bytes


def latency(flops: int, hardware: HardwareProfile) -> dict[str, float]:
    """Seconds per forward pass on each execution unit: FLOPs / throughput."""
    return {unit: flops / throughput for unit, throughput in hardware.execution_units}


def estimate(profile: ModelProfile, workload: WorkloadSpec, hardware: HardwareProfile) -> CostReport:
    att = attention_flops(workload.seq_length, profile.hidden_size, profile.n_heads)
    ff = feedforward_flops(workload.seq_length, profile.hidden_size)
    total = _checked(profile.n_layers * (att + ff), "total FLOPs")
    weights, inputs, activations, outputs = memory_components(profile, workload)
    return CostReport(
        model=profile.name,
        attention_flops_per_layer=att,
        feedforward_flops_per_layer=ff,
        total_flops=total,
        weight_bytes=weights,
        input_bytes=inputs,
        activation_bytes=activations,
        output_bytes=outputs,
        ram_estimate_bytes=weights + inputs + activations + outputs + workload.runtime_overhead_bytes,
        latency_seconds=latency(total, hardware),
    )


def feasibility(report: CostReport, hardware: HardwareProfile, arrival_interval: float) -> FeasibilityVerdict:
    if arrival_interval <= 0:
        raise ValueError("arrival_interval must be > 0")
    fits_ram = report.ram_estimate_bytes <= hardware.ram_capacity
    keeps_up = {unit: report.latency_seconds.get(unit, float("inf")) <= arrival_interval
                for unit, _ in hardware.execution_units}
    if not fits_ram:
        limiting = "ram"
    elif not any(keeps_up.values()):
        limiting = "throughput"
    else:
        limiting = "none"
    return FeasibilityVerdict(fits_ram=fits_ram, keeps_up=keeps_up, limiting_factor=limiting)


def _fmt_latency(seconds: float) -> str:
    if seconds >= 1.0:
        return f"{seconds:.2f}s"
    return f"{seconds * 1000:.2f}ms"


def render_table(reports: list[CostReport], fmt: str = "markdown") -> str:
    """Render estimates in the published column order (CSV or Markdown)."""
    latency_units: list[str] = []
    for rep in reports:
        for unit in rep.latency_seconds:
            if unit not in latency_units:
                latency_units.append(unit)
    headers = ["Model", "Total FLOPs (G)", "Weights (MB)", "Input (B)",
               "Activations (MB)", "Output (MB)", "RAM est. (MB)"]
    headers += [f"Latency {u}" for u in latency_units]
    rows = []
    for rep in reports:
        row = [
            rep.model,
            f"{rep.total_flops / 1e9:.2f}",
            f"{rep.weight_bytes / MB:.2f}",
            f"{rep.input_bytes:.2f}",
            f"{rep.activation_bytes / MB:.2f}",
            f"{rep.output_bytes / MB:.2f}",
            f"{rep.ram_estimate_bytes / MB:.2f}",
        ]
        for u in latency_units:
            row.append(_fmt_latency(rep.latency_seconds[u]) if u in rep.latency_seconds else "---")
        rows.append(row)

    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(headers) + "\n")
        for row in rows:
            out.write(",".join(row) + "\n")
        return out.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(headers) + " |",
                 "|" + "|".join("---" for _ in headers) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
