"""Feasibility and benchmarking toolkit for SLM-based malware detection at the edge."""

__version__ = "0.1.0"
