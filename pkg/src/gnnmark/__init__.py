"""Backdoor-style watermarking, ownership verification and robustness checks for GNNs."""

__version__ = "0.1.0"
