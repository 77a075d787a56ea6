"""Gated fast-weight programmers with single-qubit re-uploading activations.

A numpy-only sequence-modeling engine: tape-based reverse-mode autodiff,
exact single-qubit activation simulation, gated fast-parameter recursions
with parallel-scan evaluation, deterministic benchmark generators, and a
training/evaluation harness with a CLI front end.
"""

__version__ = "0.1.0"
