"""Systolic invariants of the two-circle metrics g_j on T^2 x I."""
from __future__ import annotations

__version__ = "0.1.0"
