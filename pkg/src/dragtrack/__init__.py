"""Drag-tracking entry guidance simulator: saturated Nussbaum-gain output
feedback with a high-gain observer, plus Monte Carlo campaign tooling."""

__version__ = "0.1.0"
