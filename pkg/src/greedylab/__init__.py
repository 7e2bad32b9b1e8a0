"""Greedy approximation constants and renormings on finite-dimensional unconditional bases."""
