"""Seeded random streams shared by splitting and center sampling.

Every random draw in the package goes through :func:`make_rng`, which builds a
NumPy ``Generator`` on the PCG64 bit generator (64-bit output, 128-bit state).
The same integer seed therefore yields the same split and the same centers on
every run and platform with the same NumPy version.
"""
import numpy as np


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
