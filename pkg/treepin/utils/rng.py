"""Counter-based random numbers: every node, replica and grid cell gets its own stream.

A value is a pure function of (seed, domain, words...). Words are absorbed one at a
time with the SplitMix64 finalizer, and the finalizer is applied once more at the end:

    state = seed
    for w in (domain, *words):
        state = fmix64((state ^ w) + GOLDEN)
    out = fmix64(state)

All arithmetic is modulo 2**64, so the Python-int path and the numpy uint64 path
produce the same bits on every platform.
"""
from typing import Union

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB

# Domain separation constants
DOMAIN_NODE = 0x6E6F6465
DOMAIN_REPLICA = 0x7265706C
DOMAIN_CELL = 0x63656C6C

_U = np.uint64
_SCALE = 2.0 ** -52


def fmix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def _fmix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(_C1)
    z = (z ^ (z >> _U(27))) * _U(_C2)
    return z ^ (z >> _U(31))


def mix(seed: int, counter: int, domain: int = DOMAIN_REPLICA) -> int:
    """Derive a child seed from (seed, counter) within a domain."""
    state = seed & MASK64
    for word in (domain, counter):
        state = fmix64(((state ^ (word & MASK64)) + GOLDEN) & MASK64)
    return fmix64(state)


def replica_seed(master_seed: int, replica: int) -> int:
    return mix(master_seed, replica, DOMAIN_REPLICA)


def cell_seed(master_seed: int, cell: int) -> int:
    return mix(master_seed, cell, DOMAIN_CELL)


def hash_nodes(seed: int, generation: int, indices: Union[np.ndarray, int]) -> np.ndarray:
    """64-bit hashes for the nodes (generation, j) of an index array."""
    idx = np.atleast_1d(np.asarray(indices, dtype=np.uint64))
    state = np.full(idx.shape, seed & MASK64, dtype=np.uint64)
    for word in (DOMAIN_NODE, generation):
        state = _fmix64_array((state ^ _U(word & MASK64)) + _U(GOLDEN))
    state = _fmix64_array((state ^ idx) + _U(GOLDEN))
    return _fmix64_array(state)


def uniforms(seed: int, generation: int, indices: Union[np.ndarray, int]) -> np.ndarray:
    """Uniforms in (0, 1) for the nodes (generation, j); endpoints are never produced."""
    bits = hash_nodes(seed, generation, indices) >> _U(12)
    return (bits.astype(np.float64) + 0.5) * _SCALE


def node_uniform_scalar(seed: int, generation: int, index: int) -> float:
    """Pure-Python twin of `uniforms` for a single node."""
    state = seed & MASK64
    for word in (DOMAIN_NODE, generation, index):
        state = fmix64(((state ^ (word & MASK64)) + GOLDEN) & MASK64)
    return ((fmix64(state) >> 12) + 0.5) * _SCALE
