"""Exact quenched partition functions on a seeded d-ary tree.

Disorder is never stored. Every node value is re-derived from (seed, address), so a
depth-n tree costs O(d^n) work but only one vectorized block of memory at a time.
Subtrees are evaluated bottom-up in blocks of at most ``config.block_size`` leaves;
larger subtrees are split into chunks in a fixed order, and the only place a thread
pool is used is the outermost chunk loop, so results are bit-identical for every
thread count.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional

import numpy as np
from scipy.special import logsumexp

from .config import config
from .disorder import has_finite_support, sample_generation, support
from .exceptions import (
    ContinuousDisorderError,
    DepthTooLargeError,
    IndexOutOfRangeError,
    InvalidParameterError,
    SupportTooLargeError,
    WrongModelKindError,
)
from .models import (
    ModelSpec,
    NoDefect,
    Realization,
    STDecomposition,
    SubtreeConstant,
)

logger = logging.getLogger(__name__)

MAX_ASSIGNMENTS = 1_000_000
_ORACLE_CHUNK = 1 << 14

Mapper = Callable[[Callable, List], List]


# ---------------------------------------------------------------------------
# Node values
# ---------------------------------------------------------------------------

def in_defect_mask(d: int, d1: int, generation: int, indices: np.ndarray) -> np.ndarray:
    """True where node (generation, j) lies in the leftmost d1-ary subtree."""
    m = np.asarray(indices, dtype=np.int64) - 1
    inside = np.ones(m.shape, dtype=bool)
    for _ in range(generation):
        inside &= (m % d) < d1
        m //= d
    return inside


def node_values(model: ModelSpec, seed: int, generation: int, indices: np.ndarray) -> np.ndarray:
    """V(generation, j) for an index array, defect law applied inside the defect subtree."""
    bulk = sample_generation(model.bulk, seed, generation, indices)
    if isinstance(model.defect, NoDefect):
        return bulk
    inside = in_defect_mask(model.d, model.d1, generation, indices)
    if isinstance(model.defect, SubtreeConstant):
        return np.where(inside, model.u, bulk)
    return np.where(inside, bulk + model.u, bulk)


def _descendants(d: int, indices: np.ndarray, depth: int) -> np.ndarray:
    """Indices `depth` generations below each node, root-major and left to right."""
    width = d ** depth
    return ((indices - 1)[:, None] * width + np.arange(1, width + 1, dtype=np.int64)[None, :]).ravel()


def check_budget(d: int, n: int, limit: int, what: str) -> None:
    if d ** n > limit:
        raise DepthTooLargeError(f"{what} would visit d^n = {d}^{n} nodes (budget {limit})")


def _sequential_map(fn: Callable, items: List) -> List:
    return [fn(item) for item in items]


# ---------------------------------------------------------------------------
# Recursive engine
# ---------------------------------------------------------------------------

class _SubtreeEvaluator:
    """log Z^{[x]}_m for arrays of nodes x of one generation, by blocks."""

    def __init__(self, model: ModelSpec, seed: int, beta: float, block_size: int):
        self.model = model
        self.seed = seed
        self.beta = beta
        self.d = model.d
        self.block_size = max(block_size, self.d)

    def weights(self, generation: int, indices: np.ndarray) -> np.ndarray:
        return self.beta * node_values(self.model, self.seed, generation, indices)

    def _block(self, generation: int, indices: np.ndarray, depth: int) -> np.ndarray:
        acc = np.zeros(len(indices) * self.d ** depth)
        for t in range(depth, 0, -1):
            level = _descendants(self.d, indices, t)
            acc = logsumexp((self.weights(generation + t, level) + acc).reshape(-1, self.d), axis=1)
        return acc

    def log_z(self, generation: int, indices: np.ndarray, depth: int, mapper: Optional[Mapper] = None) -> np.ndarray:
        """log Z below each node in `indices` over `depth` further generations."""
        if depth == 0:
            return np.zeros(len(indices))
        width = self.d ** depth
        if len(indices) * width <= self.block_size:
            return self._block(generation, indices, depth)

        if len(indices) == 1:
            # One oversized root: evaluate its children, then combine.
            children = _descendants(self.d, indices, 1)
            below = self.log_z(generation + 1, children, depth - 1, mapper)
            return np.atleast_1d(logsumexp(self.weights(generation + 1, children) + below))

        per_chunk = max(1, self.block_size // width)
        chunks = [indices[i:i + per_chunk] for i in range(0, len(indices), per_chunk)]
        logger.debug(f"Splitting {len(indices)} roots at generation {generation} into {len(chunks)} chunks")
        run = mapper or _sequential_map
        parts = run(lambda chunk: self.log_z(generation, chunk, depth), chunks)
        return np.concatenate(parts)


def _evaluate(real: Realization, beta: float, threads: int, body: Callable) -> object:
    """Run `body(evaluator, mapper)` with a pool only when more than one thread is asked for."""
    evaluator = _SubtreeEvaluator(real.model, real.seed, beta, config.block_size)
    if threads <= 1:
        return body(evaluator, None)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return body(evaluator, lambda fn, items: list(pool.map(fn, items)))


def log_partition(real: Realization, beta: float, threads: Optional[int] = None) -> float:
    """log Z_n of the realization's model by depth-first recursion from the root."""
    if real.depth < 1:
        raise InvalidParameterError(f"log_partition requires depth >= 1 (got {real.depth})")
    if not math.isfinite(beta):
        raise InvalidParameterError(f"beta must be finite (got {beta})")
    check_budget(real.model.d, real.depth, config.node_budget, "log_partition")

    root = np.array([1], dtype=np.int64)
    result = _evaluate(
        real, beta, threads or config.threads,
        lambda ev, mapper: ev.log_z(0, root, real.depth, mapper),
    )
    return float(result[0])


def log_partition_det(beta: float, u: float, d: int, d1: int, n: int) -> float:
    """log Z^Det_n: non-disordered tree with constant potential u on the defect subtree."""
    if n < 1:
        raise InvalidParameterError(f"log_partition_det requires n >= 1 (got {n})")
    k = np.arange(n, dtype=float)
    terms = k * (beta * u + math.log(d1)) + math.log(d - d1) + (n - k - 1) * math.log(d)
    return float(logsumexp(np.append(terms, n * (beta * u + math.log(d1)))))


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def _pairwise_logaddexp(x: np.ndarray) -> float:
    while len(x) > 1:
        if len(x) % 2:
            x = np.append(x, -np.inf)
        x = np.logaddexp(x[0::2], x[1::2])
    return float(x[0])


def brute_force_log_partition(real: Realization, beta: float) -> float:
    """log Z_n by explicit enumeration of all d^n root-to-leaf paths."""
    model, n, d = real.model, real.depth, real.model.d
    if n < 1:
        raise InvalidParameterError(f"brute force requires depth >= 1 (got {n})")
    check_budget(d, n, config.brute_force_limit, "brute_force_log_partition")

    leaves = np.arange(d ** n, dtype=np.int64)
    energy = np.zeros(len(leaves))
    still_inside = np.ones(len(leaves), dtype=bool)
    for t in range(1, n + 1):
        scale = d ** (n - t)
        ancestor = leaves // scale
        still_inside &= (ancestor % d) < model.d1
        value = sample_generation(model.bulk, real.seed, t, ancestor + 1)
        if isinstance(model.defect, SubtreeConstant):
            value = np.where(still_inside, model.u, value)
        elif not isinstance(model.defect, NoDefect):
            value = np.where(still_inside, value + model.u, value)
        energy += value
    return _pairwise_logaddexp(beta * energy)


# ---------------------------------------------------------------------------
# Exit-generation decomposition
# ---------------------------------------------------------------------------

def _require_defect(model: ModelSpec, what: str) -> None:
    if isinstance(model.defect, NoDefect):
        raise WrongModelKindError(f"{what} needs a defect branch or subtree (model has none)")


def st_decomposition(real: Realization, beta: float, threads: Optional[int] = None) -> STDecomposition:
    """Split log Z by the generation k at which a path leaves the defect subtree.

    Paths never return once they leave, so Z = Σ_k e^{βku} G_k + (all-defect term).
    For shift defects the bulk part of the in-defect prefix is carried inside G_k
    and the all-defect term.
    """
    model, n, d, d1 = real.model, real.depth, real.model.d, real.model.d1
    _require_defect(model, "st_decomposition")
    if n < 1:
        raise InvalidParameterError(f"st_decomposition requires depth >= 1 (got {n})")
    check_budget(d, n, config.node_budget, "st_decomposition")
    shifted = not isinstance(model.defect, SubtreeConstant)
    exits = np.arange(d1, d, dtype=np.int64)

    def body(ev: _SubtreeEvaluator, mapper: Optional[Mapper]) -> STDecomposition:
        inside = np.array([1], dtype=np.int64)
        prefix = np.zeros(1)
        log_g = np.empty(n)
        for k in range(n):
            out = ((inside - 1)[:, None] * d + exits[None, :] + 1).ravel()
            below = ev.log_z(k + 1, out, n - k - 1, mapper)
            terms = beta * sample_generation(model.bulk, real.seed, k + 1, out) + below
            if shifted:
                terms = terms + np.repeat(prefix, d - d1)
            log_g[k] = logsumexp(terms)

            inside = ((inside - 1)[:, None] * d + np.arange(1, d1 + 1, dtype=np.int64)[None, :]).ravel()
            if shifted:
                prefix = np.repeat(prefix, d1) + beta * sample_generation(model.bulk, real.seed, k + 1, inside)

        pinned = n * beta * model.u
        pinned += float(logsumexp(prefix)) if shifted else n * math.log(d1)
        return STDecomposition(n=n, beta=beta, u=model.u, log_g=log_g, log_pinned_term=pinned)

    return _evaluate(real, beta, threads or config.threads, body)


def _exit_weights(decomp: STDecomposition) -> np.ndarray:
    terms = decomp.log_terms()
    return np.exp(terms - logsumexp(terms))


def gibbs_pinned_fraction(real: Realization, beta: float, decomp: Optional[STDecomposition] = None) -> float:
    """Gibbs-expected fraction of steps spent in the defect (all-defect paths count k = n)."""
    _require_defect(real.model, "gibbs_pinned_fraction")
    decomp = decomp or st_decomposition(real, beta)
    w = _exit_weights(decomp)
    k = np.arange(decomp.n + 1, dtype=float)
    return float(min(1.0, max(0.0, np.dot(k, w) / decomp.n)))


def dominant_k(real: Realization, beta: float, decomp: Optional[STDecomposition] = None) -> int:
    """Exit generation of the largest term; ties go to the smaller k."""
    _require_defect(real.model, "dominant_k")
    decomp = decomp or st_decomposition(real, beta)
    return int(np.argmax(decomp.log_terms()))


# ---------------------------------------------------------------------------
# Exact-expectation oracle
# ---------------------------------------------------------------------------

def exact_expectation_oracle(
    model: ModelSpec,
    beta: float,
    u: float,
    n: int,
    power: int = 1,
    target: str = "partition",
    k: Optional[int] = None,
) -> float:
    """log E[X^power] by enumerating every disorder assignment of a finite-support law.

    X is Z_n (``target="partition"``) or G_{k,n} as produced by st_decomposition
    (``target="g"``).
    """
    if power not in (1, 2):
        raise InvalidParameterError(f"power must be 1 or 2 (got {power})")
    if target not in ("partition", "g"):
        raise InvalidParameterError(f"target must be 'partition' or 'g' (got {target!r})")
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1 (got {n})")
    if not has_finite_support(model.bulk):
        raise ContinuousDisorderError(f"{type(model.bulk).__name__} has no finite support to enumerate")
    if target == "g":
        _require_defect(model, "exact_expectation_oracle(target='g')")
        if k is None or not 0 <= k < n:
            raise IndexOutOfRangeError(f"target 'g' requires 0 <= k < n (got k={k}, n={n})")

    model = model.with_potential(u)
    d, d1 = model.d, model.d1
    atoms = support(model.bulk)
    node_count = sum(d ** t for t in range(1, n + 1))
    total = len(atoms) ** node_count
    if total > MAX_ASSIGNMENTS:
        raise SupportTooLargeError(
            f"{len(atoms)}^{node_count} assignments exceed the enumeration limit {MAX_ASSIGNMENTS}"
        )

    values = np.array([v for v, _ in atoms])
    log_q = np.log(np.array([q for _, q in atoms]))
    offsets = np.cumsum([0] + [d ** t for t in range(1, n + 1)])
    masks = [in_defect_mask(d, d1, t, np.arange(1, d ** t + 1)) for t in range(n + 1)]
    shifted = model.is_shift_defect
    constant = isinstance(model.defect, SubtreeConstant)

    def level_values(raw: np.ndarray, t: int) -> np.ndarray:
        bulk = raw[:, offsets[t - 1]:offsets[t]]
        if constant:
            return np.where(masks[t], model.u, bulk)
        if shifted:
            return np.where(masks[t], bulk + model.u, bulk)
        return bulk

    logs = []
    for start in range(0, total, _ORACLE_CHUNK):
        codes = np.arange(start, min(total, start + _ORACLE_CHUNK), dtype=np.int64)
        digits = np.empty((len(codes), node_count), dtype=np.int64)
        rest = codes.copy()
        for j in range(node_count):
            rest, digits[:, j] = np.divmod(rest, len(atoms))
        raw = values[digits]
        log_p = log_q[digits].sum(axis=1)

        levels = {t: level_values(raw, t) for t in range(1, n + 1)}
        acc = np.zeros((len(codes), d ** n))
        below_exit = None
        for t in range(n, 0, -1):
            if target == "g" and t == k + 1:
                below_exit = beta * raw[:, offsets[t - 1]:offsets[t]] + acc
            acc = logsumexp((beta * levels[t] + acc).reshape(len(codes), -1, d), axis=2)

        if target == "partition":
            log_x = acc[:, 0]
        else:
            parents = np.arange(d ** (k + 1)) // d
            exits = masks[k][parents] & ~masks[k + 1]
            terms = below_exit[:, exits]
            if shifted and k > 0:
                prefix = np.zeros((len(codes), d ** k))
                for t in range(1, k + 1):
                    prefix += raw[:, offsets[t - 1]:offsets[t]][:, np.arange(d ** k) // d ** (k - t)]
                terms = terms + beta * prefix[:, parents[exits]]
            log_x = logsumexp(terms, axis=1)
        logs.append(log_p + power * log_x)

    flat = np.concatenate(logs)
    top = float(np.max(flat))
    return top + math.log(math.fsum(np.exp(flat - top)))

