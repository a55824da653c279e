"""Replica averages of the quenched free energy and empirical phase observables.

Replica r of a run with master seed s always uses ``replica_seed(s, r)``; the same
replica seeds are reused at every depth, so a ladder follows one set of disordered
trees as n grows. Work is spread over a thread pool whose ``map`` preserves input
order, so aggregates do not depend on the worker count.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..utils.rng import cell_seed, replica_seed
from .closedform import (
    F_line,
    J_line,
    beta_c,
    classify_st,
    f_br,
    f_det,
    phi,
    shifted_st_bounds,
    st_bounds,
)
from .config import config
from .disorder import is_degenerate, log_mgf, mean_var
from .exceptions import InvalidParameterError, WrongModelKindError
from .models import (
    BranchShift,
    ConcentrationProfile,
    FreeEnergyEstimate,
    LadderReport,
    MartingaleTrace,
    ModelSpec,
    NoDefect,
    ObservableSummary,
    PhaseCell,
    PinnedProfile,
    Realization,
    SubtreeConstant,
)
from .treesim import (
    check_budget,
    dominant_k,
    gibbs_pinned_fraction,
    log_partition,
    log_partition_det,
    st_decomposition,
)

logger = logging.getLogger(__name__)

SEED_POLICY = "replica r uses mix(master_seed, r); replica seeds are shared across depths"
HISTOGRAM_BINS = 10
MIN_CONCENTRATION_REPLICAS = 30

T = TypeVar("T")


def _parallel_map(fn: Callable[[int], T], items: Sequence[int], threads: Optional[int]) -> List[T]:
    workers = threads or config.threads
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _mean_stderr(values: np.ndarray) -> Tuple[float, float]:
    """Sample mean and standard error; exactly (v, 0) when every replica agrees."""
    if np.ptp(values) == 0.0:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _check_replicas(replicas: int, minimum: int = 2) -> None:
    if replicas < minimum:
        raise InvalidParameterError(f"at least {minimum} replicas are required (got {replicas})")


def _check_ladder(n_list: Sequence[int]) -> None:
    if not n_list:
        raise InvalidParameterError("n_list must not be empty")
    if any(n < 1 for n in n_list):
        raise InvalidParameterError(f"every depth must be >= 1 (got {list(n_list)})")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidParameterError(f"n_list must be strictly increasing (got {list(n_list)})")


def _replica_log_partitions(model: ModelSpec, beta: float, n: int, seeds: Sequence[int],
                            threads: Optional[int]) -> np.ndarray:
    def one(r: int) -> float:
        return log_partition(Realization(model, seeds[r], n), beta, threads=1)

    return np.array(_parallel_map(one, range(len(seeds)), threads))


# ---------------------------------------------------------------------------
# Free-energy ladders
# ---------------------------------------------------------------------------

def free_energy_anchor(model: ModelSpec, beta: float) -> Tuple[float, float, str]:
    """(lower, upper, name) of the closed-form limit of (1/n) log Z for this model."""
    d, d1, u = model.d, model.d1, model.u
    defect = model.defect

    if is_degenerate(model.bulk):
        c, _ = mean_var(model.bulk)
        bulk_only = beta * c + math.log(d)
        if isinstance(defect, NoDefect):
            value, name = bulk_only, "phi"
        elif isinstance(defect, SubtreeConstant):
            value, name = max(beta * u + math.log(d1), bulk_only), "f_det"
        elif isinstance(defect, BranchShift):
            value, name = max(beta * (c + u), bulk_only), "f_br"
        else:
            value, name = beta * c + f_det(beta, u, d, d1), "f_det"
        return value, value, name

    if isinstance(defect, NoDefect):
        value = phi(model.bulk, d, beta)
        return value, value, "phi"
    if isinstance(defect, BranchShift):
        value = f_br(model.bulk, d, beta, u)
        return value, value, "f_br"
    if isinstance(defect, SubtreeConstant):
        lower, upper = st_bounds(model.bulk, d, d1, beta, u)
        return lower, upper, "st_bounds"
    lower, upper = shifted_st_bounds(model.bulk, d, d1, beta, u)
    return lower, upper, "shifted_st_bounds"


def estimate_free_energy(
    model: ModelSpec,
    beta: float,
    u: Optional[float],
    n_list: Sequence[int],
    replicas: int,
    master_seed: int,
    threads: Optional[int] = None,
    extrapolate: bool = False,
) -> LadderReport:
    """Replica-averaged (1/n) log Z at each depth of the ladder, with its anchor."""
    _check_replicas(replicas)
    _check_ladder(n_list)
    model = model.with_potential(model.u if u is None else u)
    for n in n_list:
        check_budget(model.d, n, config.node_budget, f"free energy at n={n}")

    lower, upper, name = free_energy_anchor(model, beta)
    seeds = [replica_seed(master_seed, r) for r in range(replicas)]
    estimates = []
    finite_n = {}
    for n in n_list:
        if model.is_deterministic:
            exact = log_partition_det(beta, model.u, model.d, model.d1, n) / n
            finite_n[n] = exact
            values = np.full(replicas, exact)
        else:
            values = _replica_log_partitions(model, beta, n, seeds, threads) / n
        mean, stderr = _mean_stderr(values)
        estimates.append(FreeEnergyEstimate(
            n=n, replicas=replicas, mean=mean, stderr=stderr,
            min=float(np.min(values)), max=float(np.max(values)),
        ))
        logger.info(f"n={n}: mean={mean:.6f} stderr={stderr:.2e} ({replicas} replicas)")

    extrapolated = None
    if extrapolate and len(n_list) >= 2:
        slope, intercept = np.polyfit([1.0 / n for n in n_list], [e.mean for e in estimates], 1)
        extrapolated = float(intercept)

    return LadderReport(
        model=model, beta=beta, u=model.u, master_seed=master_seed, seed_policy=SEED_POLICY,
        estimates=estimates, anchor_lower=lower, anchor_upper=upper, anchor_name=name,
        finite_n_anchor=finite_n, extrapolated=extrapolated,
    )


def martingale_trace(
    model: ModelSpec,
    beta: float,
    n_list: Sequence[int],
    replicas: int,
    master_seed: int,
    threads: Optional[int] = None,
) -> MartingaleTrace:
    """Replica mean of log M_n = log Z_n − n(λ(β) + log d) for the homogeneous model."""
    if not isinstance(model.defect, NoDefect):
        raise WrongModelKindError("martingale_trace is defined for the homogeneous model only")
    _check_replicas(replicas)
    _check_ladder(n_list)
    annealed = log_mgf(model.bulk, beta) + math.log(model.d)
    seeds = [replica_seed(master_seed, r) for r in range(replicas)]

    means, errors = [], []
    for n in n_list:
        check_budget(model.d, n, config.node_budget, f"martingale at n={n}")
        values = _replica_log_partitions(model, beta, n, seeds, threads) - n * annealed
        mean, stderr = _mean_stderr(values)
        means.append(mean)
        errors.append(stderr)
    return MartingaleTrace(n_list=list(n_list), mean=means, stderr=errors)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def _summarize(values: np.ndarray) -> ObservableSummary:
    mean, stderr = _mean_stderr(values)
    counts, edges = np.histogram(np.clip(values, 0.0, 1.0), bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return ObservableSummary(mean=mean, stderr=stderr, histogram=counts.tolist(), bin_edges=edges.tolist())


def _pinned_observables(model: ModelSpec, beta: float, n: int, seed: int) -> Tuple[float, float, float]:
    """(free energy, Gibbs pinned fraction, dominant k / n) from one decomposition."""
    real = Realization(model, seed, n)
    decomp = st_decomposition(real, beta, threads=1)
    return (
        decomp.recombine() / n,
        gibbs_pinned_fraction(real, beta, decomp),
        dominant_k(real, beta, decomp) / n,
    )


def empirical_pinned_profile(
    model: ModelSpec,
    beta: float,
    u: Optional[float],
    n: int,
    replicas: int,
    master_seed: int,
    threads: Optional[int] = None,
) -> PinnedProfile:
    """Distribution over replicas of the pinned fraction and of dominant_k / n."""
    if isinstance(model.defect, NoDefect):
        raise WrongModelKindError("pinned profile needs a defect branch or subtree")
    _check_replicas(replicas)
    model = model.with_potential(model.u if u is None else u)
    check_budget(model.d, n, config.node_budget, f"pinned profile at n={n}")

    rows = _parallel_map(
        lambda r: _pinned_observables(model, beta, n, replica_seed(master_seed, r)),
        range(replicas), threads,
    )
    data = np.array(rows)
    return PinnedProfile(
        n=n, replicas=replicas,
        pinned_fraction=_summarize(data[:, 1]),
        dominant_fraction=_summarize(data[:, 2]),
    )


def concentration_profile(
    model: ModelSpec,
    beta: float,
    u: Optional[float],
    n_list: Sequence[int],
    replicas: int,
    master_seed: int,
    threads: Optional[int] = None,
) -> ConcentrationProfile:
    """Sample standard deviation of (1/n) log Z per depth and whether it never grows."""
    _check_replicas(replicas, MIN_CONCENTRATION_REPLICAS)
    _check_ladder(n_list)
    model = model.with_potential(model.u if u is None else u)
    seeds = [replica_seed(master_seed, r) for r in range(replicas)]

    stdev = []
    for n in n_list:
        check_budget(model.d, n, config.node_budget, f"concentration at n={n}")
        values = _replica_log_partitions(model, beta, n, seeds, threads) / n
        stdev.append(0.0 if np.ptp(values) == 0.0 else float(np.std(values, ddof=1)))
    decreasing = all(b <= a for a, b in zip(stdev, stdev[1:]))
    return ConcentrationProfile(n_list=list(n_list), stdev=stdev, decreasing=decreasing)


# ---------------------------------------------------------------------------
# Phase scans
# ---------------------------------------------------------------------------

def phase_scan(
    model: ModelSpec,
    beta_grid: Sequence[float],
    u_grid: Sequence[float],
    n: int,
    replicas: int,
    master_seed: int,
    threads: Optional[int] = None,
    tol: float = 1e-9,
) -> List[PhaseCell]:
    """Classifier label, free-energy estimate and pinned fraction on a (β, u) grid.

    Cells are ordered β-major. Cell i draws its replicas from ``cell_seed(master_seed, i)``.
    Non-positive β values are skipped since the boundary curves divide by β.
    """
    if not isinstance(model.defect, SubtreeConstant):
        raise WrongModelKindError("phase_scan classifies the constant-potential defect subtree model")
    _check_replicas(replicas)
    check_budget(model.d, n, config.node_budget, f"phase scan at n={n}")

    betas = [b for b in beta_grid if b > 0.0]
    if len(betas) < len(beta_grid):
        logger.warning(f"Skipping {len(beta_grid) - len(betas)} non-positive beta value(s)")
    bulk, d, d1 = model.bulk, model.d, model.d1
    crit = beta_c(bulk, d)
    F_c = F_line(bulk, d, d1, crit.beta_c) if crit.is_finite else None
    cells = [(b, u) for b in betas for u in u_grid]

    def run_cell(i: int) -> PhaseCell:
        beta, u = cells[i]
        cell_model = model.with_potential(u)
        seed = cell_seed(master_seed, i)
        rows = np.array([
            _pinned_observables(cell_model, beta, n, replica_seed(seed, r)) for r in range(replicas)
        ])
        mean, stderr = _mean_stderr(rows[:, 0])
        pinned, _ = _mean_stderr(rows[:, 1])
        return PhaseCell(
            beta=beta, u=u,
            label=classify_st(bulk, d, d1, beta, u, tol),
            F=F_line(bulk, d, d1, beta),
            J=J_line(bulk, d, d1, beta) if beta > crit.beta_c else None,
            F_at_beta_c=F_c,
            free_energy_mean=mean, free_energy_stderr=stderr,
            pinned_fraction_mean=pinned,
        )

    logger.info(f"Scanning {len(cells)} cells at n={n} with {replicas} replicas each")
    return _parallel_map(run_cell, range(len(cells)), threads)
