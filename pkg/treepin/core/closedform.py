"""Closed-form free energies, critical curves and phase boundaries.

Every free-energy-scale quantity is a natural logarithm. β_c = +inf is a legal
value; downstream formulas then always take their β < β_c branch.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from ..utils.cache import critical_cache
from .disorder import (
    atom_at_sup,
    ess_sup,
    is_degenerate,
    log_mgf,
    log_mgf_deriv,
    log_mgf_second_deriv,
    mean_var,
)
from .exceptions import (
    BetaZeroError,
    DegenerateDefectArityError,
    DegenerateDisorderError,
    IndexOutOfRangeError,
    NonpositiveDenominatorError,
    OutOfDomainError,
    RootFindingError,
)
from .models import CriticalData, DisorderSpec, PhaseLabel

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12
MAX_DOUBLINGS = 200
DEFAULT_BOUNDARY_TOL = 1e-9


def _check_arity(d: int, d1: Optional[int] = None) -> None:
    if d < 2:
        raise OutOfDomainError(f"tree arity must be >= 2 (got d={d})")
    if d1 is not None and not 1 <= d1 < d:
        raise OutOfDomainError(f"defect arity must satisfy 1 <= d1 < d (got d={d}, d1={d1})")


def _check_beta_positive(beta: float, what: str) -> None:
    if beta == 0.0:
        raise BetaZeroError(f"{what} divides by beta; beta must be positive")
    if beta < 0.0:
        raise OutOfDomainError(f"{what} requires beta > 0 (got {beta})")


# ---------------------------------------------------------------------------
# Homogeneous disorder
# ---------------------------------------------------------------------------

def f_gap(bulk: DisorderSpec, d: int, beta: float) -> float:
    """f(β) = λ(β) + log d − βλ′(β); β_c is its positive root."""
    if beta < 0.0:
        raise OutOfDomainError(f"f_gap requires beta >= 0 (got {beta})")
    return log_mgf(bulk, beta) + math.log(d) - beta * log_mgf_deriv(bulk, beta)


def f_gap_slope(bulk: DisorderSpec, beta: float) -> float:
    """f′(β) = −βλ″(β); never positive, so f has at most one positive root."""
    if beta < 0.0:
        raise OutOfDomainError(f"f_gap_slope requires beta >= 0 (got {beta})")
    return -beta * log_mgf_second_deriv(bulk, beta)


def _has_finite_root(bulk: DisorderSpec, d: int) -> bool:
    return math.isinf(ess_sup(bulk)) or atom_at_sup(bulk) < 1.0 / d


def _solve_beta_c(bulk: DisorderSpec, d: int) -> CriticalData:
    if not _has_finite_root(bulk, d):
        logger.debug(f"No positive root of f for {bulk!r}, d={d}: beta_c = inf")
        return CriticalData(beta_c=math.inf, lambda_at_beta_c=math.inf, phi_cap=math.inf)

    lo, hi = 0.0, 1.0
    for _ in range(MAX_DOUBLINGS):
        if f_gap(bulk, d, hi) <= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RootFindingError(f"Could not bracket beta_c for {bulk!r}, d={d}")
    logger.debug(f"beta_c bracket for d={d}: [{lo}, {hi}]")

    if f_gap(bulk, d, hi) == 0.0:
        root = hi
    else:
        root = bisect(lambda b: f_gap(bulk, d, b), lo, hi, xtol=ROOT_TOL, maxiter=400)
    slope = f_gap_slope(bulk, root)
    if slope > 0.0:
        raise RootFindingError(f"f is increasing at beta={root} for {bulk!r}; lambda is not convex there")
    logger.debug(f"beta_c={root} for d={d}, f'(beta_c)={slope}")
    lam = log_mgf(bulk, root)
    return CriticalData(beta_c=float(root), lambda_at_beta_c=lam, phi_cap=lam + math.log(d))


def beta_c(bulk: DisorderSpec, d: int) -> CriticalData:
    """Critical inverse temperature of the homogeneous model (memoized per (bulk, d))."""
    _check_arity(d)
    if is_degenerate(bulk):
        raise DegenerateDisorderError(f"beta_c needs non-degenerate disorder (got {bulk!r})")
    return critical_cache.get_or_compute(bulk, d, lambda: _solve_beta_c(bulk, d))


def phi(bulk: DisorderSpec, d: int, beta: float) -> float:
    """Quenched free energy of the homogeneous model."""
    if beta < 0.0:
        raise OutOfDomainError(f"phi requires beta >= 0 (got {beta})")
    crit = beta_c(bulk, d)
    if beta < crit.beta_c:
        return log_mgf(bulk, beta) + math.log(d)
    return beta / crit.beta_c * crit.phi_cap


def phi_tilde(bulk: DisorderSpec, d: int, d1: int, beta: float) -> float:
    """φ with log d replaced by log d₁ (β_c stays the one for arity d)."""
    _check_arity(d, d1)
    if beta < 0.0:
        raise OutOfDomainError(f"phi_tilde requires beta >= 0 (got {beta})")
    crit = beta_c(bulk, d)
    if beta < crit.beta_c:
        return log_mgf(bulk, beta) + math.log(d1)
    return beta / crit.beta_c * (crit.lambda_at_beta_c + math.log(d1))


# ---------------------------------------------------------------------------
# Deterministic tree and defect branch
# ---------------------------------------------------------------------------

def f_det(beta: float, u: float, d: int, d1: int) -> float:
    """Free energy of the non-disordered tree with a constant defect subtree."""
    _check_arity(d, d1)
    if beta < 0.0:
        raise OutOfDomainError(f"f_det requires beta >= 0 (got {beta})")
    return max(beta * u + math.log(d1), math.log(d))


def u_c_det(beta: float, d: int, d1: int) -> float:
    """Critical potential of the non-disordered model, log(d/d₁)/β."""
    _check_arity(d, d1)
    _check_beta_positive(beta, "u_c_det")
    return math.log(d / d1) / beta


def f_br(bulk: DisorderSpec, d: int, beta: float, u: float) -> float:
    """Free energy with a shifted defect branch: max{β(u+μ), φ(β)}."""
    mu, _ = mean_var(bulk)
    return max(beta * (u + mu), phi(bulk, d, beta))


def f_branch_general(bulk: DisorderSpec, defect_law: DisorderSpec, d: int, beta: float) -> float:
    """Defect branch with an arbitrary law Ṽ: max{β E(Ṽ), φ(β)}."""
    mu_tilde, _ = mean_var(defect_law)
    return max(beta * mu_tilde, phi(bulk, d, beta))


def u_c_br(bulk: DisorderSpec, d: int, beta: float) -> float:
    """Critical curve of the defect-branch model."""
    _check_beta_positive(beta, "u_c_br")
    mu, _ = mean_var(bulk)
    crit = beta_c(bulk, d)
    if beta < crit.beta_c:
        return (log_mgf(bulk, beta) + math.log(d)) / beta - mu
    return crit.phi_cap / crit.beta_c - mu


# ---------------------------------------------------------------------------
# Defect subtree
# ---------------------------------------------------------------------------

def F_line(bulk: DisorderSpec, d: int, d1: int, beta: float) -> float:
    """F(β) = (λ(β) + log d − log d₁)/β, the fully-pinned boundary."""
    _check_arity(d, d1)
    _check_beta_positive(beta, "F_line")
    return (log_mgf(bulk, beta) + math.log(d) - math.log(d1)) / beta


def psi(bulk: DisorderSpec, d: int, d1: int) -> float:
    """Ψ = F(β_c): below it the model is depinned for every β ≥ β_c."""
    crit = beta_c(bulk, d)
    if not crit.is_finite:
        raise OutOfDomainError("psi needs a finite beta_c")
    return F_line(bulk, d, d1, crit.beta_c)


def _second_order_gap(bulk: DisorderSpec, d: int, beta: float) -> float:
    """λ(2β) − 2λ(β) − log d."""
    return log_mgf(bulk, 2.0 * beta) - 2.0 * log_mgf(bulk, beta) - math.log(d)


def _require_strong_disorder(bulk: DisorderSpec, d: int, beta: float, what: str) -> CriticalData:
    crit = beta_c(bulk, d)
    if not beta > crit.beta_c:
        raise OutOfDomainError(f"{what} requires beta > beta_c = {crit.beta_c} (got {beta})")
    return crit


def J_line(bulk: DisorderSpec, d: int, d1: int, beta: float) -> float:
    """J(β), the lower edge of the region proven partially pinned (β > β_c)."""
    _check_arity(d, d1)
    _require_strong_disorder(bulk, d, beta, "J_line")
    gap = _second_order_gap(bulk, d, beta)
    if gap <= 0.0:
        raise NonpositiveDenominatorError(
            f"lambda(2b)-2lambda(b)-log d = {gap} <= 0 at beta={beta}, d={d}"
        )
    ph = phi(bulk, d, beta)
    excess = log_mgf(bulk, beta) + math.log(d) - ph
    log_d1 = math.log(d1)
    return (ph - log_d1 - excess * log_d1 / gap) / beta


def theta(bulk: DisorderSpec, d: int, beta: float) -> float:
    """log Θ = max{2λ(β) + 2 log d, λ(2β) + log d}."""
    if beta < 0.0:
        raise OutOfDomainError(f"theta requires beta >= 0 (got {beta})")
    log_d = math.log(d)
    return max(2.0 * log_mgf(bulk, beta) + 2.0 * log_d, log_mgf(bulk, 2.0 * beta) + log_d)


def t_star(bulk: DisorderSpec, d: int, d1: int, beta: float) -> float:
    """t* = X/(log d₁ + X) with X = λ(2β) − 2λ(β) − log d."""
    _check_arity(d, d1)
    if d1 == 1:
        raise DegenerateDefectArityError("t_star is degenerate for d1 = 1 (t* = 1)")
    _require_strong_disorder(bulk, d, beta, "t_star")
    x = _second_order_gap(bulk, d, beta)
    if x <= 0.0:
        raise NonpositiveDenominatorError(
            f"lambda(2b)-2lambda(b)-log d = {x} <= 0 at beta={beta}, d={d}"
        )
    return x / (math.log(d1) + x)


def L_func(bulk: DisorderSpec, d: int, beta: float, t: float) -> float:
    """L(β, t) = φ(β) − ((1−t)/t)(λ(β) + log d − φ(β))."""
    if not 0.0 < t <= 1.0:
        raise OutOfDomainError(f"L_func requires t in (0, 1] (got {t})")
    ph = phi(bulk, d, beta)
    return ph - (1.0 - t) / t * (log_mgf(bulk, beta) + math.log(d) - ph)


def interpolated_lower_bound(bulk: DisorderSpec, d: int, d1: int, beta: float, u: float, t: float) -> float:
    """(λ+log d)(1−t) + (βu+log d₁)t, a lower bound on the ST free energy for admissible t."""
    _check_arity(d, d1)
    if not 0.0 < t < 1.0:
        raise OutOfDomainError(f"t must lie in (0, 1) (got {t})")
    crit = beta_c(bulk, d)
    if beta > crit.beta_c and d1 >= 2 and not t > t_star(bulk, d, d1, beta):
        raise OutOfDomainError(f"t must exceed t* = {t_star(bulk, d, d1, beta)} at beta={beta}")
    if beta > crit.beta_c and d1 == 1:
        raise DegenerateDefectArityError("no admissible t for d1 = 1 above beta_c")
    return (log_mgf(bulk, beta) + math.log(d)) * (1.0 - t) + (beta * u + math.log(d1)) * t


def st_bounds(bulk: DisorderSpec, d: int, d1: int, beta: float, u: float) -> Tuple[float, float]:
    """(liminf lower bound, limsup upper bound) of (1/n) log Z^ST."""
    _check_arity(d, d1)
    pinned = beta * u + math.log(d1)
    lower = max(phi(bulk, d, beta), pinned)
    upper = max(log_mgf(bulk, beta) + math.log(d), pinned)
    return lower, upper


def shifted_st_bounds(bulk: DisorderSpec, d: int, d1: int, beta: float, u: float) -> Tuple[float, float]:
    """Bounds for the subtree carrying V+u: lower max{φ, βu+φ̃} (u ≥ 0), annealed upper bound."""
    _check_arity(d, d1)
    lower = phi(bulk, d, beta)
    if u >= 0.0:
        lower = max(lower, beta * u + phi_tilde(bulk, d, d1, beta))
    upper = log_mgf(bulk, beta) + max(math.log(d), beta * u + math.log(d1))
    return lower, upper


def u_c_st_bounds(bulk: DisorderSpec, d: int, d1: int, beta: float) -> Tuple[float, float]:
    """Bracket for the subtree critical curve."""
    crit = beta_c(bulk, d)
    if beta <= crit.beta_c:
        value = F_line(bulk, d, d1, beta)
        return value, value
    return psi(bulk, d, d1), J_line(bulk, d, d1, beta)


def strict_pp_sufficient(bulk: DisorderSpec, d: int, d1: int, beta: float, u: float) -> bool:
    """β > β_c and (φ−log d₁)/β ≤ u < F(β): the point is partially pinned."""
    crit = beta_c(bulk, d)
    if not beta > crit.beta_c:
        return False
    return (phi(bulk, d, beta) - math.log(d1)) / beta <= u < F_line(bulk, d, d1, beta)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def second_moment_hd(bulk: DisorderSpec, d: int, beta: float, n: int) -> float:
    """log E[(Z_n^HD)²], summed term by term in log space."""
    if n < 0:
        raise IndexOutOfRangeError(f"second_moment_hd requires n >= 0 (got {n})")
    log_d = math.log(d)
    log_single = log_d + log_mgf(bulk, 2.0 * beta)
    log_pair = 2.0 * log_d + 2.0 * log_mgf(bulk, beta)
    if n == 0:
        return 0.0
    k = np.arange(n, dtype=float)
    terms = log_d + math.log(d - 1) + 2.0 * log_mgf(bulk, beta) + k * log_single + (n - 1 - k) * log_pair
    return float(logsumexp(np.append(terms, n * log_single)))


def mean_g(bulk: DisorderSpec, d: int, d1: int, beta: float, k: int, n: int) -> float:
    """log E[G_{k,n}]: mean weight of paths leaving the defect subtree at generation k."""
    _check_arity(d, d1)
    if not 0 <= k < n:
        raise IndexOutOfRangeError(f"mean_g requires 0 <= k < n (got k={k}, n={n})")
    return (
        k * math.log(d1)
        + math.log(d - d1)
        + (n - k - 1) * math.log(d)
        + (n - k) * log_mgf(bulk, beta)
    )


def var_g(bulk: DisorderSpec, d: int, d1: int, beta: float, k: int, n: int) -> float:
    """log Var(G_{k,n}) = log[d₁^k (d−d₁) Var(e^{βV*} Z_{n−k−1})]; -inf if degenerate."""
    _check_arity(d, d1)
    if not 0 <= k < n:
        raise IndexOutOfRangeError(f"var_g requires 0 <= k < n (got k={k}, n={n})")
    if is_degenerate(bulk):
        return -math.inf
    m = n - k - 1
    log_second = log_mgf(bulk, 2.0 * beta) + second_moment_hd(bulk, d, beta, m)
    log_first_sq = 2.0 * log_mgf(bulk, beta) + 2.0 * m * (log_mgf(bulk, beta) + math.log(d))
    ratio = math.exp(log_first_sq - log_second)
    if ratio >= 1.0:
        return -math.inf
    return k * math.log(d1) + math.log(d - d1) + log_second + math.log1p(-ratio)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------

def classify_st(
    bulk: DisorderSpec,
    d: int,
    d1: int,
    beta: float,
    u: float,
    tol: float = DEFAULT_BOUNDARY_TOL,
) -> PhaseLabel:
    """Phase of (β, u) in the defect-subtree model; Boundary inside a ±tol band."""
    _check_beta_positive(beta, "classify_st")
    if tol < 0.0:
        raise OutOfDomainError(f"tol must be >= 0 (got {tol})")
    crit = beta_c(bulk, d)
    F = F_line(bulk, d, d1, beta)

    if u >= F + tol:
        return PhaseLabel.FULLY_PINNED
    if beta <= crit.beta_c:
        return PhaseLabel.DEPINNED if u <= F - tol else PhaseLabel.BOUNDARY

    F_c = F_line(bulk, d, d1, crit.beta_c)
    J = J_line(bulk, d, d1, beta)
    if u <= F_c - tol:
        return PhaseLabel.DEPINNED
    if J + tol < u < F - tol:
        return PhaseLabel.PARTIALLY_PINNED
    if F_c + tol < u <= J - tol:
        return PhaseLabel.DEPINNED_OR_PARTIALLY_PINNED
    return PhaseLabel.BOUNDARY


def curve_table(bulk: DisorderSpec, d: int, d1: int, beta_grid: List[float]) -> List[Dict[str, Optional[float]]]:
    """Boundary curves on a β grid: F, J (β > β_c only), F(β_c), u_c_br, u_c_det."""
    crit = beta_c(bulk, d)
    F_c = F_line(bulk, d, d1, crit.beta_c) if crit.is_finite else None
    rows = []
    for beta in beta_grid:
        if beta <= 0.0:
            continue
        rows.append({
            "beta": beta,
            "F": F_line(bulk, d, d1, beta),
            "J": J_line(bulk, d, d1, beta) if beta > crit.beta_c else None,
            "F_at_beta_c": F_c,
            "u_c_br": u_c_br(bulk, d, beta),
            "u_c_det": u_c_det(beta, d, d1),
        })
    return rows
