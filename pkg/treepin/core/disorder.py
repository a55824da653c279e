"""Disorder laws: cumulant functions, moments and per-node sampling."""
import logging
import math
from typing import Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp, ndtri

from ..utils import rng
from .models import (
    BernoulliDisorder,
    ConstantDisorder,
    DisorderSpec,
    GaussianDisorder,
    NodeAddress,
    ShiftedDisorder,
)

logger = logging.getLogger(__name__)


def _bernoulli_tilt(spec: BernoulliDisorder, beta: float) -> float:
    """Weight of the upper atom under the exponential tilt e^{βV}."""
    if spec.p == 0.0:
        return 0.0
    if spec.p == 1.0:
        return 1.0
    return float(expit(beta * (spec.hi - spec.lo) + math.log(spec.p) - math.log1p(-spec.p)))


def log_mgf(spec: DisorderSpec, beta: float) -> float:
    """λ(β) = log E[e^{βV}]."""
    if isinstance(spec, GaussianDisorder):
        return spec.mu * beta + 0.5 * spec.sigma ** 2 * beta ** 2
    if isinstance(spec, BernoulliDisorder):
        return float(logsumexp([beta * spec.hi, beta * spec.lo], b=[spec.p, 1.0 - spec.p]))
    if isinstance(spec, ConstantDisorder):
        return spec.c * beta
    if isinstance(spec, ShiftedDisorder):
        return log_mgf(spec.base, beta) + spec.shift * beta
    raise TypeError(f"Unsupported disorder: {spec!r}")


def log_mgf_deriv(spec: DisorderSpec, beta: float) -> float:
    """λ′(β): mean of V under the tilted law."""
    if isinstance(spec, GaussianDisorder):
        return spec.mu + spec.sigma ** 2 * beta
    if isinstance(spec, BernoulliDisorder):
        w = _bernoulli_tilt(spec, beta)
        return spec.lo + w * (spec.hi - spec.lo)
    if isinstance(spec, ConstantDisorder):
        return spec.c
    if isinstance(spec, ShiftedDisorder):
        return log_mgf_deriv(spec.base, beta) + spec.shift
    raise TypeError(f"Unsupported disorder: {spec!r}")


def log_mgf_second_deriv(spec: DisorderSpec, beta: float) -> float:
    """λ″(β): variance of V under the tilted law."""
    if isinstance(spec, GaussianDisorder):
        return spec.sigma ** 2
    if isinstance(spec, BernoulliDisorder):
        w = _bernoulli_tilt(spec, beta)
        return w * (1.0 - w) * (spec.hi - spec.lo) ** 2
    if isinstance(spec, ConstantDisorder):
        return 0.0
    if isinstance(spec, ShiftedDisorder):
        return log_mgf_second_deriv(spec.base, beta)
    raise TypeError(f"Unsupported disorder: {spec!r}")


def mean_var(spec: DisorderSpec) -> Tuple[float, float]:
    """(E V, Var V)."""
    if isinstance(spec, GaussianDisorder):
        return spec.mu, spec.sigma ** 2
    if isinstance(spec, BernoulliDisorder):
        mean = spec.p * spec.hi + (1.0 - spec.p) * spec.lo
        return mean, spec.p * (1.0 - spec.p) * (spec.hi - spec.lo) ** 2
    if isinstance(spec, ConstantDisorder):
        return spec.c, 0.0
    if isinstance(spec, ShiftedDisorder):
        mean, var = mean_var(spec.base)
        return mean + spec.shift, var
    raise TypeError(f"Unsupported disorder: {spec!r}")


def is_degenerate(spec: DisorderSpec) -> bool:
    """True when V is almost surely constant."""
    if isinstance(spec, ShiftedDisorder):
        return is_degenerate(spec.base)
    if isinstance(spec, ConstantDisorder):
        return True
    if isinstance(spec, BernoulliDisorder):
        return spec.p in (0.0, 1.0)
    return False


def ess_sup(spec: DisorderSpec) -> float:
    """Essential supremum of V (+inf when unbounded above)."""
    if isinstance(spec, GaussianDisorder):
        return math.inf
    if isinstance(spec, BernoulliDisorder):
        return spec.hi if spec.p > 0.0 else spec.lo
    if isinstance(spec, ConstantDisorder):
        return spec.c
    if isinstance(spec, ShiftedDisorder):
        return ess_sup(spec.base) + spec.shift
    raise TypeError(f"Unsupported disorder: {spec!r}")


def atom_at_sup(spec: DisorderSpec) -> float:
    """P(V = ess sup V); zero for laws unbounded above."""
    if isinstance(spec, GaussianDisorder):
        return 0.0
    if isinstance(spec, BernoulliDisorder):
        return spec.p if spec.p > 0.0 else 1.0
    if isinstance(spec, ConstantDisorder):
        return 1.0
    if isinstance(spec, ShiftedDisorder):
        return atom_at_sup(spec.base)
    raise TypeError(f"Unsupported disorder: {spec!r}")


def support(spec: DisorderSpec) -> Tuple[Tuple[float, float], ...]:
    """Atoms (value, probability) of a finite-support law, zero-mass atoms dropped."""
    if isinstance(spec, ShiftedDisorder):
        return tuple((v + spec.shift, q) for v, q in support(spec.base))
    if isinstance(spec, ConstantDisorder):
        return ((spec.c, 1.0),)
    if isinstance(spec, BernoulliDisorder):
        atoms = ((spec.lo, 1.0 - spec.p), (spec.hi, spec.p))
        return tuple(a for a in atoms if a[1] > 0.0)
    raise TypeError(f"{type(spec).__name__} has no finite support")


def has_finite_support(spec: DisorderSpec) -> bool:
    base = spec.base if isinstance(spec, ShiftedDisorder) else spec
    return isinstance(base, (BernoulliDisorder, ConstantDisorder))


def quantile(spec: DisorderSpec, u: Union[np.ndarray, float]) -> np.ndarray:
    """Inverse CDF applied to uniforms in (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    if isinstance(spec, GaussianDisorder):
        # scipy's ndtri (Cephes rational approximation), accurate to ~1e-15
        return spec.mu + spec.sigma * ndtri(u)
    if isinstance(spec, BernoulliDisorder):
        return np.where(u > 1.0 - spec.p, spec.hi, spec.lo)
    if isinstance(spec, ConstantDisorder):
        return np.full(u.shape, spec.c)
    if isinstance(spec, ShiftedDisorder):
        return quantile(spec.base, u) + spec.shift
    raise TypeError(f"Unsupported disorder: {spec!r}")


def node_uniform(seed: int, addr: NodeAddress) -> float:
    """Deterministic uniform in (0, 1) attached to a node."""
    return rng.node_uniform_scalar(seed, addr.generation, addr.index)


def sample_node(spec: DisorderSpec, seed: int, addr: NodeAddress) -> float:
    """V(addr) drawn from spec, deterministic given (seed, addr)."""
    return float(quantile(spec, node_uniform(seed, addr)))


def sample_generation(spec: DisorderSpec, seed: int, generation: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized sample_node over indices of one generation."""
    return quantile(spec, rng.uniforms(seed, generation, indices))
