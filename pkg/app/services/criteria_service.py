"""
Separability criteria for collective quadrature statistics.

- mgvt_raw:        Var[X-] Var[P+] >= 1
- coarse_variance: (Var[X-] + D^2/12)(Var[P+] + d^2/12) >= 1 for binned data
- renyi_entropic:  H_a[X-] + H_b[P+] + (h(a) + h(b))/2 - ln(2 pi / (D d)) >= 0
                   with 1/a + 1/b = 2 and h(a) = ln(a) / (1 - a)

Every separable state satisfies all three; a violation verifies entanglement.
Distributions handed to these functions must already be normalized, i.e.
the missed mass has been assigned by one of the fill strategies.
"""
import logging
import math
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import logsumexp

from app.config import settings
from app.exceptions import ContractError, DomainError
from app.schemas.binning_schema import CollectiveDistribution
from app.schemas.criterion_schema import CriterionKind, CriterionReport
from app.utils.numerics import Interval, minimize_scalar

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9


def _require_normalized(dist: CollectiveDistribution) -> None:
    if abs(dist.total_mass - 1.0) > NORMALIZATION_TOLERANCE:
        raise ContractError(
            f"criterion input must be normalized (missed mass assigned first), sums to {dist.total_mass}"
        )


def variance_of(dist: CollectiveDistribution) -> float:
    """Variance of a normalized collective distribution."""
    _require_normalized(dist)
    mean = float(dist.probs @ dist.values)
    centered = dist.values - mean
    return max(float(dist.probs @ centered ** 2), 0.0)


def _require_variances(var_x: float, var_p: float) -> None:
    if var_x < 0 or var_p < 0 or math.isnan(var_x) or math.isnan(var_p):
        raise ContractError(f"variances must be non-negative, got {var_x} and {var_p}")


def mgvt_raw(var_x: float, var_p: float, inputs_digest: Optional[Dict[str, Any]] = None) -> CriterionReport:
    """Variance-product criterion on unbinned (or uncorrected) variances."""
    _require_variances(var_x, var_p)
    value = var_x * var_p
    return CriterionReport(
        criterion=CriterionKind.mgvt_raw,
        value=value,
        threshold=1.0,
        entanglement_verified=value < 1.0,
        inputs_digest=inputs_digest or {},
    )


def coarse_variance_criterion(
    var_x: float,
    var_p: float,
    delta_x: float,
    delta_p: float,
    inputs_digest: Optional[Dict[str, Any]] = None,
) -> CriterionReport:
    """Variance-product criterion corrected for bin widths delta_x, delta_p."""
    _require_variances(var_x, var_p)
    if not (delta_x > 0 and delta_p > 0):
        raise ContractError(f"bin widths must be positive, got {delta_x} and {delta_p}")
    value = (var_x + delta_x ** 2 / 12.0) * (var_p + delta_p ** 2 / 12.0)
    return CriterionReport(
        criterion=CriterionKind.coarse_variance,
        value=value,
        threshold=1.0,
        entanglement_verified=value < 1.0,
        inputs_digest=inputs_digest or {},
    )


def renyi_entropy_of_probs(probs: np.ndarray, alpha: float) -> float:
    """
    Renyi entropy (natural log) of a probability vector; alpha == 1 is the
    Shannon entropy. Zero bins contribute nothing (0^alpha = 0, 0 ln 0 = 0).
    """
    if not alpha > 0 or math.isinf(alpha):
        raise DomainError(f"Renyi order must be positive and finite, got {alpha}")
    p = np.asarray(probs, dtype=float)
    p = p[p > 0.0]
    if p.size == 0:
        raise ContractError("Renyi entropy of an all-zero vector is undefined")
    if alpha == 1.0:
        return float(-(p @ np.log(p)))
    # ln sum p^alpha evaluated in log space; large orders would underflow otherwise
    return float(logsumexp(alpha * np.log(p)) / (1.0 - alpha))


def renyi_entropy(dist: CollectiveDistribution, alpha: float) -> float:
    """Renyi entropy of a normalized collective distribution."""
    _require_normalized(dist)
    return renyi_entropy_of_probs(dist.probs, alpha)


def conjugate_order(alpha: float) -> float:
    """beta with 1/alpha + 1/beta = 2."""
    if not alpha > 0.5 or math.isinf(alpha):
        raise DomainError(f"alpha must lie in (1/2, inf), got {alpha}")
    return alpha / (2.0 * alpha - 1.0)


def _order_penalty(order: float) -> float:
    """ln(order) / (1 - order), with its limit -1 at order 1."""
    if order == 1.0:
        return -1.0
    return math.log1p(order - 1.0) / (1.0 - order)


def entropic_lhs(
    dist_x: CollectiveDistribution,
    dist_p: CollectiveDistribution,
    alpha: float,
    delta_x: float,
    delta_p: float,
) -> float:
    """Left-hand side of the Renyi criterion at orders (alpha, beta(alpha))."""
    beta = conjugate_order(alpha)
    if not (delta_x > 0 and delta_p > 0):
        raise ContractError(f"bin widths must be positive, got {delta_x} and {delta_p}")
    return (
        renyi_entropy(dist_x, alpha)
        + renyi_entropy(dist_p, beta)
        + 0.5 * (_order_penalty(alpha) + _order_penalty(beta))
        - math.log(2.0 * math.pi / (delta_x * delta_p))
    )


def optimize_entropic(
    dist_x: CollectiveDistribution,
    dist_p: CollectiveDistribution,
    delta_x: float,
    delta_p: float,
    alpha: Optional[float] = None,
    inputs_digest: Optional[Dict[str, Any]] = None,
) -> CriterionReport:
    """
    Minimize the Renyi criterion over alpha in (1/2, alpha_max].

    A log-spaced scan in (alpha - 1/2), with alpha = 1 always included, finds
    the best region; golden-section search refines between the neighbours of
    the best scan point. The reported value is evaluated directly at the
    returned alpha and is never above the best scanned value, nor above the
    Shannon point. A fixed alpha skips the optimization.
    """
    _require_normalized(dist_x)
    _require_normalized(dist_p)

    def objective(a: float) -> float:
        return entropic_lhs(dist_x, dist_p, a, delta_x, delta_p)

    shannon_value = objective(1.0)
    lo = 0.5 + settings.alpha_min_offset
    hi = settings.alpha_max

    if alpha is not None:
        best_alpha, best_value = float(alpha), objective(float(alpha))
    else:
        offsets = np.geomspace(settings.alpha_min_offset, hi - 0.5, settings.alpha_scan_points)
        alphas = np.unique(np.append(0.5 + offsets, 1.0))
        values = np.array([objective(a) for a in alphas])
        i = int(np.argmin(values))
        best_alpha, best_value = float(alphas[i]), float(values[i])

        # refine in t = ln(alpha - 1/2), where the scan is uniform
        t_lo = math.log(alphas[max(i - 1, 0)] - 0.5)
        t_hi = math.log(alphas[min(i + 1, alphas.size - 1)] - 0.5)
        if t_hi > t_lo:
            t_opt, _ = minimize_scalar(
                lambda t: objective(0.5 + math.exp(t)),
                Interval(lo=t_lo, hi=t_hi),
                tol=settings.alpha_tol,
            )
            refined_alpha = 0.5 + math.exp(t_opt)
            refined_value = objective(refined_alpha)
            if refined_value < best_value:
                best_alpha, best_value = refined_alpha, refined_value
        logger.debug(
            f"Entropic scan: best scanned alpha={alphas[i]:.6g} ({values[i]:.9g}), "
            f"refined alpha={best_alpha:.9g} ({best_value:.9g}), Shannon={shannon_value:.9g}"
        )

    return CriterionReport(
        criterion=CriterionKind.renyi_entropic,
        value=best_value,
        threshold=0.0,
        entanglement_verified=best_value < 0.0,
        alpha_opt=best_alpha,
        beta_opt=conjugate_order(best_alpha),
        shannon_value=shannon_value,
        alpha_scan_bounds=(lo, hi),
        inputs_digest=inputs_digest or {},
    )
