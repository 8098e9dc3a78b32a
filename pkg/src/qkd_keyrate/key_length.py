"""Extractable key length from the estimated counts and error bounds.

The length combines the vacuum and single-photon lower bounds with the
privacy-amplification penalty of the phase-error bound, the secrecy and
correctness log terms, and the error-correction leakage.  Passing
``budget=None`` drops the two log terms, which is the asymptotic limit
used for cross-checks and optimizer seeding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .budget import EpsilonBudget
from .decoy import DecoyBound
from .phase_error import PhaseErrorBound

__all__ = [
    "EpsilonBudget",
    "KeyRateResult",
    "binary_entropy",
    "eph_threshold",
    "key_length",
    "lambda_ec",
]

F_EC_DEFAULT = 1.16

ABORT_EPS_BUDGET = "eps_budget_infeasible"
ABORT_COUNTS = "insufficient_counts"
ABORT_PHASE = "phase_error_threshold"


@dataclass(frozen=True)
class KeyRateResult:
    """Key length, rate, and the inputs that produced them.

    ``aborted`` is true exactly when no key can be extracted; the reason
    distinguishes an infeasible epsilon split, counts too small for a
    positive length, and a phase-error bound past the abort threshold.
    """

    ell: int
    rate: float
    m0_l: float
    m1_l: float
    e_ph_u: float
    lambda_ec: float
    e_z: float
    z_ks_size: float
    aborted: bool
    abort_reason: str | None = None

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise ValueError("key length cannot be negative")
        if self.aborted != (self.ell == 0):
            raise ValueError("aborted must coincide with a zero key length")


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def lambda_ec(z_ks_size: float, e_z: float, f_ec: float = F_EC_DEFAULT) -> float:
    """Error-correction leakage f_EC |Z_ks| h(e_z) in bits."""
    if f_ec < 1.0:
        raise ValueError("error-correction efficiency must be at least 1")
    if z_ks_size < 0.0:
        raise ValueError("block size must be nonnegative")
    return f_ec * z_ks_size * binary_entropy(e_z)


def _pa_penalty(e_ph: float) -> float:
    # the single-photon credit m1 (1 - h(e)) must never turn negative:
    # past 1/2 the entropy is treated as saturated
    return 1.0 if e_ph >= 0.5 else binary_entropy(e_ph)


def _log_terms(budget: EpsilonBudget, eta_used: float) -> float:
    gap = budget.eps_s**2 - eta_used
    if gap <= 0.0:
        raise ValueError("accumulated failure must stay below eps_s^2")
    return math.log2(2.0 / gap) + math.log2(2.0 / budget.eps_c)


def eph_threshold(
    m0: float,
    m1: float,
    lam_ec: float,
    budget: EpsilonBudget | None,
    eta_used: float = 0.0,
) -> float:
    """Phase-error rate at which the key length crosses zero.

    ``eta_used`` is the failure probability already spent on the m0, m1,
    and phase estimates; it tightens the secrecy log term.  Returns 0
    when even a zero phase-error rate yields nothing, and 1/2 when the
    length stays positive at saturated entropy (the formula is constant
    beyond 1/2, so no larger rate can force an abort).
    """
    logs = 0.0 if budget is None else _log_terms(budget, eta_used)
    ell = lambda e: m0 + m1 * (1.0 - _pa_penalty(e)) - logs - lam_ec

    if ell(0.0) <= 0.0:
        return 0.0
    if ell(0.5) > 0.0:
        return 0.5
    return brentq(ell, 0.0, 0.5, xtol=1e-15, rtol=8.9e-16)


def key_length(
    m0: DecoyBound,
    m1: DecoyBound,
    eph: PhaseErrorBound,
    lam_ec: float,
    budget: EpsilonBudget | None,
    *,
    n_total: float,
    e_z: float = 0.0,
    z_ks_size: float = 0.0,
) -> KeyRateResult:
    """Extractable key length and rate for one protocol run.

    Aborts are returned, never raised: an epsilon split with no secrecy
    margin, a phase-error bound at or past the zero-key threshold, and a
    nonpositive floored length all yield ell = 0 with a reason.
    """
    if n_total <= 0.0:
        raise ValueError("n_total must be positive")

    def result(ell: int, reason: str | None) -> KeyRateResult:
        return KeyRateResult(
            ell=ell,
            rate=ell / n_total,
            m0_l=m0.value,
            m1_l=m1.value,
            e_ph_u=eph.e_ph_upper,
            lambda_ec=lam_ec,
            e_z=e_z,
            z_ks_size=z_ks_size,
            aborted=ell == 0,
            abort_reason=reason,
        )

    # failure probability actually consumed by the three estimates; the
    # secrecy margin eps_s^2 must exceed it or no key can be claimed
    eta_used = m0.failure_prob + m1.failure_prob + eph.failure_prob
    if budget is not None and budget.eps_s**2 - eta_used <= 0.0:
        return result(0, ABORT_EPS_BUDGET)
    if m1.value <= 0.0:
        return result(0, ABORT_COUNTS)

    threshold = eph_threshold(m0.value, m1.value, lam_ec, budget, eta_used)
    if threshold == 0.0:
        # even a flawless phase-error estimate extracts nothing
        return result(0, ABORT_COUNTS)
    if threshold < 0.5 and eph.e_ph_upper >= threshold:
        # at the 0.5 cap the length stays positive for every rate, so
        # only an interior threshold can trigger the abort
        return result(0, ABORT_PHASE)

    logs = 0.0 if budget is None else _log_terms(budget, eta_used)
    raw = m0.value + m1.value * (1.0 - _pa_penalty(eph.e_ph_upper)) - logs - lam_ec
    ell = max(0, math.floor(raw))
    return result(ell, ABORT_COUNTS if ell == 0 else None)
