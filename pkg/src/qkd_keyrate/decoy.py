"""Decoy-state estimation of vacuum and single-photon contributions.

Three intensity settings (signal ``s`` and decoys ``d1``, ``d2``) yield a
linear program small enough to solve in closed form: lower bounds m0^L and
m1^L on the numbers of detected vacuum and single-photon signal-intensity
events in the sifted Z key, plus generalized lower/upper bounds for any
(sender state, receiver basis/outcome) cell.  Two intensity-control modes
are supported: ``exact`` (the set intensity is the emitted one) and
``fluct`` (only a range [k-, k+] per setting is known, in which case
every inequality is evaluated at its worst-case endpoint and mean values
are estimated without any independence assumption).

Every bound is returned together with its accumulated failure
probability.  Passing ``budget=None`` zeroes all statistical deviations,
which turns the bounds into their asymptotic (infinite-key) counterparts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from .budget import EpsilonBudget
from .concentration import azuma_dev, best_mean_bound, hoeffding_dev

__all__ = [
    "K_LABELS",
    "BoundKind",
    "CellBounds",
    "DecoyBound",
    "IntensityLevel",
    "IntensitySet",
    "ObservedCounts",
    "decoy_cell_bounds",
    "m0_lower_exact",
    "m0_lower_fluct",
    "m1_lower_exact",
    "m1_lower_fluct",
    "poisson_pk",
]

K_LABELS = ("s", "d1", "d2")

# cell key: (sender basis, sender bit, receiver basis, receiver bit, intensity label)
CellKey = tuple[str, int, str, int, str]
# config key: (sender basis, sender bit, receiver basis)
ConfigKey = tuple[str, int, str]


def poisson_pk(n: int, k: float) -> float:
    """Poisson photon-number mass e^{-k} k^n / n!."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-k + n * math.log(k) - math.lgamma(n + 1))


@dataclass(frozen=True)
class IntensityLevel:
    """One intensity setting: nominal value, known range and selection probability."""

    nominal: float
    lo: float
    hi: float
    prob: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo <= self.nominal <= self.hi):
            raise ValueError("need 0 <= lo <= nominal <= hi")
        if not (0.0 < self.prob < 1.0):
            raise ValueError("selection probability must lie in (0, 1)")


@dataclass(frozen=True)
class IntensitySet:
    """The three intensity settings with their ordering constraints.

    The closed-form bounds require k_d1^- > k_d2^+ and
    k_s^- > k_d1^+ + k_d2^-; violating either makes a denominator vanish
    or flip sign, so both are enforced at construction.
    """

    s: IntensityLevel
    d1: IntensityLevel
    d2: IntensityLevel

    def __post_init__(self) -> None:
        total = self.s.prob + self.d1.prob + self.d2.prob
        if abs(total - 1.0) > 1e-9:
            raise ValueError("selection probabilities must sum to 1")
        if not self.d1.lo > self.d2.hi:
            raise ValueError("need k_d1^- > k_d2^+")
        if not self.s.lo > self.d1.hi + self.d2.lo:
            raise ValueError("need k_s^- > k_d1^+ + k_d2^-")

    @classmethod
    def exact(
        cls, k_s: float, k_d1: float, k_d2: float, p_s: float, p_d1: float
    ) -> "IntensitySet":
        p_d2 = 1.0 - p_s - p_d1
        return cls(
            s=IntensityLevel(k_s, k_s, k_s, p_s),
            d1=IntensityLevel(k_d1, k_d1, k_d1, p_d1),
            d2=IntensityLevel(k_d2, k_d2, k_d2, p_d2),
        )

    @classmethod
    def fluctuating(
        cls, k_s: float, k_d1: float, k_d2: float, p_s: float, p_d1: float, r: float
    ) -> "IntensitySet":
        """Symmetric relative ranges [(1-r)k, (1+r)k]; r=0 recovers exact()."""
        if not (0.0 <= r < 1.0):
            raise ValueError("relative fluctuation r must lie in [0, 1)")
        p_d2 = 1.0 - p_s - p_d1
        return cls(
            s=IntensityLevel(k_s, (1 - r) * k_s, (1 + r) * k_s, p_s),
            d1=IntensityLevel(k_d1, (1 - r) * k_d1, (1 + r) * k_d1, p_d1),
            d2=IntensityLevel(k_d2, (1 - r) * k_d2, (1 + r) * k_d2, p_d2),
        )

    def level(self, label: str) -> IntensityLevel:
        if label not in K_LABELS:
            raise KeyError(label)
        return getattr(self, label)

    def p_s_and_vacuum_lo(self) -> float:
        # p^-(k_s AND 0 photons) = p_s e^{-k_s^+}
        return self.s.prob * math.exp(-self.s.hi)

    def p_s_and_single_lo(self) -> float:
        # k e^{-k} is unimodal with its maximum at k=1, so the minimum over
        # the range sits at an endpoint
        return self.s.prob * min(
            self.s.lo * math.exp(-self.s.lo), self.s.hi * math.exp(-self.s.hi)
        )

    def p_s_and_single_hi(self) -> float:
        if self.s.lo <= 1.0 <= self.s.hi:
            return self.s.prob * math.exp(-1.0)
        return self.s.prob * max(
            self.s.lo * math.exp(-self.s.lo), self.s.hi * math.exp(-self.s.hi)
        )


class BoundKind(enum.Enum):
    VAC_LOWER = "vac_lower"
    SINGLE_LOWER = "single_lower"
    SINGLE_UPPER = "single_upper"


@dataclass(frozen=True)
class DecoyBound:
    """A decoy bound with its failure-probability bookkeeping.

    ``value`` is the count-level bound, clamped to [0, cap] where cap is
    the observed signal-intensity total of the estimated population.
    ``mu`` is the mean-level bound before the final mean-to-count
    deviation and ``mean_failure`` the failure probability of the mean
    estimates alone; downstream formulas that reuse ``mu`` accumulate
    ``mean_failure`` rather than ``failure_prob``.
    """

    value: float
    failure_prob: float
    kind: BoundKind
    mu: float = 0.0
    mean_failure: float = 0.0

    def __post_init__(self) -> None:
        if self.value < 0.0:
            raise ValueError("bound value must be clamped to >= 0")
        if not 0.0 <= self.failure_prob < 1.0:
            raise ValueError("failure_prob must lie in [0, 1)")


@dataclass(frozen=True)
class CellBounds:
    lower0: DecoyBound
    lower1: DecoyBound
    upper1: DecoyBound


@dataclass
class ObservedCounts:
    """Sifted detection statistics of one protocol run.

    ``z_by_k`` holds the Z-basis coincidence counts per intensity label;
    ``cells`` maps (sender basis, sender bit, receiver basis, receiver
    bit, intensity label) to a count; ``trials_by_config`` maps (sender
    basis, sender bit, receiver basis) to the number of trials with that
    setting combination, which is what the martingale deviations range
    over.  Counts may be real-valued (expected statistics) or integer
    (sampled).
    """

    z_by_k: Mapping[str, float]
    cells: Mapping[CellKey, float]
    n_z: float
    n_total: float
    trials_by_config: Mapping[ConfigKey, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_z < 0 or self.n_total < 0 or self.n_z > self.n_total:
            raise ValueError("need 0 <= n_z <= n_total")
        for label, count in self.z_by_k.items():
            if label not in K_LABELS:
                raise ValueError(f"unknown intensity label {label!r}")
            if count < 0:
                raise ValueError("counts must be nonnegative")
        if any(c < 0 for c in self.cells.values()):
            raise ValueError("counts must be nonnegative")

    @property
    def z_tot(self) -> float:
        return sum(self.z_by_k.values())

    def z_k(self, label: str) -> float:
        return self.z_by_k.get(label, 0.0)

    def cell(self, a: str, y: int, b: str, y1: int, k: str) -> float:
        return self.cells.get((a, y, b, y1, k), 0.0)

    def config_trials(self, a: str, y: int, b: str) -> float:
        return self.trials_by_config.get((a, y, b), 0.0)


def _count_lower(mu: float, eps: float, fallback_trials: float) -> float:
    """Count lower bound from a mean lower bound, m >= mu - dev.

    The multiplicative deviation sqrt(2 mu ln(1/eps)) applies only while
    the mean dominates 2 ln(1/eps); below that the additive (Hoeffding)
    deviation over the trial count takes over.
    """
    if mu <= 0.0:
        return 0.0
    log_inv = -math.log(eps)
    if mu > 2.0 * log_inv:
        dev = math.sqrt(2.0 * mu * log_inv)
    else:
        dev = hoeffding_dev(fallback_trials, eps)
    return max(0.0, mu - dev)


def _mean_exact(
    counts: ObservedCounts,
    budget: EpsilonBudget | None,
    observed: float,
    total: float,
    direction: str,
    name: str,
) -> tuple[float, float]:
    if budget is None:
        return observed, 0.0
    return best_mean_bound(
        observed, total, budget.alloc(name), direction, budget.alloc(name + ".H")
    )


def _mean_fluct(
    budget: EpsilonBudget | None,
    observed: float,
    trials: float,
    direction: str,
    name: str,
) -> tuple[float, float]:
    if budget is None:
        return observed, 0.0
    eps = budget.alloc(name)
    dev = azuma_dev(trials, eps)
    return (observed - dev if direction == "lower" else observed + dev), eps


def m0_lower_exact(
    counts: ObservedCounts, intens: IntensitySet, budget: EpsilonBudget | None
) -> DecoyBound:
    """Lower bound on the vacuum contribution to the signal Z key (exact mode).

    mu_0^L combines a lower estimate of the weak-decoy Z mean with an
    upper estimate of the strong-decoy one; the final step subtracts the
    mean-to-count deviation.
    """
    k_s, k_d1, k_d2 = intens.s.nominal, intens.d1.nominal, intens.d2.nominal
    z_tot = counts.z_tot
    zm_d2, f_d2 = _mean_exact(
        counts, budget, counts.z_k("d2"), z_tot, "lower", "z.d2.vac.lo"
    )
    zp_d1, f_d1 = _mean_exact(
        counts, budget, counts.z_k("d1"), z_tot, "upper", "z.d1.vac.hi"
    )
    mu = (
        intens.s.prob
        * math.exp(-k_s)
        / (k_d1 - k_d2)
        * (
            k_d1 * math.exp(k_d2) / intens.d2.prob * zm_d2
            - k_d2 * math.exp(k_d1) / intens.d1.prob * zp_d1
        )
    )
    mu = max(0.0, mu)
    mean_failure = f_d2 + f_d1
    if budget is None:
        return DecoyBound(mu, 0.0, BoundKind.VAC_LOWER, mu=mu)
    eps_final = budget.alloc("m0.final")
    value = min(_count_lower(mu, eps_final, counts.n_z), counts.z_k("s"))
    return DecoyBound(
        value, mean_failure + eps_final, BoundKind.VAC_LOWER, mu=mu,
        mean_failure=mean_failure,
    )


def m1_lower_exact(
    counts: ObservedCounts,
    intens: IntensitySet,
    budget: EpsilonBudget | None,
    m0_bound: DecoyBound,
) -> DecoyBound:
    """Lower bound on the single-photon contribution (exact mode).

    Uses the two-decoy closed form; the vacuum mean bound mu_0^L enters
    through ``m0_bound.mu``, and its mean-estimate failures are carried
    into the accumulated failure probability.
    """
    k_s, k_d1, k_d2 = intens.s.nominal, intens.d1.nominal, intens.d2.nominal
    z_tot = counts.z_tot
    zm_d1, f_d1 = _mean_exact(
        counts, budget, counts.z_k("d1"), z_tot, "lower", "z.d1.sin.lo"
    )
    zp_d2, f_d2 = _mean_exact(
        counts, budget, counts.z_k("d2"), z_tot, "upper", "z.d2.sin.hi"
    )
    zp_s, f_s = _mean_exact(
        counts, budget, counts.z_k("s"), z_tot, "upper", "z.s.sin.hi"
    )
    p_s_vac = intens.s.prob * math.exp(-k_s)
    mu = (
        intens.s.prob
        * k_s**2
        * math.exp(-k_s)
        / ((k_d1 - k_d2) * (k_s - k_d1 - k_d2))
        * (
            math.exp(k_d1) / intens.d1.prob * zm_d1
            - math.exp(k_d2) / intens.d2.prob * zp_d2
            + (k_d1**2 - k_d2**2)
            / k_s**2
            * (m0_bound.mu / p_s_vac - math.exp(k_s) / intens.s.prob * zp_s)
        )
    )
    mu = max(0.0, mu)
    mean_failure = m0_bound.mean_failure + f_d1 + f_d2 + f_s
    if budget is None:
        return DecoyBound(mu, 0.0, BoundKind.SINGLE_LOWER, mu=mu)
    eps_final = budget.alloc("m1.final")
    value = min(_count_lower(mu, eps_final, counts.n_z), counts.z_k("s"))
    return DecoyBound(
        value, mean_failure + eps_final, BoundKind.SINGLE_LOWER, mu=mu,
        mean_failure=mean_failure,
    )


def m0_lower_fluct(
    counts: ObservedCounts, intens: IntensitySet, budget: EpsilonBudget | None
) -> DecoyBound:
    """Vacuum lower bound when only intensity ranges are known.

    Worst-case range endpoints replace the nominal intensities, and the
    Z means are estimated by martingale deviations over the N_z basis
    coincidences, so no independence between trials is assumed.
    """
    zm_d2, f_d2 = _mean_fluct(
        budget, counts.z_k("d2"), counts.n_z, "lower", "z.d2.vac.lo"
    )
    zp_d1, f_d1 = _mean_fluct(
        budget, counts.z_k("d1"), counts.n_z, "upper", "z.d1.vac.hi"
    )
    mu = (
        intens.p_s_and_vacuum_lo()
        / (intens.d1.lo - intens.d2.hi)
        * (
            intens.d1.lo * math.exp(intens.d2.lo) / intens.d2.prob * zm_d2
            - intens.d2.hi * math.exp(intens.d1.hi) / intens.d1.prob * zp_d1
        )
    )
    mu = max(0.0, mu)
    mean_failure = f_d2 + f_d1
    if budget is None:
        return DecoyBound(mu, 0.0, BoundKind.VAC_LOWER, mu=mu)
    eps_final = budget.alloc("m0.final")
    value = min(_count_lower(mu, eps_final, counts.n_z), counts.z_k("s"))
    return DecoyBound(
        value, mean_failure + eps_final, BoundKind.VAC_LOWER, mu=mu,
        mean_failure=mean_failure,
    )


def m1_lower_fluct(
    counts: ObservedCounts,
    intens: IntensitySet,
    budget: EpsilonBudget | None,
    m0_bound: DecoyBound,
) -> DecoyBound:
    """Single-photon lower bound for the intensity-fluctuation case."""
    s, d1, d2 = intens.s, intens.d1, intens.d2
    zm_d1, f_d1 = _mean_fluct(
        budget, counts.z_k("d1"), counts.n_z, "lower", "z.d1.sin.lo"
    )
    zp_d2, f_d2 = _mean_fluct(
        budget, counts.z_k("d2"), counts.n_z, "upper", "z.d2.sin.hi"
    )
    zp_s, f_s = _mean_fluct(
        budget, counts.z_k("s"), counts.n_z, "upper", "z.s.sin.hi"
    )
    mu = (
        intens.p_s_and_single_lo()
        * s.lo
        / ((d1.hi - d2.lo) * (s.lo - d1.hi - d2.lo))
        * (
            math.exp(d1.lo) / d1.prob * zm_d1
            - math.exp(d2.hi) / d2.prob * zp_d2
            - (d1.hi**2 - d2.lo**2)
            / s.lo**2
            * (
                math.exp(s.hi) / s.prob * zp_s
                - m0_bound.mu / intens.p_s_and_vacuum_lo()
            )
        )
    )
    mu = max(0.0, mu)
    mean_failure = m0_bound.mean_failure + f_d1 + f_d2 + f_s
    if budget is None:
        return DecoyBound(mu, 0.0, BoundKind.SINGLE_LOWER, mu=mu)
    eps_final = budget.alloc("m1.final")
    value = min(_count_lower(mu, eps_final, counts.n_z), counts.z_k("s"))
    return DecoyBound(
        value, mean_failure + eps_final, BoundKind.SINGLE_LOWER, mu=mu,
        mean_failure=mean_failure,
    )


def decoy_cell_bounds(
    cell: tuple[str, int, str, int],
    counts: ObservedCounts,
    intens: IntensitySet,
    budget: EpsilonBudget | None,
    mode: str,
) -> CellBounds:
    """Generalized decoy bounds for one (sender state, receiver outcome) cell.

    Returns (lower0, lower1, upper1): a lower bound on the vacuum count,
    and lower/upper bounds on the single-photon count, all restricted to
    signal-intensity emissions within the cell.  The exact and fluct
    modes differ only in which endpoints and mean estimators are used;
    exact mode has lo == hi so the endpoint choice is vacuous there.
    """
    if mode not in ("exact", "fluct"):
        raise ValueError(f"mode must be 'exact' or 'fluct', got {mode!r}")
    a, y, b, y1 = cell
    cell_id = f"{a}{y}{b}{y1}"
    obs = {k: counts.cell(a, y, b, y1, k) for k in K_LABELS}
    cap = obs["s"]
    s, d1, d2 = intens.s, intens.d1, intens.d2

    def mean(label: str, direction: str, est: str) -> tuple[float, float]:
        name = f"cell.{cell_id}.{est}"
        if mode == "exact":
            return _mean_exact(
                counts, budget, obs[label], sum(obs.values()), direction, name
            )
        trials = counts.config_trials(a, y, b)
        return _mean_fluct(budget, obs[label], trials, direction, name)

    c_d2_lo, f_d2_lo = mean("d2", "lower", "d2.lo")
    c_d1_hi, f_d1_hi = mean("d1", "upper", "d1.hi")
    c_d1_lo, f_d1_lo = mean("d1", "lower", "d1.lo")
    c_d2_hi, f_d2_hi = mean("d2", "upper", "d2.hi")
    c_s_hi, f_s_hi = mean("s", "upper", "s.hi")

    p_vac = intens.p_s_and_vacuum_lo()
    mu0 = (
        p_vac
        / (d1.lo - d2.hi)
        * (
            d1.lo * math.exp(d2.lo) / d2.prob * c_d2_lo
            - d2.hi * math.exp(d1.hi) / d1.prob * c_d1_hi
        )
    )
    low0 = min(max(0.0, mu0), cap)
    lower0 = DecoyBound(
        low0, f_d2_lo + f_d1_hi, BoundKind.VAC_LOWER, mu=low0,
        mean_failure=f_d2_lo + f_d1_hi,
    )

    mu1 = (
        intens.p_s_and_single_lo()
        * s.lo
        / ((d1.hi - d2.lo) * (s.lo - d1.hi - d2.lo))
        * (
            math.exp(d1.lo) / d1.prob * c_d1_lo
            - math.exp(d2.hi) / d2.prob * c_d2_hi
            + (d1.hi**2 - d2.lo**2)
            / s.lo**2
            * (lower0.value / p_vac - math.exp(s.hi) / s.prob * c_s_hi)
        )
    )
    low1 = min(max(0.0, mu1), cap)
    f_low1 = lower0.failure_prob + f_d1_lo + f_d2_hi + f_s_hi
    lower1 = DecoyBound(
        low1, f_low1, BoundKind.SINGLE_LOWER, mu=low1, mean_failure=f_low1
    )

    mu1_up = (
        intens.p_s_and_single_hi()
        / (d1.lo - d2.hi)
        * (
            math.exp(d1.hi) / d1.prob * c_d1_hi
            - math.exp(d2.lo) / d2.prob * c_d2_lo
        )
    )
    up1 = min(max(0.0, mu1_up), cap)
    upper1 = DecoyBound(
        up1, f_d1_hi + f_d2_lo, BoundKind.SINGLE_UPPER, mu=up1,
        mean_failure=f_d1_hi + f_d2_lo,
    )
    return CellBounds(lower0, lower1, upper1)
