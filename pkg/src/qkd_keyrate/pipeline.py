"""End-to-end rate evaluation: channel statistics to key length.

This is the single code path shared by the sweep, the optimizer, and
the validation suites, so every consumer agrees on how the pieces chain
together.  The channel statistics default to the expected values of the
system model; sampled counts can be substituted for coverage studies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .budget import EpsilonBudget
from .channel import ChannelConfig, ChannelModel
from .decoy import (
    IntensitySet,
    ObservedCounts,
    decoy_cell_bounds,
    m0_lower_exact,
    m0_lower_fluct,
    m1_lower_exact,
    m1_lower_fluct,
)
from .key_length import KeyRateResult, key_length, lambda_ec
from .phase_error import n_ph_upper_general
from .qubit_model import (
    EncodingFlawModel,
    THETA_0X,
    THETA_0Z,
    THETA_1Z,
    VirtualStateCoeffs,
    apply_filter,
    bloch_of_state,
    build_transmission_matrix,
    virtual_state_coeffs,
)

__all__ = [
    "ProtocolParams",
    "build_source_model",
    "evaluate_rate",
    "observed_error_rate",
]

K_D2_DEFAULT = 2e-4

_CELLS = tuple(
    (a, y, b, y1)
    for a in ("Z", "X")
    for y in (0, 1)
    for b in ("Z", "X")
    for y1 in (0, 1)
)


@dataclass(frozen=True)
class ProtocolParams:
    """Free protocol parameters; the weakest decoy intensity is pinned."""

    p_z: float
    p_ks: float
    p_kd1: float
    k_s: float
    k_d1: float
    k_d2: float = K_D2_DEFAULT

    def intensities(self, mode: str, r: float) -> IntensitySet:
        """Intensity levels for ``mode``; raises ValueError if infeasible."""
        if mode == "exact":
            return IntensitySet.exact(
                k_s=self.k_s, k_d1=self.k_d1, k_d2=self.k_d2,
                p_s=self.p_ks, p_d1=self.p_kd1,
            )
        if mode == "fluct":
            return IntensitySet.fluctuating(
                k_s=self.k_s, k_d1=self.k_d1, k_d2=self.k_d2,
                p_s=self.p_ks, p_d1=self.p_kd1, r=r,
            )
        raise ValueError(f"mode must be 'exact' or 'fluct', got {mode!r}")


def build_source_model(
    xi: float, p_z: float, gamma: float = 1.0
) -> VirtualStateCoeffs:
    """Virtual-state coefficients for the proportional flaw model."""
    flaw = (
        EncodingFlawModel(model_xi=xi) if xi != 0.0 else EncodingFlawModel.exact()
    )
    filtered = [
        apply_filter(bloch_of_state(theta, flaw, gamma))
        for theta in (THETA_0Z, THETA_1Z, THETA_0X)
    ]
    tm = build_transmission_matrix(*filtered)
    return virtual_state_coeffs(filtered[0], filtered[1], tm.a_inv, p_z)


def observed_error_rate(counts: ObservedCounts) -> float:
    """Z-basis bit error rate of the signal intensity from raw cells."""
    gain = sum(
        counts.cell("Z", i, "Z", j, "s") for i in (0, 1) for j in (0, 1)
    )
    if gain <= 0.0:
        return 0.0
    err = counts.cell("Z", 0, "Z", 1, "s") + counts.cell("Z", 1, "Z", 0, "s")
    return err / gain


def evaluate_rate(
    cfg: ChannelConfig,
    params: ProtocolParams,
    budget: EpsilonBudget | None,
    n_total: float,
    mode: str = "exact",
    f_ec: float = 1.16,
    counts: ObservedCounts | None = None,
    e_z: float | None = None,
    qm: VirtualStateCoeffs | None = None,
    model: ChannelModel | None = None,
) -> KeyRateResult:
    """Secret-key result at one parameter point.

    Infeasible parameters (intensity ordering, probability simplex)
    raise ValueError; statistical aborts come back in the result.  A
    precomputed ``counts`` (e.g. a Monte-Carlo draw) bypasses the
    expected-statistics channel; ``qm`` can be supplied to amortize the
    source characterisation across calls that share xi and p_z, and
    ``model`` to share click tables across calls on the same link.
    """
    intens = params.intensities(mode, cfg.fluct_r)
    if counts is None:
        if model is None:
            model = ChannelModel(cfg)
        counts, e_z = model.expected(intens, params.p_z, n_total)
    elif e_z is None:
        e_z = observed_error_rate(counts)

    if mode == "exact":
        m0 = m0_lower_exact(counts, intens, budget)
        m1 = m1_lower_exact(counts, intens, budget, m0)
    else:
        m0 = m0_lower_fluct(counts, intens, budget)
        m1 = m1_lower_fluct(counts, intens, budget, m0)

    cells = {
        cell: decoy_cell_bounds(cell, counts, intens, budget, mode)
        for cell in _CELLS
    }
    if qm is None:
        qm = build_source_model(cfg.xi, params.p_z)
    eph = n_ph_upper_general(qm, cells, m1, budget)

    z_ks = counts.z_k("s")
    lam = lambda_ec(z_ks, e_z, f_ec)
    return key_length(
        m0, m1, eph, lam, budget,
        n_total=n_total, e_z=e_z, z_ks_size=z_ks,
    )
