"""Validation suites: bound coverage, decoy sandwich, estimator cross-check.

Everything here is deterministic for a fixed seed, so a report can be
regenerated byte-for-byte.  The coverage suite draws seeded Monte-Carlo
samples and checks that each concentration bound fails no more often
than its epsilon promises; the sandwich suite checks the decoy bounds
against exactly computed vacuum/single-photon truths; the cross-check
suite compares the two independent phase-error estimators.
"""

from __future__ import annotations

import numpy as np

from .budget import EpsilonBudget
from .channel import ChannelConfig, ChannelModel, FluctuationDensity, gauss_expect
from .concentration import (
    azuma_dev,
    chernoff_devs,
    hoeffding_dev,
    mult_chernoff_devs,
)
from .decoy import (
    IntensitySet,
    ObservedCounts,
    decoy_cell_bounds,
    m0_lower_exact,
    m0_lower_fluct,
    m1_lower_exact,
    m1_lower_fluct,
    poisson_pk,
)
from .phase_error import n_ph_appendixE, n_ph_upper_general
from .pipeline import ProtocolParams, build_source_model

__all__ = [
    "coverage_suite",
    "sandwich_suite",
    "crosscheck_suite",
    "run_validation",
]

_SENDER_STATES = (("Z", 0), ("Z", 1), ("X", 0))
_CELLS = tuple(
    (a, y, b, y1) for a, y in _SENDER_STATES for b in ("Z", "X") for y1 in (0, 1)
)


def _record(bound: str, n: int, eps: float, side: str, violations: int,
            trials: int) -> dict:
    freq = violations / trials
    return {
        "bound": bound,
        "n": n,
        "eps": eps,
        "side": side,
        "violations": violations,
        "frequency": freq,
        "pass": freq <= eps,
    }


def coverage_suite(
    seed: int,
    trials: int = 100_000,
    ns: tuple[int, ...] = (1_000, 10_000),
    eps_values: tuple[float, ...] = (1e-2, 1e-3),
) -> dict:
    """Empirical violation frequency of every concentration bound.

    Binomial draws cover the independent-trials bounds; the martingale
    bound is exercised on an adversarially adaptive sequence whose click
    probability flips against the sign of the running deviation, which
    breaks independence but not the martingale property.
    """
    rng = np.random.default_rng(seed)
    p = 0.1
    checks: list[dict] = []

    for n in ns:
        mu = n * p
        x = rng.binomial(n, p, size=trials)

        # the observation-driven deviations only depend on the observed
        # count, so evaluate them once per distinct value
        uniq, inv = np.unique(x, return_inverse=True)

        for eps in eps_values:
            cd = chernoff_devs(mu, eps, eps)
            checks.append(_record(
                "chernoff", n, eps, "below",
                int(np.sum(x < mu - cd.lower_dev)), trials,
            ))
            checks.append(_record(
                "chernoff", n, eps, "above",
                int(np.sum(x > mu + cd.upper_dev)), trials,
            ))

            mc = [mult_chernoff_devs(float(v), n, eps, eps, eps) for v in uniq]
            dev_lo = np.array([d.lower_dev for d in mc])[inv]
            dev_hi = np.array([d.upper_dev for d in mc])[inv]
            checks.append(_record(
                "mult_chernoff", n, eps, "mean_above_upper",
                int(np.sum(mu > x + dev_hi)), trials,
            ))
            checks.append(_record(
                "mult_chernoff", n, eps, "mean_below_lower",
                int(np.sum(mu < x - dev_lo)), trials,
            ))

            hd = hoeffding_dev(n, eps)
            checks.append(_record(
                "hoeffding", n, eps, "below",
                int(np.sum(x < mu - hd)), trials,
            ))
            checks.append(_record(
                "hoeffding", n, eps, "above",
                int(np.sum(x > mu + hd)), trials,
            ))

        # adaptive sequence: probability jumps with the deviation sign
        dev_sum = np.zeros(trials)
        for _ in range(n):
            p_t = np.where(dev_sum > 0.0, 0.8, 0.2)
            clicks = rng.random(trials) < p_t
            dev_sum += clicks - p_t
        for eps in eps_values:
            ad = azuma_dev(n, eps)
            checks.append(_record(
                "azuma_adaptive", n, eps, "above",
                int(np.sum(dev_sum > ad)), trials,
            ))
            checks.append(_record(
                "azuma_adaptive", n, eps, "below",
                int(np.sum(dev_sum < -ad)), trials,
            ))

    return {
        "trials": trials,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def _photon_weights(k: float, r: float, max_n: int) -> np.ndarray:
    """P(n photons) for intensity k, quadrature-averaged when r > 0."""
    if r == 0.0:
        return np.array([poisson_pk(n, k) for n in range(max_n)])
    dens = FluctuationDensity.for_intensity(k, r)
    return np.array([
        gauss_expect(lambda kk: poisson_pk(n, kk), dens) for n in range(max_n)
    ])


def sandwich_suite(
    distances: tuple[float, ...] = (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0),
    rs: tuple[float, ...] = (0.0, 0.02, 0.05),
) -> dict:
    """Decoy bounds against exact vacuum/single-photon truths.

    Synthetic expected statistics are produced from per-cell photon-number
    yield curves, so the true n-photon contributions are known exactly;
    every lower bound must sit below its truth and every upper bound above.
    """
    p_z, p_ks, p_kd1 = 0.7, 0.6, 0.3
    k_s, k_d1, k_d2 = 0.5, 0.1, 2e-4
    n_total = 1e12
    max_n = 80
    p_label = {"s": p_ks, "d1": p_kd1, "d2": 1.0 - p_ks - p_kd1}

    state_prob = {("Z", 0): 0.5 * p_z, ("Z", 1): 0.5 * p_z, ("X", 0): 1.0 - p_z}
    basis_prob = {"Z": p_z, "X": 1.0 - p_z}

    points = []
    for dist in distances:
        eta = 0.15 * 10.0 ** (-0.2 * dist / 10.0)
        base = 1.0 - (1.0 - 5e-7) * (1.0 - eta) ** np.arange(max_n)
        for r in rs:
            mode = "exact" if r == 0.0 else "fluct"
            if mode == "exact":
                intens = IntensitySet.exact(
                    k_s=k_s, k_d1=k_d1, k_d2=k_d2, p_s=p_ks, p_d1=p_kd1
                )
            else:
                intens = IntensitySet.fluctuating(
                    k_s=k_s, k_d1=k_d1, k_d2=k_d2, p_s=p_ks, p_d1=p_kd1, r=r
                )
            weights = {
                lab: _photon_weights(getattr(intens, lab).nominal, r, max_n)
                for lab in ("s", "d1", "d2")
            }

            cells: dict = {}
            trials_by_config: dict = {}
            truth = {}
            for idx, (a, y, b, y1) in enumerate(_CELLS):
                n_ayb = n_total * state_prob[(a, y)] * basis_prob[b]
                trials_by_config[(a, y, b)] = n_ayb
                yields = (0.15 + 0.05 * idx) * base  # cell-to-cell spread
                for lab in ("s", "d1", "d2"):
                    cells[(a, y, b, y1, lab)] = (
                        n_ayb * p_label[lab] * float(weights[lab] @ yields)
                    )
                truth[(a, y, b, y1)] = (
                    n_ayb * p_label["s"] * weights["s"][0] * yields[0],
                    n_ayb * p_label["s"] * weights["s"][1] * yields[1],
                )
            z_by_k = {
                lab: sum(
                    cells[("Z", y, "Z", y1, lab)] for y in (0, 1) for y1 in (0, 1)
                )
                for lab in ("s", "d1", "d2")
            }
            counts = ObservedCounts(
                z_by_k=z_by_k,
                cells=cells,
                n_z=n_total * p_z * p_z,
                n_total=n_total,
                trials_by_config=trials_by_config,
            )
            truth0_z = sum(truth[(("Z"), y, "Z", y1)][0] for y in (0, 1) for y1 in (0, 1))
            truth1_z = sum(truth[(("Z"), y, "Z", y1)][1] for y in (0, 1) for y1 in (0, 1))

            budget = EpsilonBudget.build(1e-10, 1e-15, mode)
            if mode == "exact":
                m0 = m0_lower_exact(counts, intens, budget)
                m1 = m1_lower_exact(counts, intens, budget, m0)
            else:
                m0 = m0_lower_fluct(counts, intens, budget)
                m1 = m1_lower_fluct(counts, intens, budget, m0)

            slack = 1e-9 * n_total  # float roundoff on 1e12-scale counts
            violations = []
            if m0.value > truth0_z + slack:
                violations.append("m0_lower")
            if m1.value > truth1_z + slack:
                violations.append("m1_lower")
            margins = [truth0_z - m0.value, truth1_z - m1.value]
            for cell4 in _CELLS:
                cb = decoy_cell_bounds(cell4, counts, intens, budget, mode)
                t0, t1 = truth[cell4]
                label = "".join(str(part) for part in cell4)
                if cb.lower0.value > t0 + slack:
                    violations.append(f"cell.{label}.lower0")
                if cb.lower1.value > t1 + slack:
                    violations.append(f"cell.{label}.lower1")
                if cb.upper1.value < t1 - slack:
                    violations.append(f"cell.{label}.upper1")
                margins.extend(
                    [t0 - cb.lower0.value, t1 - cb.lower1.value,
                     cb.upper1.value - t1]
                )
            points.append({
                "distance_km": dist,
                "r": r,
                "violations": violations,
                "min_margin": float(min(margins)),
                "pass": not violations,
            })

    return {
        "points": points,
        "cells_per_point": len(_CELLS),
        "pass": all(pt["pass"] for pt in points),
    }


def crosscheck_suite(tolerance: float = 1e-9) -> dict:
    """Agreement of the two phase-error estimators on a 50-point grid.

    The general coefficient path and the closed form are independent
    derivations of the same bound; any disagreement beyond roundoff
    means one of them is wrong, so the tolerance is tight.
    """
    xis = (0.0, 0.03675, 0.0735, 0.11025, 0.147)
    pzs = (0.35, 0.5, 0.65, 0.8, 0.9)
    dists = (30.0, 90.0)
    budget = EpsilonBudget.build(1e-10, 1e-15, "exact")
    n_total = 1e12

    points = []
    worst = 0.0
    for xi in xis:
        for dist in dists:
            cfg = ChannelConfig(
                distance_km=dist, det_eff=0.15, dark_prob=5e-7,
                e_mis=0.01, fluct_r=0.0, xi=xi, atten_db_per_km=0.2,
            )
            model = ChannelModel(cfg)
            for p_z in pzs:
                params = ProtocolParams(
                    p_z=p_z, p_ks=0.6, p_kd1=0.3, k_s=0.5, k_d1=0.1
                )
                intens = params.intensities("exact", 0.0)
                counts, _ = model.expected(intens, p_z, n_total)
                cells = {
                    cell: decoy_cell_bounds(cell, counts, intens, budget, "exact")
                    for cell in _CELLS
                }
                m0 = m0_lower_exact(counts, intens, budget)
                m1 = m1_lower_exact(counts, intens, budget, m0)
                qm = build_source_model(xi, p_z)
                general = n_ph_upper_general(qm, cells, m1, budget).n_ph_upper
                closed = n_ph_appendixE(xi, p_z, cells, budget)
                rel = float(abs(general - closed) / max(abs(closed), 1e-300))
                worst = max(worst, rel)
                points.append({
                    "xi": xi, "p_z": p_z, "distance_km": dist,
                    "rel_diff": rel, "pass": rel <= tolerance,
                })
    return {
        "points": points,
        "max_rel_diff": worst,
        "tolerance": tolerance,
        "pass": all(pt["pass"] for pt in points),
    }


def run_validation(seed: int = 0, trials: int = 100_000) -> dict:
    """All three suites plus an overall verdict, as one JSON-ready dict."""
    coverage = coverage_suite(seed, trials)
    sandwich = sandwich_suite()
    crosscheck = crosscheck_suite()
    return {
        "seed": seed,
        "coverage": coverage,
        "decoy_sandwich": sandwich,
        "phase_crosscheck": crosscheck,
        "passed": coverage["pass"] and sandwich["pass"] and crosscheck["pass"],
    }
