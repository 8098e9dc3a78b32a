"""Tests for the epsilon budget construction and allocation table."""

import pytest

from qkd_keyrate.budget import CELL_IDS, EpsilonBudget, allocation_names

EPS_SEC = 1e-10
EPS_C = 1e-15


def test_static_allocation_counts():
    # 12 aggregate + 8 martingale + 16 cells * 5 estimates * 2 (Hoeffding pair)
    assert len(allocation_names("exact")) == 180
    # 7 aggregate + 8 martingale + 16 cells * 5 estimates
    assert len(allocation_names("fluct")) == 95


def test_names_are_unique():
    for mode in ("exact", "fluct"):
        names = allocation_names(mode)
        assert len(set(names)) == len(names)


def test_cell_ids_cover_all_sixteen():
    assert len(CELL_IDS) == 16
    assert "Z0X1" in CELL_IDS
    assert "X1Z0" in CELL_IDS


def test_equal_split():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact")
    eps_s = EPS_SEC - EPS_C
    assert b.eps_s == pytest.approx(eps_s, rel=1e-12)
    assert b.eta == pytest.approx(0.5 * eps_s**2, rel=1e-12)
    per = b.eta / 180
    assert b.alloc("m0.final") == pytest.approx(per, rel=1e-12)
    assert b.alloc("cell.Z0X1.d1.lo") == pytest.approx(per, rel=1e-12)
    assert sum(b.allocations.values()) == pytest.approx(b.eta, rel=1e-12)


def test_exact_mode_has_hoeffding_pairs():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact")
    assert "z.d2.vac.lo.H" in b.allocations
    assert "cell.X0X0.s.hi.H" in b.allocations


def test_fluct_mode_has_no_hoeffding_pairs():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="fluct")
    assert not any(name.endswith(".H") for name in b.allocations)
    assert "z.d2.vac.lo" in b.allocations


def test_phase_martingale_names():
    # one epsilon per (receiver outcome, collective outcome) pair in use
    expected = {
        "ph.az.1.1", "ph.az.0.2",
        "ph.az.0.3", "ph.az.0.4", "ph.az.0.5",
        "ph.az.1.3", "ph.az.1.4", "ph.az.1.5",
    }
    for mode in ("exact", "fluct"):
        b = EpsilonBudget.build(EPS_SEC, EPS_C, mode=mode)
        assert expected <= set(b.allocations)


def test_eta_frac():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="fluct", eta_frac=0.25)
    assert b.eta == pytest.approx(0.25 * b.eps_s**2, rel=1e-12)


def test_overrides_replace_and_resum():
    name = "m1.final"
    b0 = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact")
    bumped = 10 * b0.alloc(name)
    b1 = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact", overrides={name: bumped})
    assert b1.alloc(name) == pytest.approx(bumped, rel=1e-12)
    assert b1.eta == pytest.approx(b0.eta + 9 * b0.alloc(name), rel=1e-12)


def test_override_unknown_name_rejected():
    with pytest.raises(ValueError):
        EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact", overrides={"nope": 1e-30})


def test_unknown_alloc_is_error():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact")
    with pytest.raises(KeyError):
        b.alloc("z.d1.vac")


def test_allocations_read_only():
    b = EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact")
    with pytest.raises(TypeError):
        b.allocations["m0.final"] = 1e-30


def test_validation():
    with pytest.raises(ValueError):
        EpsilonBudget.build(1e-15, 1e-15, mode="exact")  # eps_s = 0
    with pytest.raises(ValueError):
        EpsilonBudget.build(EPS_SEC, EPS_C, mode="exact", eta_frac=1.0)
    with pytest.raises(ValueError):
        allocation_names("other")
