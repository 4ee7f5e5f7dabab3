import json

import numpy as np
import pytest

from isl.ambiguity import (
    AmbiguityPair,
    evaluate_pair,
    matching_phase_shifts,
    phase_gap,
    search_ambiguous_pair,
)
from isl.errors import BudgetExhausted
from isl.forward import phase_shifts
from isl.potential import piecewise_constant, square_well


@pytest.fixture(scope="module")
def pair():
    return search_ambiguous_pair(k=1.0, L=15, target_phase_gap=1e-3, min_potential_gap=0.5, seed=0)


def test_identical_pair_rejected():
    q1 = piecewise_constant([0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        evaluate_pair(q1, piecewise_constant([0.0, 1.0], [1.0]), 1.0, 15)


def test_close_pair_rejected():
    q1 = piecewise_constant([0.0, 1.0], [1.0])
    q2 = piecewise_constant([0.0, 0.5, 1.0], [1.0, 1.2])
    with pytest.raises(ValueError):
        evaluate_pair(q1, q2, 1.0, 15, min_potential_gap=0.5)


def test_search_meets_targets(pair):
    assert pair.target_met
    assert pair.phase_gap <= 1e-3
    assert pair.potential_gap >= 0.5
    assert len(pair.q2.heights) <= 4
    assert pair.q2.support_radius == pytest.approx(pair.q1.support_radius)


def test_gaps_recomputed_by_forward_solver(pair):
    d1 = phase_shifts(pair.q1, 1.0, 15).delta
    d2 = phase_shifts(pair.q2, 1.0, 15).delta
    gap = np.max(np.abs(np.angle(np.exp(2j * (d1 - d2))) / 2))
    assert pair.phase_gap == pytest.approx(gap, rel=1e-12)
    assert phase_gap(pair.q1, pair.q2, 1.0, 15) == pair.phase_gap


def test_doubling_L_only_adds_tiny_shifts(pair):
    d1 = phase_shifts(pair.q1, 1.0, 30).delta
    d2 = phase_shifts(pair.q2, 1.0, 30).delta
    assert phase_gap(pair.q1, pair.q2, 1.0, 30) == pytest.approx(pair.phase_gap, rel=1e-9)
    assert np.max(np.abs(d1[16:])) < 1e-6 and np.max(np.abs(d2[16:])) < 1e-6


def test_radius_estimates_agree(pair):
    a1 = phase_shifts(pair.q1, 1.0, 15).support_radius_estimates
    a2 = phase_shifts(pair.q2, 1.0, 15).support_radius_estimates
    assert abs(a1[15] - a2[15]) <= 0.15 * a1[15]


def test_pair_json(tmp_path, pair):
    pair.save(tmp_path / "p.json")
    d = json.loads((tmp_path / "p.json").read_text())
    assert set(d) == {"k", "L", "q1", "q2", "phase_gap", "potential_gap"}
    assert set(d["q2"]) == {"breaks", "heights"}


def test_search_is_deterministic(pair):
    again = search_ambiguous_pair(k=1.0, L=15, seed=0)
    assert again.q2.breaks == pair.q2.breaks and again.q2.heights == pair.q2.heights


def test_budget_exhausted():
    with pytest.raises(BudgetExhausted):
        search_ambiguous_pair(budget=30, target_phase_gap=1e-4, strict=True)
    best = search_ambiguous_pair(budget=30, target_phase_gap=1e-4)
    assert isinstance(best, AmbiguityPair) and not best.target_met


def test_matching_shifts_of_barrier():
    q = square_well(2.0)
    ref = phase_shifts(q, 1.3, 12).delta
    np.testing.assert_allclose(matching_phase_shifts(q.breaks, q.heights, 1.3, 12)[:6], ref[:6], atol=1e-12)
