import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ife.exceptions import PanelDataError
from ife.panel import (
    Observation,
    PanelData,
    build_panel,
    panel_to_observations,
    read_panel_csv,
    tall_view,
    validate_order_conditions,
    wide_view,
    write_panel_csv,
)


def obs_grid(units, times, treated_from=None, cov=0):
    """Complete grid of observations; treated_from maps unit -> first treated time index."""
    treated_from = treated_from or {}
    recs = []
    for ui, u in enumerate(units):
        for ti, t in enumerate(times):
            tr = u in treated_from and ti >= treated_from[u]
            x = tuple(float(ui + ti + k) for k in range(cov))
            recs.append(Observation(u, t, float(ui * 10 + ti), tr, x))
    return recs


class TestBuildPanel:
    def test_single_treated_unit(self):
        recs = obs_grid("ABCD", ["1", "2", "3", "4", "5"], {"D": 3})
        panel = build_panel(recs)
        assert panel.n_control == 3
        assert panel.n_pre == 3
        assert panel.unit_labels == ("A", "B", "C", "D")
        assert panel.missing_block_cells() == [(3, 3), (3, 4)]

    def test_heterogeneous_intervention_times(self):
        # C treated from period 5, D from period 4: block starts at the earliest
        recs = obs_grid("ABCD", ["1", "2", "3", "4", "5"], {"C": 4, "D": 3})
        panel = build_panel(recs)
        assert panel.n_control == 2
        assert panel.n_pre == 3
        assert set(panel.missing_block_cells()) == {(2, 3), (2, 4), (3, 3), (3, 4)}
        # cell (C, 4) is inside the block but not yet treated
        assert not panel.treated_mask[3, 2]
        assert panel.treated_mask[4, 2]

    def test_incomplete_grid_rejected(self):
        recs = obs_grid("ABC", ["1", "2", "3"], {"C": 2})
        recs = [r for r in recs if not (r.unit == "B" and r.time == "2")]
        with pytest.raises(PanelDataError, match="incomplete grid"):
            build_panel(recs)

    def test_duplicate_cell_rejected(self):
        recs = obs_grid("AB", ["1", "2"], {"B": 1})
        recs.append(recs[0])
        with pytest.raises(PanelDataError, match="duplicate"):
            build_panel(recs)

    def test_all_units_treated_rejected(self):
        recs = obs_grid("AB", ["1", "2"], {"A": 1, "B": 1})
        with pytest.raises(PanelDataError, match="control"):
            build_panel(recs)

    def test_no_pretreatment_period_rejected(self):
        recs = obs_grid("AB", ["1", "2"], {"B": 0})
        with pytest.raises(PanelDataError, match="pre-treatment"):
            build_panel(recs)

    def test_inconsistent_covariates_rejected(self):
        recs = obs_grid("AB", ["1", "2"], {"B": 1}, cov=2)
        recs[-1] = Observation(recs[-1].unit, recs[-1].time, recs[-1].y, recs[-1].treated, (1.0,))
        with pytest.raises(PanelDataError, match="covariate dimension"):
            build_panel(recs)

    def test_numeric_time_sorting(self):
        recs = [
            Observation(u, t, 0.0, u == "B" and t == "10")
            for u in "AB"
            for t in ["10", "2", "1"]
        ]
        panel = build_panel(recs)
        assert panel.time_labels == ("1", "2", "10")
        assert panel.n_pre == 2

    def test_stable_unit_reordering(self):
        # treated unit B keeps its relative position within the treated group
        recs = obs_grid("ABCD", ["1", "2", "3"], {"B": 2, "D": 1})
        panel = build_panel(recs)
        assert panel.unit_labels == ("A", "C", "B", "D")


class TestViews:
    def test_shapes(self):
        recs = obs_grid("ABC", ["1", "2", "3", "4"], {"C": 2})
        panel = build_panel(recs)
        assert tall_view(panel).matrix.shape == (4, 2)
        assert wide_view(panel).matrix.shape == (2, 3)

    def test_overlap_agreement(self):
        recs = obs_grid("ABC", ["1", "2", "3", "4"], {"C": 2})
        panel = build_panel(recs)
        t, w = tall_view(panel).matrix, wide_view(panel).matrix
        np.testing.assert_array_equal(t[:2, :2], w[:, :2])

    def test_views_exclude_missing_block(self):
        recs = obs_grid("ABC", ["1", "2", "3", "4"], {"C": 2})
        panel = build_panel(recs)
        obs = panel.observed_mask()
        assert obs[:, :2].all() and obs[:2, :].all()
        assert not obs[2:, 2:].any()

    def test_covariate_slices(self):
        recs = obs_grid("ABC", ["1", "2", "3", "4"], {"C": 2}, cov=2)
        panel = build_panel(recs)
        assert wide_view(panel).covariates.shape == (2, 3, 2)
        assert tall_view(panel).covariates.shape == (4, 2, 2)


class TestOrderConditions:
    def test_desk_scale_passes(self):
        panel = PanelData(
            outcomes=np.zeros((25, 31)),
            treated_mask=np.pad(
                np.ones((5, 1), dtype=bool), ((20, 0), (30, 0))
            ),
            n_control=30,
            n_pre=20,
        )
        rep = validate_order_conditions(panel, 3)
        assert rep.passed
        assert (rep.tall_lhs, rep.tall_rhs) == (750, 165)
        assert (rep.wide_lhs, rep.wide_rhs) == (620, 153)

    def test_small_panel_fails(self):
        panel = PanelData(
            outcomes=np.zeros((5, 5)),
            treated_mask=np.pad(np.ones((1, 1), dtype=bool), ((4, 0), (4, 0))),
            n_control=4,
            n_pre=4,
        )
        rep = validate_order_conditions(panel, 3)
        assert not rep.tall_ok  # 20 <= 27
        assert not rep.passed

    def test_r_zero_vacuous(self):
        panel = PanelData(
            outcomes=np.zeros((3, 3)),
            treated_mask=np.pad(np.ones((1, 1), dtype=bool), ((2, 0), (2, 0))),
            n_control=2,
            n_pre=2,
        )
        assert validate_order_conditions(panel, 0).passed


@settings(max_examples=60, deadline=None)
@given(
    n_units=st.integers(2, 6),
    n_times=st.integers(2, 6),
    n_treated=st.integers(1, 3),
    start=st.integers(1, 4),
    seed=st.integers(0, 10**6),
)
def test_roundtrip_property(n_units, n_times, n_treated, start, seed):
    """Building a panel then flattening reproduces the records up to reordering."""
    n_treated = min(n_treated, n_units - 1)
    start = min(start, n_times - 1)
    rng = np.random.default_rng(seed)
    units = [f"u{k}" for k in range(n_units)]
    times = [str(k) for k in range(n_times)]
    treated_from = {u: start for u in rng.choice(units, size=n_treated, replace=False)}
    recs = [
        Observation(u, t, float(rng.standard_normal()), u in treated_from and ti >= start)
        for u in units
        for ti, t in enumerate(times)
    ]
    panel = build_panel(recs)
    back = panel_to_observations(panel)
    assert sorted(back, key=lambda o: (o.unit, o.time)) == sorted(
        recs, key=lambda o: (o.unit, o.time)
    )
    # no treated cell outside the declared block
    block = set(panel.missing_block_cells())
    hot = {(i, t) for t, i in zip(*np.nonzero(panel.treated_mask))}
    assert hot <= block


class TestCsv:
    def test_roundtrip(self, tmp_path):
        recs = obs_grid("ABC", ["1", "2", "3", "4"], {"C": 2}, cov=2)
        panel = build_panel(recs)
        path = tmp_path / "panel.csv"
        write_panel_csv(panel, path)
        back = read_panel_csv(path, covariate_columns=["x1", "x2"])
        np.testing.assert_allclose(back.outcomes, panel.outcomes)
        np.testing.assert_array_equal(back.treated_mask, panel.treated_mask)
        np.testing.assert_allclose(back.covariates, panel.covariates)
        assert back.unit_labels == panel.unit_labels

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit,time,y\nA,1,0.5\n")
        with pytest.raises(PanelDataError, match="treated"):
            read_panel_csv(path)

    def test_bad_treated_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit,time,y,treated\nA,1,0.5,2\n")
        with pytest.raises(PanelDataError, match="treated"):
            read_panel_csv(path)
