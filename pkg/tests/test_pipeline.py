import numpy as np
import pytest

from ife.dgp import DgpConfig, generate_dgp
from ife.emit import effects_csv_text, treated_cells
from ife.exceptions import PanelDataError
from ife.panel import Observation, build_panel
from ife.pipeline import choose_rank, estimate_panel


class TestEstimatePanel:
    def test_shared_draws_across_levels(self):
        cfg = DgpConfig(model="dgp1", n_control=14, n_pre=10)
        panel = generate_dgp(cfg, np.random.default_rng(1)).panel
        res = estimate_panel(panel, r=3, B=151, alphas=(0.1, 0.05), seed=3)
        # same pooled draws: the 95% equal-tailed interval contains the 90% one
        a, b = res.intervals[0.05], res.intervals[0.1]
        assert np.all(a.eq_lower <= b.eq_lower) and np.all(a.eq_upper >= b.eq_upper)

    def test_order_condition_failure_raises(self):
        cfg = DgpConfig(model="dgp1", n_control=4, n_pre=4)
        panel = generate_dgp(cfg, np.random.default_rng(2)).panel
        with pytest.raises(PanelDataError, match="order conditions"):
            estimate_panel(panel, r=3, B=101)

    def test_rank_floor_on_pure_noise(self):
        rng = np.random.default_rng(3)
        outcomes = rng.standard_normal((24, 20))
        mask = np.zeros((24, 20), dtype=bool)
        mask[16:, 16:] = True
        from ife.panel import PanelData

        panel = PanelData(outcomes, mask, 16, 16)
        res = estimate_panel(panel, r="auto", B=101, alphas=(0.1,), seed=5)
        assert res.rank_estimate is not None
        assert res.rank_estimate.r_hat == 0
        assert res.rank_floored
        assert res.r_used == 1

    def test_low_draw_count_warns(self):
        cfg = DgpConfig(model="dgp1", n_control=12, n_pre=10)
        panel = generate_dgp(cfg, np.random.default_rng(4)).panel
        with pytest.warns(UserWarning, match="bootstrap draws"):
            estimate_panel(panel, r=2, B=50, alphas=(0.1,))

    def test_choose_rank_covariate_model(self):
        cfg = DgpConfig(model="dgp2", n_control=40, n_pre=30, error_scale=0.1)
        panel = generate_dgp(cfg, np.random.default_rng(6)).panel
        est = choose_rank(panel, rmax=6)
        assert est.r_hat == 3


class TestStaggeredAdoption:
    def make_result(self):
        rng = np.random.default_rng(9)
        units = [f"u{k}" for k in range(12)]
        times = [f"{k:02d}" for k in range(12)]
        f = rng.standard_normal((12, 2))
        lam = rng.standard_normal((12, 2))
        y = f @ lam.T + 0.01 * rng.standard_normal((12, 12))
        start = {"u10": 9, "u11": 8}  # u11 adopts one period before u10
        recs = []
        for j, u in enumerate(units):
            for t, tl in enumerate(times):
                treated = u in start and t >= start[u]
                recs.append(Observation(u, tl, float(y[t, j] + treated), treated))
        panel = build_panel(recs)
        return estimate_panel(panel, r=2, B=101, alphas=(0.1,), seed=2)

    def test_rows_enumerate_only_treated_cells(self):
        res = self.make_result()
        cells = list(treated_cells(res))
        # block is 2 units x 4 periods = 8 cells, but only 3 + 4 carry d=1
        assert res.panel.n_post == 4 and res.panel.n_treated == 2
        assert len(cells) == 7
        text = effects_csv_text(res, [0.1])
        assert len(text.strip().split("\n")) == 1 + 7

    def test_pre_intervention_cell_flagged_with_counterfactual(self):
        res = self.make_result()
        pre = res.effects.pre_intervention
        assert pre.sum() == 1  # u10 at the block's first period
        assert pre[0, res.panel.unit_labels[10:].index("u10")]
        # a delta is still reported there (counterfactual exists on the block)
        assert np.isfinite(res.effects.delta).all()
