"""
Tests du banc de simulation
"""

import numpy as np
import pytest
from scipy import special

from robust_ebayes.exceptions import ConfigError
from robust_ebayes.linmod import fit_all
from robust_ebayes.performance import ParallelProcessor
from robust_ebayes.simulation import (
    TYPE1_CUTOFFS, SimConfig, evaluate_hyperparam_recovery, evaluate_power_fdr, evaluate_type1,
    five_number_summary, simulate_dataset,
)


class TestSimConfig:
    def test_defaults(self):
        cfg = SimConfig()
        assert (cfg.n_genes, cfg.n_samples, cfg.d0_true, cfg.s02_true) == (10000, 6, 4.0, 0.04)
        assert cfg.group_sizes == (3, 3)

    @pytest.mark.parametrize("kwargs", [
        {'n_genes': 1}, {'n_samples': 2}, {'d0_true': 0.0}, {'s02_true': -1.0},
        {'n_outliers': 6000, 'n_de': 6000}, {'lfc_sd': -1.0}, {'seed': -3},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SimConfig(**kwargs)

    def test_from_dict(self):
        cfg = SimConfig.from_dict({'n_genes': 50, 'd0_true': 'inf'})
        assert cfg.d0_true == np.inf
        with pytest.raises(ConfigError):
            SimConfig.from_dict({'genes': 50})


class TestSimulateDataset:
    def test_shapes_and_truth(self):
        cfg = SimConfig(n_genes=1000, n_outliers=50, n_de=100, seed=4)
        data, design, truth = simulate_dataset(cfg)
        assert data.values.shape == (1000, 6)
        assert design.column_names == ('Intercept', 'Group2')
        assert truth.outlier_flags.sum() == 50
        assert truth.de_flags.sum() == 100
        assert not np.any(truth.outlier_flags & truth.de_flags)
        assert np.all(truth.true_lfc[~truth.de_flags] == 0)
        assert data.gene_ids[0] == 'gene0001'

    def test_deterministic(self):
        cfg = SimConfig(n_genes=200, n_de=20, seed=9)
        first, _, _ = simulate_dataset(cfg)
        second, _, _ = simulate_dataset(cfg)
        np.testing.assert_array_equal(first.values, second.values)
        third, _, _ = simulate_dataset(SimConfig(n_genes=200, n_de=20, seed=10))
        assert not np.array_equal(first.values, third.values)

    def test_degenerate_prior(self):
        _, _, truth = simulate_dataset(SimConfig(n_genes=100, d0_true=np.inf, s02_true=0.3))
        np.testing.assert_array_equal(truth.sigma2, np.full(100, 0.3))

    def test_log_variance_centered(self):
        data, design, _ = simulate_dataset(SimConfig(n_genes=20000, seed=1))
        fit = fit_all(data, design)
        z = np.log(fit.s2 / 0.04)
        # E log F(4, 4) = 0, var = 2 ψ'(2)
        se = np.sqrt(2 * special.polygamma(1, 2) / z.size)
        assert abs(z.mean()) < 4 * se

    def test_prior_variance_identity(self):
        _, _, truth = simulate_dataset(SimConfig(n_genes=40000, d0_true=6.0, seed=8))
        log_sigma = np.log(truth.sigma2)
        assert np.var(log_sigma) == pytest.approx(special.polygamma(1, 3.0), rel=0.05)

    def test_outliers_inflate_dispersion(self):
        clean = simulate_dataset(SimConfig(n_genes=5000, seed=12))
        dirty = simulate_dataset(SimConfig(n_genes=5000, n_outliers=250, seed=12))
        z_clean = np.log(fit_all(*clean[:2]).s2)
        z_dirty = np.log(fit_all(*dirty[:2]).s2)
        assert z_dirty.var() > z_clean.var()


class TestFiveNumberSummary:
    def test_values(self):
        assert five_number_summary([4, 1, 3, 2, 5]) == {'min': 1.0, 'q25': 2.0, 'median': 3.0,
                                                        'q75': 4.0, 'max': 5.0}

    def test_single_point(self):
        assert five_number_summary([2.5])['median'] == 2.5


class TestEvaluations:
    def test_type1_requires_null(self):
        with pytest.raises(ConfigError):
            evaluate_type1(SimConfig(n_genes=100, n_de=5), 1)

    def test_type1_table(self):
        cfg = SimConfig(n_genes=2000, seed=3)
        calls = []
        result = evaluate_type1(cfg, 2, cutoffs=TYPE1_CUTOFFS + (1.0,), progress=calls.append)
        assert calls == [1, 1]
        table = result.table
        assert list(table.columns) == ['method', 'cutoff', 'rejection_rate', 'mc_se']
        assert len(table) == 10
        full = table[table['cutoff'] == 1.0]
        np.testing.assert_array_equal(full['rejection_rate'], [1.0, 1.0])
        at_05 = table[table['cutoff'] == 0.05]['rejection_rate']
        assert np.all(np.abs(at_05 - 0.05) < 0.02)
        assert set(result.to_dict()['ks_pass_rate']) == {'standard', 'robust'}

    def test_parallel_matches_serial(self):
        cfg = SimConfig(n_genes=500, seed=21)
        serial = evaluate_type1(cfg, 3)
        parallel = evaluate_type1(cfg, 3, processor=ParallelProcessor(max_workers=3))
        assert serial.table.equals(parallel.table)

    def test_power_requires_de(self):
        with pytest.raises(ConfigError):
            evaluate_power_fdr(SimConfig(n_genes=100), 1)

    def test_power_curves(self):
        cfg = SimConfig(n_genes=2000, n_outliers=50, n_de=100, seed=5)
        result = evaluate_power_fdr(cfg, 2, top_n=100)
        curves = result.curves
        assert set(curves['method']) == {'standard', 'robust'}
        assert curves['rank'].max() == 100
        for _, group in curves.groupby('method'):
            assert np.all(np.diff(group['false_discoveries']) >= 0)
        assert np.all((result.power['power'] >= 0) & (result.power['power'] <= 1))
        assert len(result.power) == 20
        assert result.to_dict()['top_n'] == 100

    def test_power_all_genes_de(self):
        cfg = SimConfig(n_genes=300, n_de=300, seed=6)
        result = evaluate_power_fdr(cfg, 1, top_n=50)
        assert np.all(np.isfinite(result.power['power']))
        np.testing.assert_array_equal(result.power['realized_fdr'], np.zeros(20))

    def test_recovery_single_replication(self):
        cfg = SimConfig(n_genes=2000, seed=2)
        result = evaluate_hyperparam_recovery(cfg, 1)
        assert len(result.estimates) == 2
        summary = result.summary
        assert set(summary['parameter']) == {'d0', 's02'}
        row = summary[(summary['method'] == 'standard') & (summary['parameter'] == 'd0')].iloc[0]
        assert row['min'] == row['max'] == row['median']
        assert 0.0 <= result.robust_closer_fraction <= 1.0

    @pytest.mark.slow
    def test_recovery_clean_data(self):
        result = evaluate_hyperparam_recovery(SimConfig(seed=30), 10)
        summary = result.summary.set_index(['method', 'parameter'])
        for method in ('standard', 'robust'):
            assert 3.4 <= summary.loc[(method, 'd0'), 'median'] <= 4.7
            assert 0.034 <= summary.loc[(method, 's02'), 'median'] <= 0.047

    @pytest.mark.slow
    @pytest.mark.parametrize("d0_true", [2.0, 4.0, 10.0])
    def test_recovery_contaminated(self, d0_true):
        cfg = SimConfig(n_outliers=250, d0_true=d0_true, seed=31)
        result = evaluate_hyperparam_recovery(cfg, 20)
        assert result.robust_closer_fraction >= 0.95
        summary = result.summary.set_index(['method', 'parameter'])
        robust_error = abs(np.log(summary.loc[('robust', 'd0'), 'median'] / d0_true))
        standard_error = abs(np.log(summary.loc[('standard', 'd0'), 'median'] / d0_true))
        assert robust_error < standard_error

    @pytest.mark.slow
    def test_clean_data_flags_no_outliers(self):
        result = evaluate_hyperparam_recovery(SimConfig(d0_true=4.0, seed=50), 20)
        robust = result.estimates[result.estimates['method'] == 'robust']
        assert len(robust) == 20
        assert (robust['n_outliers'] == 0).sum() >= 18

    @pytest.mark.slow
    @pytest.mark.parametrize("d0_true", [2.0, 10.0])
    def test_robust_ranks_fewer_false_discoveries(self, d0_true):
        cfg = SimConfig(n_de=500, n_outliers=250, d0_true=d0_true, seed=60)
        result = evaluate_power_fdr(cfg, 8)
        at_top = result.to_dict()['false_discoveries_at_top_n']
        assert at_top['robust'] < at_top['standard']
        power = result.power.pivot(index='fdr_cutoff', columns='method', values='power')
        assert len(power) == 10
        assert np.all(power['robust'] >= power['standard'])

    @pytest.mark.slow
    @pytest.mark.integration
    def test_type1_desk_scale(self):
        result = evaluate_type1(SimConfig(seed=40), 20)
        table = result.table.set_index(['method', 'cutoff'])
        for method in ('standard', 'robust'):
            assert abs(table.loc[(method, 0.05), 'rejection_rate'] - 0.05) < 0.005
        assert result.ks_pass_rate['standard'] >= 0.85
