"""
Tests de l'interface en ligne de commande
"""

import json

import pytest
import yaml
from click.testing import CliRunner

from robust_ebayes import __version__
from robust_ebayes.cli import cli, config_template, parse_tail_pair
from robust_ebayes.exceptions import ConfigError

SMALL_SIM = ['--genes', '300', '--reps', '2', '--seed', '11', '--workers', '2']


@pytest.fixture
def runner():
    return CliRunner()


class TestHelpers:
    def test_parse_tail_pair(self):
        assert parse_tail_pair("0.05,0.1") == (0.05, 0.1)
        assert parse_tail_pair("0.2") == (0.2, 0.2)
        with pytest.raises(ConfigError):
            parse_tail_pair("a,b")
        with pytest.raises(ConfigError):
            parse_tail_pair("0.1,0.1,0.1")

    def test_template_is_serialisable(self):
        template = config_template()
        assert template['simulation']['n_genes'] == 10000
        assert yaml.safe_load(yaml.safe_dump(template)) == template


class TestFitCommand:
    def test_writes_outputs(self, runner, tmp_path, tsv_inputs):
        expr, design = tsv_inputs
        out = tmp_path / "out"
        result = runner.invoke(cli, ['fit', '--expr', str(expr), '--design', str(design),
                                     '--robust', '--out', str(out)])
        assert result.exit_code == 0, result.output
        assert {p.name for p in out.iterdir()} == {'toptable.tsv', 'summary.json', 'outliers.tsv'}
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['robust'] is True
        header = (out / 'toptable.tsv').read_text().split("\n")[0].split("\t")
        assert header[:3] == ['gene_id', 'logFC', 'AveExpr']

    def test_missing_design(self, runner, tmp_path, tsv_inputs):
        expr, _ = tsv_inputs
        out = tmp_path / "out"
        result = runner.invoke(cli, ['fit', '--expr', str(expr), '--design', str(tmp_path / 'absent.tsv'),
                                     '--out', str(out)])
        assert result.exit_code == 3
        assert not (out / 'toptable.tsv').exists()

    def test_missing_option(self, runner, tsv_inputs):
        expr, _ = tsv_inputs
        result = runner.invoke(cli, ['fit', '--expr', str(expr)])
        assert result.exit_code == 2

    @pytest.mark.parametrize("option", [['--winsor-tail-p', '0.7'], ['--fdr', '0'], ['--span', '2']])
    def test_invalid_options(self, runner, tmp_path, tsv_inputs, option):
        expr, design = tsv_inputs
        result = runner.invoke(cli, ['fit', '--expr', str(expr), '--design', str(design),
                                     '--out', str(tmp_path / 'out'), *option])
        assert result.exit_code == 2

    def test_f_test(self, runner, tmp_path, tsv_inputs):
        expr, design = tsv_inputs
        out = tmp_path / "out"
        result = runner.invoke(cli, ['fit', '--expr', str(expr), '--design', str(design),
                                     '--coef', 'Intercept,Group2', '--out', str(out)])
        assert result.exit_code == 0, result.output
        header = (out / 'toptable.tsv').read_text().split("\n")[0].split("\t")
        assert 'F' in header and 't' not in header

    def test_yaml_config_is_honoured(self, runner, tmp_path, tsv_inputs):
        expr, design = tsv_inputs
        config = tmp_path / "run.yaml"
        config.write_text(yaml.safe_dump({'expression': str(expr), 'design': str(design),
                                          'output': str(tmp_path / 'out'), 'trend': True}))
        result = runner.invoke(cli, ['--config', str(config), 'fit'])
        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / 'out' / 'summary.json').read_text())
        assert summary['trend'] is True
        assert summary['s02'] is None

    def test_command_line_overrides_config(self, runner, tmp_path, tsv_inputs):
        expr, design = tsv_inputs
        config = tmp_path / "run.json"
        config.write_text(json.dumps({'expression': str(expr), 'design': str(design),
                                      'output': str(tmp_path / 'out'), 'robust': True}))
        result = runner.invoke(cli, ['--config', str(config), 'fit', '--no-robust'])
        assert result.exit_code == 0, result.output
        assert json.loads((tmp_path / 'out' / 'summary.json').read_text())['robust'] is False

    def test_unreadable_config(self, runner, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text("{not json")
        result = runner.invoke(cli, ['--config', str(config), 'fit'])
        assert result.exit_code == 2


class TestSimulateCommand:
    def test_recovery_by_default(self, runner, tmp_path):
        out = tmp_path / "sim"
        result = runner.invoke(cli, ['simulate', *SMALL_SIM, '--out', str(out)])
        assert result.exit_code == 0, result.output
        assert {p.name for p in out.iterdir()} == {'recovery.tsv', 'recovery_estimates.tsv', 'recovery.json'}

    def test_reproducible(self, runner, tmp_path):
        for name in ('a', 'b'):
            result = runner.invoke(cli, ['simulate', *SMALL_SIM, '--de', '30', '--outliers', '10',
                                         '--out', str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        for name in ('power.tsv', 'power_curves.tsv', 'power.json'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_null_type1(self, runner, tmp_path):
        out = tmp_path / "null"
        result = runner.invoke(cli, ['simulate', *SMALL_SIM, '--null', '--out', str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / 'type1.tsv').read_text().splitlines()
        assert lines[0] == "method\tcutoff\trejection_rate\tmc_se"
        assert len(lines) == 9

    def test_null_with_outliers_rejected(self, runner, tmp_path):
        result = runner.invoke(cli, ['simulate', *SMALL_SIM, '--null', '--outliers', '5',
                                     '--out', str(tmp_path / 'sim')])
        assert result.exit_code == 2

    def test_invalid_reps(self, runner, tmp_path):
        result = runner.invoke(cli, ['simulate', '--reps', '0', '--out', str(tmp_path / 'sim')])
        assert result.exit_code == 2


class TestConfigCommands:
    def test_init_then_check(self, runner, tmp_path):
        path = tmp_path / "robust-ebayes.yaml"
        result = runner.invoke(cli, ['init-config', '-o', str(path)])
        assert result.exit_code == 0, result.output
        assert yaml.safe_load(path.read_text())['winsor_tail_p'] == [0.05, 0.1]

        result = runner.invoke(cli, ['check-config', str(path)])
        assert result.exit_code == 0, result.output
        assert "Configuration valide" in result.output

    def test_check_rejects_unknown_keys(self, runner, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("robust: true\nsimulation:\n  genes: 10\n")
        result = runner.invoke(cli, ['check-config', str(path)])
        assert result.exit_code == 2

    def test_version(self, runner):
        result = runner.invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert __version__ in result.output
