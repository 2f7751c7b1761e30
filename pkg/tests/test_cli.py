"""
Tests for the command-line interface
"""

import json

import pytest

import cli
from cli import (
    EXIT_FAIL, EXIT_INDETERMINATE, EXIT_INTERRUPTED, EXIT_PASS, EXIT_USAGE, RunConfig, build_parser,
    load_symbols, parse_key_values, run,
)
from exceptions import UnknownFamilyError, ValidationError
from report import Report, Verdict


def identity_class(output_dir, *extra):
    return ['verify-class', '--family', 'identity', '--max-order', '1', '--seed', '7',
            '--output-dir', str(output_dir), *extra]


class TestParsing:

    def test_parse_key_values(self):
        assert parse_key_values(['m=1', ' width = 2 '], '--param') == {'m': '1', 'width': '2'}
        assert parse_key_values(None, '--param') == {}

    @pytest.mark.parametrize("item", ['m', '=1'])
    def test_parse_key_values_rejects(self, item):
        with pytest.raises(ValidationError):
            parse_key_values([item], '--param')

    def test_parser_defaults(self):
        args = build_parser().parse_args(['apply'])
        config = RunConfig.from_args(args)
        assert config.dim == 1
        assert config.options == {}
        assert config.grid_points is None

    def test_options_collected(self):
        args = build_parser().parse_args(['leibniz', '--m', '0', '--m', '2', '--trials', '3'])
        assert RunConfig.from_args(args).options == {'m': [0.0, 2.0], 'trials': 3}


class TestRunConfig:
    """Validation of one invocation"""

    @pytest.mark.parametrize("kwargs", [
        {'command': 'frobnicate'},
        {'command': 'apply', 'dim': 3},
        {'command': 'apply', 'half_period': 0.0},
        {'command': 'apply', 'grid_points': 48},
        {'command': 'apply', 'grid_points': 4},
        {'command': 'apply', 'seed': -1},
        {'command': 'apply', 'family_params': {'m': '1'}},
        {'command': 'expand', 'options': {'expand': 0}},
        {'command': 'leibniz', 'options': {'m': [-1.0]}},
        {'command': 'bounds', 'options': {'p': 4.0}},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            RunConfig(**kwargs)

    def test_to_dict(self):
        payload = RunConfig('bounds', family='identity', options={'p': 4.0, 'q': 4.0, 'r': 2.0}).to_dict()
        assert payload['command'] == 'bounds'
        assert payload['options']['r'] == 2.0

    def test_load_symbols(self, tmp_path):
        path = tmp_path / 'sigma.json'
        path.write_text(json.dumps({'expr': '(mul i xi)', 'class': {'m': 1}, 'label': 'dxi'}))
        symbols = load_symbols(RunConfig('apply', symbol_paths=[str(path)], family='elliptic',
                                         family_params={'m': '2'}))
        assert [str(s) for s in symbols] == ['dxi', 'elliptic(m=2.0)']

    def test_load_symbols_bad_param(self):
        with pytest.raises(ValidationError):
            load_symbols(RunConfig('apply', family='elliptic', family_params={'m': 'two'}))

    def test_load_symbols_unknown_family(self):
        with pytest.raises(UnknownFamilyError):
            load_symbols(RunConfig('apply', family='nonexistent'))


class TestExitCodes:
    """End-to-end runs and their exit statuses"""

    def test_pass_writes_report(self, output_dir, capsys):
        assert run(identity_class(output_dir)) == EXIT_PASS
        payload = json.loads((output_dir / 'report.json').read_text())
        assert payload['command'] == 'verify-class'
        assert payload['status'] == 'pass'
        assert payload['seed'] == 7
        assert payload['config']['run']['family'] == 'identity'
        assert payload['config']['tolerances']['stabilization_ratio'] == 0.25
        assert '✓ verify-class: pass' in capsys.readouterr().out

    def test_inconsistent_class_fails(self, output_dir, tmp_path):
        path = tmp_path / 'understated.json'
        path.write_text(json.dumps({'family': 'elliptic', 'params': {'m': 2}, 'class': {'m': 0}}))
        argv = ['verify-class', '--symbol', str(path), '--max-order', '1', '--output-dir', str(output_dir)]
        assert run(argv) == EXIT_FAIL
        assert json.loads((output_dir / 'report.json').read_text())['status'] == 'fail'

    @pytest.mark.parametrize("argv", [
        [],
        ['frobnicate'],
        ['apply', '--dim', 'two'],
        ['apply', '--grid-points', '12'],
        ['apply', '--param', 'm=1'],
        ['bounds', '--family', 'identity', '--p', '4'],
        ['apply', '--family', 'nonexistent'],
    ])
    def test_usage_errors(self, argv, output_dir):
        assert run(argv + ['--output-dir', str(output_dir)]) == EXIT_USAGE

    def test_unknown_tolerance_key(self, output_dir):
        assert run(identity_class(output_dir, '--tolerance', 'no_such_key=1')) == EXIT_USAGE

    def test_bad_symbol_expression(self, output_dir, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text(json.dumps({'expr': '(mul i foo)', 'class': {'m': 0}}))
        assert run(['verify-class', '--symbol', str(path), '--output-dir', str(output_dir)]) == EXIT_USAGE

    def test_missing_symbol_file(self, output_dir, tmp_path, capsys):
        missing = tmp_path / 'missing.json'
        assert run(['verify-class', '--symbol', str(missing), '--output-dir', str(output_dir)]) == EXIT_FAIL
        assert str(missing) in capsys.readouterr().err

    def test_version(self, capsys):
        assert run(['--version']) == EXIT_PASS
        assert 'bscalc' in capsys.readouterr().out

    def test_indeterminate_status(self, output_dir, monkeypatch):
        class Undecided:
            def __init__(self, context):
                self.context = context

            def run(self, command, config_echo=None):
                report = Report(command, config_echo or {}, self.context.seed)
                report.add(Verdict.indeterminate('remainder', 'too few shells'))
                return report

        monkeypatch.setattr(cli, 'Orchestrator', Undecided)
        assert run(identity_class(output_dir)) == EXIT_INDETERMINATE

    def test_interrupted(self, output_dir, monkeypatch):
        def interrupt(run_config):
            raise KeyboardInterrupt

        monkeypatch.setattr(cli, 'execute', interrupt)
        assert run(identity_class(output_dir)) == EXIT_INTERRUPTED


class TestDeterminism:

    def test_same_seed_same_bytes(self, output_dir):
        assert run(identity_class(output_dir)) == EXIT_PASS
        first = (output_dir / 'report.json').read_bytes()
        assert run(identity_class(output_dir)) == EXIT_PASS
        assert (output_dir / 'report.json').read_bytes() == first


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
