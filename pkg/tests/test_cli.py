"""Command-line front end: outputs, exit codes and reproducibility"""

import json

import pandas as pd
import pytest

from recmax.main import (
    EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, RunConfig, expand_args_from, main, parse_diagonal, parse_grid,
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_OK, err
    return json.loads(out)


class TestNormCommands:

    def test_norm_text(self, capsys):
        code, out, _ = run(capsys, 'norm', '--model', 'logistic:2', '--x', '-3,-4')
        assert code == EXIT_OK
        assert out.strip() == '5.00000000000'

    def test_dual_values(self, capsys):
        _, out, _ = run(capsys, 'dual', '--model', 'comonotone', '--x', '-2,-5')
        assert float(out) == 2.0
        _, out, _ = run(capsys, 'dual', '--model', 'indep', '--x', '-1,-1,-1')
        assert float(out) == 0.0

    def test_norm_json_with_dimension(self, capsys):
        payload = run_json(capsys, 'norm', '--model', 'mo:0.5:d=2', '--x', '1,2', '--format', 'json')
        assert payload['value'] == pytest.approx(2.5)
        assert payload['config']['model'] == 'mo:0.5:d=2'

    def test_norm_monte_carlo(self, capsys):
        payload = run_json(capsys, 'norm', '--model', 'mo:0.5', '--x', '1,2', '--mc', '--n-samples', '20000',
                           '--seed', '3')
        assert payload['details']['closed_form'] == pytest.approx(2.5)
        assert abs(payload['value'] - 2.5) <= 4 * payload['std_error']

    def test_bad_descriptor_is_a_config_error(self, capsys):
        code, _, err = run(capsys, 'norm', '--model', 'logistic:0.5', '--x', '-1,-1')
        assert code == EXIT_CONFIG
        assert 'logistic' in err

    def test_dimension_mismatch(self, capsys):
        code, _, _ = run(capsys, 'norm', '--model', 'logistic:2:d=3', '--x', '-1,-1')
        assert code == EXIT_CONFIG

    def test_unknown_flag(self, capsys):
        assert run(capsys, 'norm', '--bogus')[0] == EXIT_CONFIG

    def test_help(self, capsys):
        assert run(capsys, '--help')[0] == EXIT_OK


class TestRecordsCommand:

    def test_scan_csv(self, capsys, tmp_path):
        data = tmp_path / 'obs.csv'
        data.write_text('x1,x2\n0.2,0.2\n0.5,0.1\n0.6,0.7\n')
        times = tmp_path / 'times.csv'
        payload = run_json(capsys, 'records', 'scan', '--input', str(data), '--times-output', str(times))
        assert payload['champion_index'] == 3
        assert payload['simple_record_times'] == [1, 2, 3]
        assert payload['complete_record_times'] == [1, 3]
        assert payload['config']['input'] == str(data)
        table = pd.read_csv(times)
        assert list(table.columns) == ['record', 'time', 'complete', 'gap']
        assert table['time'].tolist() == [1, 2, 3]
        assert table['complete'].tolist() == [True, False, True]

    def test_scan_ndjson_with_pit(self, capsys, tmp_path):
        data = tmp_path / 'obs.ndjson'
        data.write_text('[0.5, 1.0]\n[1.5, 0.2]\n\n[2.0, 3.0]\n')
        payload = run_json(capsys, 'records', 'scan', '--input', str(data), '--pit', 'normal,exponential')
        assert payload['champion_index'] == 3
        assert payload['n'] == 3

    def test_malformed_csv_reports_line(self, capsys, tmp_path):
        data = tmp_path / 'bad.csv'
        data.write_text('x1,x2\n0.1,0.2\n0.3,oops\n')
        code, _, err = run(capsys, 'records', 'scan', '--input', str(data))
        assert code == EXIT_CONFIG
        assert 'line 3' in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, 'records', 'scan', '--input', str(tmp_path / 'none.csv'))
        assert code == EXIT_CONFIG

    def test_input_and_copula_are_exclusive(self, capsys, tmp_path):
        data = tmp_path / 'obs.csv'
        data.write_text('x1,x2\n0.2,0.2\n')
        code, _, _ = run(capsys, 'records', 'scan', '--input', str(data), '--copula', 'product:d=2')
        assert code == EXIT_CONFIG

    def test_simulate(self, capsys):
        payload = run_json(capsys, 'records', 'simulate', '--copula', 'comonotone:d=2', '--n', '10',
                           '--reps', '200', '--checkpoints', '1,10', '--seed', '5')
        first, tenth = payload['rows']
        assert first['simple_mean'] == 1.0
        assert tenth['simple_mean'] == tenth['complete_mean']
        assert payload['config']['copula'] == 'comonotone:d=2'


class TestEstimatorCommands:

    def test_concurrence_all_routes(self, capsys):
        payload = run_json(capsys, 'concurrence', '--model', 'mo:0.5', '--n-samples', '5000', '--n', '50',
                           '--reps', '500', '--seed', '9')
        assert set(payload['estimates']) == {'generator', 'eta', 'empirical'}
        assert payload['closed_form'] == pytest.approx(1 / 3)
        assert payload['config']['seed'] == 9

    def test_zero_concurrence_is_a_runtime_error(self, capsys):
        code, _, err = run(capsys, 'champion-dist', '--model', 'indep:d=2', '--grid', '-1,-1',
                           '--n-samples', '100')
        assert code == EXIT_RUNTIME
        assert 'independence' in err

    def test_champion_grid_csv(self, capsys):
        code, out, _ = run(capsys, 'champion-dist', '--model', 'comonotone:d=2', '--diagonal', '-2:-0.5:3',
                           '--n-samples', '2000')
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == 'x1,x2,value,std_error'
        assert len(lines) == 4

    def test_grid_dimension_checked(self, capsys):
        code, _, _ = run(capsys, 'simple-dist', '--model', 'logistic:2:d=3', '--grid', '-1,-1',
                         '--n-samples', '100')
        assert code == EXIT_CONFIG

    def test_record_times_csv(self, capsys):
        code, out, _ = run(capsys, 'record-times', '--copula', 'product:d=2', '--n-samples', '2000',
                           '--cap', '50', '--format', 'csv')
        assert code == EXIT_OK
        assert out.splitlines()[0] == 'k,p_exceed,std_error'

    def test_record_times_json(self, capsys):
        payload = run_json(capsys, 'record-times', '--copula', 'comonotone:d=2', '--n-samples', '5000',
                           '--cap', '500')
        assert payload['divergence_flag'] is True
        assert payload['config']['cap'] == 500
        assert payload['details']['criterion']['source'] == 'analytic'

    def test_record_times_reports_verdict_source(self, capsys):
        code, _, err = run(capsys, 'record-times', '--copula', 'gumbel:2', '--n-samples', '2000', '--cap', '200')
        assert code == EXIT_OK
        assert 'infinite mean (analytic: dual function at ones' in err

    def test_gap_law(self, capsys):
        payload = run_json(capsys, 'gap-law', '--copula', 'comonotone:d=2', '--n-records', '2', '--reps', '2000')
        assert 'bins' in payload and 'passed' in payload

    def test_chi_bar_needs_one_source(self, capsys, tmp_path):
        assert run(capsys, 'chi-bar', '--u-grid', '0.5')[0] == EXIT_CONFIG

    def test_chi_bar_copula(self, capsys):
        payload = run_json(capsys, 'chi-bar', '--copula', 'comonotone:d=2', '--u-grid', '0.5,0.9',
                           '--n-samples', '2000', '--format', 'json')
        assert [row['chi_bar'] for row in payload['rows']] == [1.0, 1.0]
        assert payload['pair'] == [0, 1]

    def test_second_record(self, capsys):
        payload = run_json(capsys, 'second-record', '--copula', 'product:d=2', '--x', '1,1',
                           '--n-samples', '500', '--cap', '1000')
        assert payload['value'] == pytest.approx(1.0)


class TestSampleCommand:

    def test_copula_samples(self, capsys):
        code, out, _ = run(capsys, 'sample', '--copula', 'gumbel:2:d=3', '--n', '5', '--seed', '1')
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == 'x1,x2,x3'
        assert len(lines) == 6

    def test_generator_samples(self, capsys):
        _, out, _ = run(capsys, 'sample', '--model', 'comonotone:d=2', '--kind', 'generator', '--n', '3')
        assert out.strip().splitlines()[1:] == ['1,1'] * 3

    def test_needs_exactly_one_source(self, capsys):
        assert run(capsys, 'sample', '--n', '3')[0] == EXIT_CONFIG
        assert run(capsys, 'sample', '--model', 'indep', '--copula', 'product', '--n', '3')[0] == EXIT_CONFIG


class TestReproducibility:

    def test_output_ignores_worker_count(self, capsys, monkeypatch):
        monkeypatch.setenv('RECMAX_CHUNK_SIZE', '1000')
        argv = ['concurrence', '--model', 'logistic:2', '--method', 'generator', '--n-samples', '4000',
                '--seed', '11']
        one = run(capsys, *argv, '--workers', '1')[1]
        two = run(capsys, *argv, '--workers', '2')[1]
        assert one == two

    def test_quiet_silences_progress(self, capsys):
        _, _, err = run(capsys, '--quiet', 'sample', '--copula', 'product', '--n', '3')
        assert err == ''

    def test_args_from_file(self, capsys, tmp_path):
        flags = tmp_path / 'flags.txt'
        flags.write_text('# norm of a logistic vector\n--model logistic:2\n--x -3,-4\n')
        code, out, _ = run(capsys, 'norm', '--args-from', str(flags))
        assert code == EXIT_OK
        assert out.strip() == '5.00000000000'

    def test_expand_args_from(self, tmp_path):
        flags = tmp_path / 'flags.txt'
        flags.write_text('--seed 4\n\n--n-samples 10\n')
        assert expand_args_from(['norm', f'--args-from={flags}']) == ['norm', '--seed', '4', '--n-samples', '10']

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / 'out.json'
        code, out, _ = run(capsys, 'norm', '--model', 'logistic:2', '--x', '-3,-4', '--format', 'json',
                           '--output', str(target))
        assert code == EXIT_OK and out == ''
        assert json.loads(target.read_text())['value'] == pytest.approx(5.0)


class TestParsingHelpers:

    def test_grid_and_diagonal(self):
        assert parse_grid('-1,-0.5;-2,-1') == [[-1.0, -0.5], [-2.0, -1.0]]
        assert parse_diagonal('-3:-0.1:10') == (-3.0, -0.1, 10)

    def test_config_echo_skips_workers(self):
        config = RunConfig(subcommand='norm', seed=3, workers=8)
        assert config.to_dict() == {'subcommand': 'norm', 'seed': 3}
