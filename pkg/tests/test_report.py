import csv
import io
import json

from dppcond.checks.base import make_result
from dppcond.report import SUMMARY_COLUMNS, plot_tables, summary_csv, write_report


def results():
    curve = [{'depth': 0, 'window_size': 4, 'kernel_stat': 0.2}, {'depth': 2, 'window_size': 2, 'kernel_stat': 0.1}]
    tail = make_result('tail_mixing', 'mc', 0.001, 0.01, 5, {'curve': curve})
    tail_exact = make_result('tail_mixing', 'exact', 0.002, 0.01, 5, {'curve': curve})
    failing = make_result('one_step_martingale', 'exact', 0.5, 1e-8, 5).model_copy(update={'kernel_id': 'k'})
    return [tail, failing, tail_exact]


def test_pass_flag_is_the_comparison():
    assert make_result('dilation', 'exact', 1e-9, 1e-8).passed
    assert not make_result('dilation', 'exact', float('inf'), 0.0).passed
    assert make_result('dilation', 'exact', 0.0, 0.0).to_json()['pass'] is True


def test_summary_rows():
    rows = list(csv.DictReader(io.StringIO(summary_csv(results()))))
    assert tuple(rows[0].keys()) == SUMMARY_COLUMNS
    assert rows[1]['pass'] == 'false' and rows[1]['kernel_id'] == 'k'
    assert float(rows[1]['statistic']) == 0.5


def test_plot_tables_keep_both_modes():
    tables = plot_tables(results())
    assert sorted(tables) == ['plot_tail_mixing_0.csv', 'plot_tail_mixing_0_exact.csv']
    first = list(csv.DictReader(io.StringIO(tables['plot_tail_mixing_0.csv'])))
    assert first[1]['depth'] == '2'


def test_write_report_sorts_results(tmp_path):
    written = write_report(tmp_path, results(), {'seed': 5})
    assert {p.name for p in written} >= {'report.json', 'summary.csv', 'metadata.json'}
    report = json.loads((tmp_path / 'report.json').read_text())
    assert [(r['check_id'], r['mode']) for r in report] == [
        ('one_step_martingale', 'exact'),
        ('tail_mixing', 'exact'),
        ('tail_mixing', 'mc'),
    ]
