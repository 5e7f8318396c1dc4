"""Run outputs: report.json, summary.csv, metadata.json and plot-data CSVs."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Any, Iterable

from dppcond.checks.base import CheckResult
from dppcond.utils import dumps, write_text

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ('kernel_id', 'instance', 'check_id', 'mode', 'statistic', 'tolerance', 'pass')
PLOT_CHECKS = ('tail_mixing', 'limit_convergence')


def sort_results(results: Iterable[CheckResult]) -> list[CheckResult]:
    return sorted(results, key=lambda r: (r.check_id, r.instance, r.mode))


def _csv(rows: list[dict[str, Any]], columns: Iterable[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def summary_csv(results: list[CheckResult]) -> str:
    rows = []
    for r in results:
        row = r.to_json()
        row['statistic'] = repr(r.statistic)
        row['tolerance'] = repr(r.tolerance)
        row['pass'] = str(r.passed).lower()
        rows.append(row)
    return _csv(rows, SUMMARY_COLUMNS)


def plot_tables(results: list[CheckResult]) -> dict[str, str]:
    """File name -> CSV text for every result carrying a curve."""
    tables = {}
    for r in results:
        curve = r.details.get('curve')
        if r.check_id not in PLOT_CHECKS or not curve:
            continue
        name = f'plot_{r.check_id}_{r.instance}.csv'
        if name in tables:
            name = f'plot_{r.check_id}_{r.instance}_{r.mode}.csv'
        tables[name] = _csv(curve, curve[0].keys())
    return tables


def write_report(out_dir: str | Path, results: list[CheckResult], metadata: dict[str, Any]) -> list[Path]:
    out = Path(out_dir)
    ordered = sort_results(results)
    written = [
        write_text(out / 'report.json', dumps([r.to_json() for r in ordered])),
        write_text(out / 'summary.csv', summary_csv(ordered)),
        write_text(out / 'metadata.json', dumps(metadata)),
    ]
    for name, text in plot_tables(ordered).items():
        written.append(write_text(out / name, text))
    logger.info('wrote %d files to %s', len(written), out)
    return written
