import os
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from utils.utils import mkdir_if_missing
from visualization_utils import plot_metric_curves

logger = logging.getLogger(__name__)

REPORT_METRICS = ('balanced_accuracy', 'n_known', 'known_accuracy')
NOT_REACHED = 'not reached'


@dataclass(eq=False)
class ReportTable:
    frame: pd.DataFrame     # strategy, budget, metric, mean, stderr, n_trials

    @property
    def strategies(self):
        return list(dict.fromkeys(self.frame['strategy']))

    def metric(self, name):
        rows = self.frame[self.frame['metric'] == name]
        if rows.empty:
            raise KeyError(f'metric {name!r} not in report')
        return rows[['strategy', 'budget', 'mean', 'stderr']].reset_index(drop=True)

    def curve(self, strategy, name='balanced_accuracy'):
        rows = self.metric(name)
        return rows[rows['strategy'] == strategy].reset_index(drop=True)


def mean_stderr(values):
    """Column-wise mean and standard error over trials (rows); stderr is 0 for one trial."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(values.shape[1])
    return mean, stderr


def aggregate(logs):
    """Per-budget mean and standard error across trials of one strategy."""
    if not logs:
        raise ValueError('nothing to aggregate')
    strategies = {log.strategy for log in logs}
    if len(strategies) != 1:
        raise ValueError(f'aggregate expects logs of one strategy, got {sorted(strategies)}')
    logs = sorted(logs, key=lambda log: log.seed)
    budgets = logs[0].rows['budget'].to_numpy()
    for log in logs[1:]:
        if not np.array_equal(log.rows['budget'].to_numpy(), budgets):
            raise ValueError(f'{log.strategy}: seed {log.seed} has budget grid {log.rows["budget"].tolist()}, '
                             f'seed {logs[0].seed} has {budgets.tolist()}')

    parts = []
    for metric in REPORT_METRICS:
        mean, stderr = mean_stderr([log.rows[metric].to_numpy() for log in logs])
        parts.append(pd.DataFrame({'strategy': logs[0].strategy, 'budget': budgets, 'metric': metric,
                                   'mean': mean, 'stderr': stderr, 'n_trials': len(logs)}))
    return ReportTable(frame=pd.concat(parts, ignore_index=True))


def aggregate_all(logs):
    """Aggregate every strategy, strategies in name order."""
    by_strategy = {}
    for log in logs:
        by_strategy.setdefault(log.strategy, []).append(log)
    frames = [aggregate(by_strategy[name]).frame for name in sorted(by_strategy)]
    return ReportTable(frame=pd.concat(frames, ignore_index=True))


def budget_to_reach(report, strategy, target_acc, metric='balanced_accuracy'):
    """First budget on the recorded grid whose mean reaches target_acc, without interpolation."""
    if not 0 <= target_acc <= 1:
        raise ValueError(f'target accuracy must be in [0, 1], got {target_acc}')
    curve = report.curve(strategy, metric)
    if curve.empty:
        raise KeyError(f'strategy {strategy!r} not in report')
    hit = curve[curve['mean'] >= target_acc]
    return int(hit['budget'].iloc[0]) if len(hit) else NOT_REACHED


def budget_summary(report, target_acc, reference='random'):
    """budget_to_reach for every strategy and its ratio to the reference strategy's."""
    rows = []
    ref = budget_to_reach(report, reference, target_acc) if reference in report.strategies else NOT_REACHED
    for strategy in report.strategies:
        budget = budget_to_reach(report, strategy, target_acc)
        ratio = budget / ref if budget != NOT_REACHED and ref != NOT_REACHED else np.nan
        rows.append({'strategy': strategy, 'budget': budget, 'ratio_to_' + reference: ratio})
    return pd.DataFrame(rows)


def emit_report(report, out_dir, metrics=('balanced_accuracy', 'n_known')):
    """One table (strategy, budget, mean, stderr) and one SVG chart per metric."""
    mkdir_if_missing(out_dir)
    if not os.path.isdir(out_dir):
        raise NotADirectoryError(f'cannot write report into {out_dir}')
    written = []
    for metric in metrics:
        table = report.metric(metric)
        table_path = os.path.join(out_dir, f'{metric}.tsv')
        table.to_csv(table_path, sep='\t', index=False, float_format='%.17g')
        chart_path = os.path.join(out_dir, f'{metric}.svg')
        plot_metric_curves(table, metric, chart_path)
        written += [table_path, chart_path]
    logger.info('wrote %d report files to %s', len(written), out_dir)
    return written
