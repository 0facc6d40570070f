"""The active-learning loop: cold-start training, evaluation and querying over T rounds,
repeated across seeds and strategies."""
import os
import re
import time
import logging
import multiprocessing
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from data.pool import LongTailSpec, init_label, oracle_label, synth_longtail
from data.pool_io import ingest
from metrics import stats_func
from model.linear_head import TrainConfig, predict_classes, save_head, train
from strategy.strategy_lib import StrategyConfig, select
from utils.utils import convert_secs2time, derive_seed, mkdir_if_missing

logger = logging.getLogger(__name__)

LOG_COLUMNS = ['t', 'budget', 'balanced_accuracy', 'n_known', 'known_accuracy']
LOG_NAME = re.compile(r'^(?P<strategy>.+)_seed(?P<seed>\d+)\.tsv$')


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    pool: dict                  # {'source': path[, 'format': ...]} or LongTailSpec fields
    strategies: tuple           # StrategyConfig entries
    B: int
    T: int
    k1: int
    seeds: tuple
    train: dict
    eval_every_round: bool = True
    workers: int = 1
    metrics: tuple = ('balanced_accuracy', 'n_known')

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f'run.T must be >= 1, got {self.T}')
        if self.B < 1:
            raise ValueError(f'run.B must be >= 1, got {self.B}')
        if self.k1 < 1:
            raise ValueError(f'run.k1 must be >= 1, got {self.k1}')
        if len(self.seeds) < 1:
            raise ValueError('run.seeds must name at least one trial seed')
        if len(self.strategies) < 1:
            raise ValueError('no strategy configured')
        names = [s.display_name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ValueError(f'strategy labels must be unique, got {names}')
        TrainConfig.from_dict(self.train)

    @classmethod
    def from_config(cls, cfg):
        run = cfg.get('run', None) or {}
        strategies = cfg.get('strategies', None)
        if strategies is None:
            strategies = [cfg.get('strategy', None) or 'aloe']
        seeds = run.get('seeds', 1)
        seeds = tuple(range(int(seeds))) if isinstance(seeds, int) else tuple(int(s) for s in seeds)
        report = cfg.get('report', None) or {}
        return cls(name=cfg.id, pool=dict(cfg.get('pool', None) or {}),
                   strategies=tuple(StrategyConfig.from_dict(s) for s in strategies),
                   B=int(run.get('B', 10)), T=int(run.get('T', 3)), k1=int(run.get('k1', 1)), seeds=seeds,
                   train=dict(cfg.get('train', None) or {}),
                   eval_every_round=bool(run.get('eval_every_round', True)), workers=int(run.get('workers', 1)),
                   metrics=tuple(report.get('metrics', ('balanced_accuracy', 'n_known'))))

    def load_pool(self):
        if self.pool.get('source'):
            return ingest(os.path.expanduser(self.pool['source']), self.pool.get('format'))
        return synth_longtail(LongTailSpec.from_dict(self.pool))


@dataclass(eq=False)
class TrialLog:
    strategy: str
    seed: int
    rows: pd.DataFrame
    head: object = None         # final LinearHead, not persisted with the log

    def __post_init__(self):
        budget = self.rows['budget'].to_numpy()
        n_known = self.rows['n_known'].to_numpy()
        assert (np.diff(budget) > 0).all(), f'{self.strategy}/{self.seed}: budget must strictly increase'
        assert (np.diff(n_known) >= 0).all(), f'{self.strategy}/{self.seed}: n_known decreased'

    @property
    def filename(self):
        return f'{self.strategy}_seed{self.seed}.tsv'

    def save(self, log_dir):
        path = os.path.join(log_dir, self.filename)
        mkdir_if_missing(path)
        self.rows.to_csv(path, sep='\t', index=False, float_format='%.17g')
        return path

    @classmethod
    def load(cls, path):
        match = LOG_NAME.match(os.path.basename(path))
        if match is None:
            raise ValueError(f'{path}: trial log names look like <strategy>_seed<seed>.tsv')
        rows = pd.read_csv(path, sep='\t')
        missing = [c for c in LOG_COLUMNS if c not in rows.columns]
        if missing:
            raise ValueError(f'{path}: missing columns {missing}')
        return cls(strategy=match['strategy'], seed=int(match['seed']), rows=rows[LOG_COLUMNS])


def evaluate(pool, state, head):
    predictions = predict_classes(head, pool.embeddings[pool.test_ids])
    return {name: func(predictions, pool, state.known_classes) for name, func in stats_func.items()}


def run_trial(exp, seed, strategy=None, pool=None, diag_dir=None):
    """One seeded trial: T budget levels, the first being the initial labeled batch.

    With diag_dir set, each round's query batch is written to
    <diag_dir>/<strategy>_seed<seed>_round<t>.tsv.
    """
    strategy = strategy or exp.strategies[0]
    pool = pool if pool is not None else exp.load_pool()
    if exp.k1 > pool.n_classes:
        raise ValueError(f'run.k1={exp.k1} exceeds the pool\'s {pool.n_classes} classes')

    state = init_label(pool, exp.k1, exp.B, seed=derive_seed(seed, 0, 'init'))
    rows = []
    head = None
    for t in range(1, exp.T + 1):
        tic = time.perf_counter()
        head = train(pool, state, TrainConfig.from_dict(exp.train, seed=derive_seed(seed, t, 'train')))
        last = t == exp.T or len(state.unlabeled_ids) == 0
        if exp.eval_every_round or last:
            scores = evaluate(pool, state, head)
        else:
            scores = {name: np.nan for name in stats_func}
        rows.append({'t': t, 'budget': state.n_labeled, 'n_known': len(state.known_classes), **scores})
        logger.debug('%s seed %d round %d: budget %d, known %d, acc %.4f, train+eval %.2fs', strategy.display_name,
                     seed, t, state.n_labeled, len(state.known_classes), scores['balanced_accuracy'],
                     time.perf_counter() - tic)
        if last:
            if t < exp.T:
                logger.info('%s seed %d: pool exhausted after %d of %d rounds', strategy.display_name, seed, t, exp.T)
            break

        tic = time.perf_counter()
        batch = select(strategy, pool, state, head, exp.B, seed=derive_seed(seed, t, 'query'))
        logger.debug('%s seed %d round %d: selected %d ids in %.3fs', strategy.display_name, seed, t, len(batch),
                     time.perf_counter() - tic)
        if diag_dir is not None:
            batch.save_diagnostics(os.path.join(diag_dir, f'{strategy.display_name}_seed{seed}_round{t}.tsv'))
        state = oracle_label(pool, state, batch.ids)

    return TrialLog(strategy=strategy.display_name, seed=int(seed), rows=pd.DataFrame(rows, columns=LOG_COLUMNS),
                    head=head)


def _run_task(args):
    return run_trial(*args)


def resolve_workers(workers):
    env = os.environ.get('ALOE_WORKERS')
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ValueError(f'ALOE_WORKERS must be an integer, got {env!r}') from None
    return max(1, int(workers))


def run_trials(exp, pool=None, workers=None, log_dir=None, head_dir=None, diag_dir=None):
    """Every (strategy, seed) trial, ordered by strategy then seed regardless of workers."""
    pool = pool if pool is not None else exp.load_pool()
    workers = resolve_workers(exp.workers if workers is None else workers)
    tasks = [(exp, seed, strategy, pool, diag_dir) for strategy in exp.strategies for seed in exp.seeds]
    logger.info('running %d trials (%d strategies x %d seeds) on %d workers', len(tasks), len(exp.strategies),
                len(exp.seeds), workers)

    tic = time.time()
    if workers > 1 and len(tasks) > 1:
        with multiprocessing.get_context('spawn').Pool(min(workers, len(tasks))) as mp_pool:
            logs = list(tqdm(mp_pool.imap(_run_task, tasks), total=len(tasks), desc='trials'))
    else:
        logs = [_run_task(task) for task in tqdm(tasks, desc='trials')]
    logger.info('finished %d trials in %s', len(logs), convert_secs2time(time.time() - tic))

    for log in logs:
        if log_dir is not None:
            log.save(log_dir)
        if head_dir is not None:
            save_head(log.head, os.path.join(head_dir, f'{log.strategy}_seed{log.seed}.head'))
    return logs


def load_logs(log_dir):
    paths = sorted(p for p in os.listdir(log_dir) if LOG_NAME.match(p))
    if not paths:
        raise FileNotFoundError(f'no trial logs (<strategy>_seed<seed>.tsv) in {log_dir}')
    return [TrialLog.load(os.path.join(log_dir, p)) for p in paths]
