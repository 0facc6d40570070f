"""End-to-end behaviour on synthetic long-tail pools. Everything but the diversity and
determinism checks is marked slow."""
import os
import logging
from dataclasses import replace

import numpy as np
import pytest

from data.pool import RoundState
from eval import NOT_REACHED, aggregate, aggregate_all, budget_to_reach
from model.linear_head import LinearHead
from ood.score_sheet import score_pool
from run_al import cli_main
from strategy.aloe import aloe_select
from strategy.strategy_lib import StrategyConfig
from tests.conftest import REPO_ROOT, make_pool
from trainer import ExperimentConfig, run_trials
from utils.config import Config

logger = logging.getLogger(__name__)

LONGTAIL_CFG = os.path.join(REPO_ROOT, 'cfg', 'synthetic', 'cifar100lt_like.yml')
TINY_CFG = os.path.join(REPO_ROOT, 'cfg', 'synthetic', 'tiny.yml')


def unknown_cluster_pool(seed):
    """One labeled known class at the origin, ten unknown Gaussian classes spaced 10 sigma apart."""
    rng = np.random.default_rng(seed)
    d = 8
    centers = [np.zeros(d)] + [10.0 * j * np.eye(d)[(j - 1) % d] for j in range(1, 11)]
    sizes = [30] + [20] * 10
    emb = [rng.normal(size=(n, d)) + c for n, c in zip(sizes, centers)]
    emb += [rng.normal(size=(1, d)) + c for c in centers]
    labels = np.concatenate([np.full(n, i) for i, n in enumerate(sizes)] + [np.arange(11)])
    n_train = sum(sizes)
    pool = make_pool(np.vstack(emb), labels, test_ids=np.arange(n_train, n_train + 11))
    return pool, RoundState.from_labeled(pool, np.arange(30))


def test_cluster_first_selection_is_more_diverse():
    wins = 0
    for seed in range(10):
        pool, state = unknown_cluster_pool(seed)
        head = LinearHead.zeros((0,), pool.d)
        sheet = score_pool('mahalanobis', head, pool, state)
        top = sheet.ids[np.argsort(-sheet.scores, kind='stable')[:10]]
        n_top = len(set(pool.labels[top].tolist()) - {0})
        batch = aloe_select(pool, state, head, 10, ood_kind='mahalanobis', seed=seed, sheet=sheet)
        n_aloe = len(set(pool.labels[batch.ids].tolist()) - {0})
        wins += n_aloe >= 2 * n_top
    assert wins >= 8


def run_and_read(tmp_path, name, env_workers=None, monkeypatch=None):
    if env_workers is not None:
        monkeypatch.setenv('ALOE_WORKERS', str(env_workers))
    out = tmp_path / name
    assert cli_main(['run', TINY_CFG, '--out', str(out), '--opts', 'run.T=2']) == 0
    files = sorted(p for p in out.rglob('*.tsv'))
    return {p.relative_to(out): p.read_bytes() for p in files}


def test_run_is_reproducible(tmp_path, monkeypatch):
    monkeypatch.delenv('ALOE_WORKERS', raising=False)
    assert run_and_read(tmp_path, 'a') == run_and_read(tmp_path, 'b')


@pytest.mark.slow
def test_run_is_reproducible_across_workers(tmp_path, monkeypatch):
    a = run_and_read(tmp_path, 'a', env_workers=1, monkeypatch=monkeypatch)
    b = run_and_read(tmp_path, 'b', env_workers=2, monkeypatch=monkeypatch)
    assert a == b


@pytest.fixture(scope='module')
def longtail_logs():
    exp = ExperimentConfig.from_config(Config(LONGTAIL_CFG))
    aloe = next(s for s in exp.strategies if s.name == 'aloe')
    ablations = (replace(aloe, cluster='minibatch_kmeans', label='aloe_minibatch'),
                 replace(aloe, cluster='gmm', label='aloe_gmm'))
    exp = replace(exp, strategies=exp.strategies + ablations)
    logs = run_trials(exp, workers=1)
    return exp, logs, aggregate_all(logs)


def final(report, strategy, metric):
    curve = report.curve(strategy, metric)
    return float(curve['mean'].iloc[-1])


@pytest.mark.slow
def test_aloe_discovers_more_classes(longtail_logs):
    _, _, report = longtail_logs
    aloe, rand = report.curve('aloe', 'n_known'), report.curve('random', 'n_known')
    assert final(report, 'aloe', 'n_known') > final(report, 'random', 'n_known')
    assert (aloe['mean'].iloc[2:].to_numpy() > rand['mean'].iloc[2:].to_numpy()).all()


@pytest.mark.slow
def test_aloe_accuracy_beats_random(longtail_logs):
    _, _, report = longtail_logs
    assert final(report, 'aloe', 'balanced_accuracy') >= final(report, 'random', 'balanced_accuracy') + 0.02


@pytest.mark.slow
def test_aloe_saves_labels(longtail_logs):
    exp, logs, _ = longtail_logs
    by_seed = {}
    for log in logs:
        if log.strategy in ('aloe', 'random'):
            by_seed.setdefault(log.seed, {})[log.strategy] = aggregate([log])
    level = int(round(0.6 * exp.T)) - 1
    ratios = []
    for seed, reports in sorted(by_seed.items()):
        target = float(reports['random'].curve('random')['mean'].iloc[level])
        aloe = budget_to_reach(reports['aloe'], 'aloe', target)
        rand = budget_to_reach(reports['random'], 'random', target)
        ratios.append(np.inf if aloe == NOT_REACHED else aloe / rand)
    logger.info('aloe / random budget ratios per seed: %s', ratios)
    assert sum(r <= 0.9 for r in ratios) > len(ratios) / 2


@pytest.mark.slow
def test_clustering_choice_matters_little(longtail_logs):
    _, _, report = longtail_logs
    base_acc, base_known = final(report, 'aloe', 'balanced_accuracy'), final(report, 'aloe', 'n_known')
    for label in ('aloe_minibatch', 'aloe_gmm'):
        assert abs(final(report, label, 'balanced_accuracy') - base_acc) < 0.05
        assert abs(final(report, label, 'n_known') - base_known) < 0.1 * base_known


@pytest.mark.slow
def test_reverse_aloe_is_less_diverse(longtail_logs):
    _, _, report = longtail_logs
    logger.info('final mean n_known: aloe %.1f, reverse_aloe %.1f', final(report, 'aloe', 'n_known'),
                final(report, 'reverse_aloe', 'n_known'))
    assert final(report, 'reverse_aloe', 'n_known') <= final(report, 'aloe', 'n_known')


def test_longtail_preset_matches_protocol():
    exp = ExperimentConfig.from_config(Config(LONGTAIL_CFG))
    assert (exp.B, exp.T, exp.k1, len(exp.seeds)) == (50, 10, 3, 5)
    assert [s.display_name for s in exp.strategies] == ['aloe', 'random', 'reverse_aloe']
    assert exp.strategies[0] == StrategyConfig(name='aloe', ood='mahalanobis', cluster='kmeans', multiplier=2)
    assert exp.strategies[2] == StrategyConfig(name='reverse_aloe', ood='gradnorm', cluster='kcenter')
