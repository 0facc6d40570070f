from dataclasses import dataclass

import numpy as np

from cluster.cluster_lib import cluster_dict
from ood.scores import OOD_KINDS
from strategy.aloe import FEATURES, aloe_select, reverse_aloe_select
from strategy.baselines import badge_select, coreset_select, margin_select, random_select, typiclust_select


strategy_dict = {
    'aloe': lambda cfg, pool, state, head, B, seed: aloe_select(
        pool, state, head, B, ood_kind=cfg.ood, cluster_kind=cfg.cluster, multiplier=cfg.multiplier,
        seed=seed, feature=cfg.feature),
    'reverse_aloe': lambda cfg, pool, state, head, B, seed: reverse_aloe_select(
        pool, state, head, B, ood_kind=cfg.ood, cluster_kind=cfg.cluster, seed=seed, feature=cfg.feature),
    'random': lambda cfg, pool, state, head, B, seed: random_select(state, B, seed=seed),
    'margin': lambda cfg, pool, state, head, B, seed: margin_select(pool, state, head, B),
    'coreset': lambda cfg, pool, state, head, B, seed: coreset_select(pool, state, B),
    'badge': lambda cfg, pool, state, head, B, seed: badge_select(pool, state, head, B, seed=seed),
    'typiclust': lambda cfg, pool, state, head, B, seed: typiclust_select(pool, state, B, knn=cfg.knn, seed=seed),
}


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    ood: str = 'gradnorm'
    cluster: str = 'kmeans'
    multiplier: int = 2
    knn: int = 20
    feature: str = 'embedding'
    label: str = None

    def __post_init__(self):
        if self.name not in strategy_dict:
            raise ValueError(f'unknown strategy {self.name!r}, expected one of {sorted(strategy_dict)}')
        if self.ood not in OOD_KINDS:
            raise ValueError(f'strategy {self.name}: unknown ood kind {self.ood!r}')
        if self.cluster not in cluster_dict:
            raise ValueError(f'strategy {self.name}: unknown cluster kind {self.cluster!r}')
        if self.feature not in FEATURES:
            raise ValueError(f'strategy {self.name}: unknown feature {self.feature!r}')
        if self.multiplier < 1:
            raise ValueError(f'strategy {self.name}: multiplier must be >= 1, got {self.multiplier}')
        if self.knn < 1:
            raise ValueError(f'strategy {self.name}: knn must be >= 1, got {self.knn}')

    @property
    def display_name(self):
        return self.label or self.name

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(name=d)
        d = dict(d)
        if 'name' not in d:
            raise ValueError(f'strategy entry {d} has no name')
        return cls(name=str(d['name']), ood=str(d.get('ood', 'gradnorm')), cluster=str(d.get('cluster', 'kmeans')),
                   multiplier=int(d.get('multiplier', 2)), knn=int(d.get('knn', 20)),
                   feature=str(d.get('feature', 'embedding')), label=d.get('label'))


def select(strategy_cfg, pool, state, head, B, seed=0):
    batch = strategy_dict[strategy_cfg.name](strategy_cfg, pool, state, head, B, seed)
    expected = min(int(B), len(state.unlabeled_ids))
    assert len(batch) == expected, f'{strategy_cfg.name} returned {len(batch)} ids, expected {expected}'
    assert np.isin(batch.ids, state.unlabeled_ids).all(), f'{strategy_cfg.name} queried a labeled id'
    return batch
