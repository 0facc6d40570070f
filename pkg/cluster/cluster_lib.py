from functools import partial

from cluster.gmm import gmm_em
from cluster.kcenter import kcenter_partition
from cluster.kmeans import kmeans, minibatch_kmeans


cluster_dict = {
    'kmeans': partial(kmeans, init='k-means++'),
    'kmeans_random': partial(kmeans, init='random'),
    'minibatch_kmeans': minibatch_kmeans,
    'gmm': gmm_em,
    'kcenter': kcenter_partition,
}


def partition(kind, points, k, seed=0):
    if kind not in cluster_dict:
        raise ValueError(f'unknown cluster kind {kind!r}, expected one of {sorted(cluster_dict)}')
    return cluster_dict[kind](points, k, seed=seed)
