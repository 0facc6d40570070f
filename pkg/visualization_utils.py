import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from utils.utils import mkdir_if_missing

METRIC_LABELS = {
    'balanced_accuracy': 'balanced accuracy',
    'n_known': 'known classes',
    'known_accuracy': 'accuracy on known classes',
}


def plot_metric_curves(table, metric, save_fn, title=None):
    """Mean curve with a +-stderr band per strategy; each line is tagged series-<strategy>."""
    mkdir_if_missing(save_fn)
    with plt.rc_context({'svg.hashsalt': 'aloe', 'svg.fonttype': 'none'}):
        fig, ax = plt.subplots(1, 1, figsize=(6, 4))
        for strategy in dict.fromkeys(table['strategy']):
            rows = table[table['strategy'] == strategy].sort_values('budget')
            budget, mean, stderr = rows['budget'].to_numpy(), rows['mean'].to_numpy(), rows['stderr'].to_numpy()
            line, = ax.plot(budget, mean, marker='o', markersize=3, label=strategy)
            line.set_gid(f'series-{strategy}')
            ax.fill_between(budget, mean - stderr, mean + stderr, color=line.get_color(), alpha=0.2, linewidth=0)
        ax.set_xlabel('labeled examples')
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        if title is not None:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend(loc='best', fontsize=8)
        fig.tight_layout()
        fig.savefig(save_fn, format='svg', metadata={'Date': None})
        plt.close(fig)
