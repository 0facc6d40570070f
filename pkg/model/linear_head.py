"""|K_t|-way linear softmax head over fixed embeddings, retrained cold each round."""
import struct
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import torch
import pytorch_lightning as pl
from torch import nn
from torch.nn import functional as F
from torch.utils.data import DataLoader, TensorDataset
from scipy.special import logsumexp, softmax

from utils.torch import num_threads, to_double, to_long, to_numpy
from utils.utils import mkdir_if_missing, readonly

logger = logging.getLogger(__name__)

# one fit per round; device banners and loader-worker hints would flood the run log
logging.getLogger('pytorch_lightning').setLevel(logging.WARNING)
logging.getLogger('lightning.pytorch').setLevel(logging.WARNING)
warnings.filterwarnings('ignore', message='.*does not have many workers.*')

HEAD_MAGIC = b'ALOEHEAD'
HEAD_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    minibatch: int = 64
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f'learning_rate must be > 0, got {self.learning_rate}')
        if self.epochs < 1:
            raise ValueError(f'epochs must be >= 1, got {self.epochs}')
        if self.minibatch < 1:
            raise ValueError(f'minibatch must be >= 1, got {self.minibatch}')
        if self.weight_decay < 0:
            raise ValueError(f'weight_decay must be >= 0, got {self.weight_decay}')

    @classmethod
    def from_dict(cls, d, seed=0):
        d = d or {}
        return cls(learning_rate=float(d.get('learning_rate', 0.1)), epochs=int(d.get('epochs', 100)),
                   minibatch=int(d.get('minibatch', 64)), weight_decay=float(d.get('weight_decay', 1e-4)),
                   seed=int(seed))


@dataclass(frozen=True, eq=False)
class LinearHead:
    W: np.ndarray           # (k, d)
    b: np.ndarray           # (k,)
    class_map: tuple        # local output index -> global class id

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        class_map = tuple(int(c) for c in self.class_map)
        assert W.ndim == 2 and b.shape == (W.shape[0],), f'W {W.shape} / b {b.shape} mismatch'
        assert len(class_map) == W.shape[0], f'class_map has {len(class_map)} entries for {W.shape[0]} outputs'
        assert len(set(class_map)) == len(class_map), 'class_map has duplicates'
        assert np.isfinite(W).all() and np.isfinite(b).all(), 'non-finite head parameters'
        object.__setattr__(self, 'W', readonly(W))
        object.__setattr__(self, 'b', readonly(b))
        object.__setattr__(self, 'class_map', class_map)

    @property
    def n_outputs(self):
        return self.W.shape[0]

    @property
    def dim(self):
        return self.W.shape[1]

    @classmethod
    def zeros(cls, class_map, dim):
        return cls(W=np.zeros((len(class_map), dim)), b=np.zeros(len(class_map)), class_map=class_map)

    def global_classes(self, local):
        return np.asarray(self.class_map, dtype=np.int64)[local]


@dataclass(frozen=True)
class Posterior:
    logits: np.ndarray
    probs: np.ndarray

    @property
    def local_argmax(self):
        return np.argmax(self.probs, axis=-1)


def _check_dim(head, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != head.dim:
        raise ValueError(f'embedding has dimension {x.shape[-1]}, head expects {head.dim}')
    return x


def predict(head, x):
    """Posterior for one embedding (d,) or a batch (n, d)."""
    x = _check_dim(head, x)
    logits = x @ head.W.T + head.b
    return Posterior(logits=logits, probs=softmax(logits, axis=-1))


def predict_classes(head, x):
    return head.global_classes(predict(head, x).local_argmax)


def _target_distribution(probs, target):
    k = probs.shape[-1]
    if isinstance(target, str):
        if target == 'uniform':
            return np.full_like(probs, 1.0 / k)
        if target == 'predicted':
            return np.eye(k)[np.argmax(probs, axis=-1)]
        raise ValueError(f'unknown gradient target {target!r}')
    j = int(target)
    if not 0 <= j < k:
        raise ValueError(f'one-hot target {j} outside [0, {k})')
    return np.broadcast_to(np.eye(k)[j], probs.shape).copy()


def head_gradient(head, x, target='uniform'):
    """Cross-entropy gradient w.r.t. (W, b) against a target distribution.

    target is 'uniform', 'predicted' (one-hot at argmax p) or an int j (one-hot at
    local class j). Flattened as W row-major followed by b; (n, k*(d+1)) for a batch.
    """
    x = _check_dim(head, x)
    batched = x.ndim == 2
    X = np.atleast_2d(x)
    probs = predict(head, X).probs
    delta = probs - _target_distribution(probs, target)             # (n, k)
    grad_W = delta[:, :, None] * X[:, None, :]                      # (n, k, d)
    flat = np.concatenate([grad_W.reshape(len(X), -1), delta], axis=1)
    return flat if batched else flat[0]


def cross_entropy(head, x, target='uniform'):
    """Scalar loss matching head_gradient, used for finite-difference checks."""
    x = _check_dim(head, x)
    post = predict(head, x)
    q = _target_distribution(np.atleast_2d(post.probs), target)
    log_p = post.logits - logsumexp(post.logits, axis=-1, keepdims=True)
    return float(-(q * np.atleast_2d(log_p)).sum(axis=-1).mean())


def _labeled_arrays(pool, state, class_map):
    ids = np.sort(state.labeled_ids)
    local = {c: i for i, c in enumerate(class_map)}
    y = np.array([local[int(c)] for c in pool.labels[ids]], dtype=np.int64)
    return pool.embeddings[ids], y


class HeadTrainer(pl.LightningModule):
    """Softmax cross-entropy on a zero-initialised linear layer, optimised with SGD."""

    def __init__(self, dim, n_outputs, cfg):
        super().__init__()
        self.cfg = cfg
        self.layer = nn.Linear(dim, n_outputs, dtype=torch.float64)
        nn.init.zeros_(self.layer.weight)
        nn.init.zeros_(self.layer.bias)

    def forward(self, x):
        return self.layer(x)

    def training_step(self, batch, batch_idx):
        x, y = batch
        loss = F.cross_entropy(self(x), y)
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f'non-finite loss at epoch {self.current_epoch}')
        return loss

    def configure_optimizers(self):
        return torch.optim.SGD(self.parameters(), lr=self.cfg.learning_rate, weight_decay=self.cfg.weight_decay)

    def to_head(self, class_map):
        return LinearHead(W=to_numpy(self.layer.weight), b=to_numpy(self.layer.bias), class_map=class_map)


def train(pool, state, cfg):
    """Cold-start minibatch SGD on softmax cross-entropy over the labeled set."""
    if state.n_labeled < 1 or len(state.known_classes) < 1:
        raise ValueError('training needs at least one labeled example')
    class_map = tuple(state.sorted_known_classes())
    X, y = _labeled_arrays(pool, state, class_map)

    with num_threads(1):
        model = HeadTrainer(pool.d, len(class_map), cfg)
        # the seeded generator fixes the per-epoch shuffle order
        loader = DataLoader(TensorDataset(to_double(X), to_long(y)), batch_size=cfg.minibatch, shuffle=True,
                            generator=torch.Generator().manual_seed(int(cfg.seed)))
        trainer = pl.Trainer(max_epochs=cfg.epochs, accelerator='cpu', devices=1, precision=64, deterministic=True,
                             enable_checkpointing=False, logger=False, enable_progress_bar=False,
                             enable_model_summary=False)
        trainer.fit(model, loader)
        head = model.to_head(class_map)
    logger.debug('trained head: k=%d, n=%d, final loss=%.4f', len(class_map), len(y), mean_loss(head, X, y))
    return head


def mean_loss(head, X, y):
    """Mean softmax cross-entropy of local labels y."""
    post = predict(head, X)
    log_p = post.logits - logsumexp(post.logits, axis=-1, keepdims=True)
    return float(-log_p[np.arange(len(y)), y].mean())


def save_head(head, path):
    mkdir_if_missing(path)
    with open(path, 'wb') as f:
        f.write(struct.pack('<8sIII', HEAD_MAGIC, HEAD_VERSION, head.n_outputs, head.dim))
        f.write(np.asarray(head.class_map, dtype='<u4').tobytes())
        f.write(head.W.astype('<f8').tobytes())
        f.write(head.b.astype('<f8').tobytes())


def load_head(path):
    with open(path, 'rb') as f:
        buf = f.read()
    header = struct.Struct('<8sIII')
    if len(buf) < header.size:
        raise ValueError(f'{path}: malformed head header')
    magic, version, k, d = header.unpack_from(buf, 0)
    if magic != HEAD_MAGIC or version != HEAD_VERSION:
        raise ValueError(f'{path}: not a version {HEAD_VERSION} head checkpoint')
    expected = header.size + 4 * k + 8 * k * d + 8 * k
    if len(buf) != expected:
        raise ValueError(f'{path}: expected {expected} bytes, found {len(buf)}')
    offset = header.size
    class_map = np.frombuffer(buf, dtype='<u4', count=k, offset=offset)
    offset += 4 * k
    W = np.frombuffer(buf, dtype='<f8', count=k * d, offset=offset).reshape(k, d)
    offset += 8 * k * d
    b = np.frombuffer(buf, dtype='<f8', count=k, offset=offset)
    return LinearHead(W=W, b=b, class_map=tuple(class_map.tolist()))
