"""Pool and round-state file formats.

Binary pool (little-endian):
    b'ALOEPOOL', u32 version=1, u32 N, u32 d, u32 K,
    N x (d float32, u32 label), u32 T_count, T_count x u32 test id

Delimited text pool:
    d=<d> K=<K>
    <d floats> <label>          one line per example
plus a companion <name>.test file with one test id per line.

Both formats hold float32 values; embeddings are widened to float64 on load.
"""
import os
import re
import struct
import logging

import numpy as np

from data.pool import EmbeddedPool, RoundState
from utils.utils import companion_path, mkdir_if_missing

logger = logging.getLogger(__name__)

POOL_MAGIC = b'ALOEPOOL'
POOL_VERSION = 1
_HEADER = struct.Struct('<8sIIII')
_U32 = struct.Struct('<I')
_TEXT_HEADER = re.compile(r'^\s*d\s*=\s*(\d+)\s+K\s*=\s*(\d+)\s*$')


class PoolFormatError(ValueError):
    pass


def _record_dtype(d):
    return np.dtype([('x', '<f4', (d,)), ('label', '<u4')])


def _check_rows(embeddings, labels, K, path):
    bad = np.flatnonzero(~np.isfinite(embeddings).all(axis=1))
    if len(bad):
        raise PoolFormatError(f'{path}: row {bad[0]}: non-finite value')
    bad = np.flatnonzero(labels >= K)
    if len(bad):
        raise PoolFormatError(f'{path}: row {bad[0]}: label {labels[bad[0]]} >= K={K}')


def _build_pool(embeddings, labels, K, test_ids, path):
    test_ids = np.asarray(test_ids, dtype=np.int64)
    bad = np.flatnonzero((test_ids < 0) | (test_ids >= len(labels)))
    if len(bad):
        raise PoolFormatError(f'{path}: test entry {bad[0]}: id {test_ids[bad[0]]} outside [0, {len(labels)})')
    if len(np.unique(test_ids)) != len(test_ids):
        raise PoolFormatError(f'{path}: duplicate test ids')
    try:
        return EmbeddedPool(embeddings=embeddings.astype(np.float64), labels=labels.astype(np.int64),
                            n_classes=K, test_ids=test_ids)
    except ValueError as e:
        raise PoolFormatError(f'{path}: {e}') from e


def read_pool_binary(path):
    with open(path, 'rb') as f:
        buf = f.read()
    if len(buf) < _HEADER.size:
        raise PoolFormatError(f'{path}: malformed header (file too short)')
    magic, version, N, d, K = _HEADER.unpack_from(buf, 0)
    if magic != POOL_MAGIC:
        raise PoolFormatError(f'{path}: malformed header (bad magic {magic!r})')
    if version != POOL_VERSION:
        raise PoolFormatError(f'{path}: unsupported pool version {version}')
    if d < 1 or K < 1:
        raise PoolFormatError(f'{path}: malformed header (d={d}, K={K})')

    dtype = _record_dtype(d)
    offset = _HEADER.size
    available = (len(buf) - offset) // dtype.itemsize
    if available < N:
        raise PoolFormatError(f'{path}: row {available}: truncated record (header declares N={N})')
    records = np.frombuffer(buf, dtype=dtype, count=N, offset=offset)
    offset += N * dtype.itemsize

    if len(buf) < offset + _U32.size:
        raise PoolFormatError(f'{path}: missing test id count')
    (t_count,) = _U32.unpack_from(buf, offset)
    offset += _U32.size
    if len(buf) < offset + 4 * t_count:
        raise PoolFormatError(f'{path}: truncated test id list (declared {t_count})')
    test_ids = np.frombuffer(buf, dtype='<u4', count=t_count, offset=offset)

    embeddings = records['x'].astype(np.float64)
    labels = records['label'].astype(np.int64)
    _check_rows(embeddings, labels, K, path)
    return _build_pool(embeddings, labels, K, test_ids, path)


def write_pool_binary(pool, path):
    mkdir_if_missing(path)
    records = np.empty(pool.N, dtype=_record_dtype(pool.d))
    records['x'] = pool.embeddings.astype(np.float32)
    records['label'] = pool.labels.astype(np.uint32)
    with open(path, 'wb') as f:
        f.write(_HEADER.pack(POOL_MAGIC, POOL_VERSION, pool.N, pool.d, pool.n_classes))
        f.write(records.tobytes())
        f.write(_U32.pack(len(pool.test_ids)))
        f.write(pool.test_ids.astype('<u4').tobytes())


def read_pool_text(path):
    test_path = companion_path(path, '.test')
    if not os.path.isfile(test_path):
        raise FileNotFoundError(f'missing test id file {test_path}')
    with open(path, 'r') as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise PoolFormatError(f'{path}: malformed header (empty file)')
    match = _TEXT_HEADER.match(lines[0])
    if match is None:
        raise PoolFormatError(f'{path}: malformed header {lines[0]!r}, expected "d=<d> K=<K>"')
    d, K = int(match.group(1)), int(match.group(2))
    if d < 1 or K < 1:
        raise PoolFormatError(f'{path}: malformed header (d={d}, K={K})')

    embeddings = np.empty((len(lines) - 1, d), dtype=np.float64)
    labels = np.empty(len(lines) - 1, dtype=np.int64)
    for row, line in enumerate(lines[1:]):
        fields = line.split()
        if len(fields) != d + 1:
            raise PoolFormatError(f'{path}: row {row}: expected {d + 1} fields, got {len(fields)}')
        try:
            embeddings[row] = [float(v) for v in fields[:d]]
            labels[row] = int(fields[d])
        except ValueError as e:
            raise PoolFormatError(f'{path}: row {row}: {e}') from e
        if labels[row] < 0:
            raise PoolFormatError(f'{path}: row {row}: negative label {labels[row]}')
    _check_rows(embeddings, labels, K, path)

    with open(test_path, 'r') as f:
        try:
            test_ids = [int(line) for line in f.read().split()]
        except ValueError as e:
            raise PoolFormatError(f'{test_path}: {e}') from e
    # text holds float32 values at %.9g; snap back onto the float32 grid
    embeddings = embeddings.astype(np.float32).astype(np.float64)
    return _build_pool(embeddings, labels, K, test_ids, path)


def write_pool_text(pool, path):
    mkdir_if_missing(path)
    table = np.column_stack([pool.embeddings.astype(np.float32).astype(np.float64), pool.labels])
    np.savetxt(path, table, fmt=['%.9g'] * pool.d + ['%d'],
               header=f'd={pool.d} K={pool.n_classes}', comments='')
    np.savetxt(companion_path(path, '.test'), pool.test_ids, fmt='%d')


def sniff_format(path):
    with open(path, 'rb') as f:
        head = f.read(len(POOL_MAGIC))
    return 'binary' if head == POOL_MAGIC else 'text'


def ingest(path, fmt=None):
    if not os.path.isfile(path):
        raise FileNotFoundError(f'pool file not found: {path}')
    fmt = fmt or sniff_format(path)
    if fmt == 'binary':
        pool = read_pool_binary(path)
    elif fmt in ('text', 'delimited-text'):
        pool = read_pool_text(path)
    else:
        raise ValueError(f'unknown pool format {fmt!r}')
    logger.info('loaded pool %s: N=%d, d=%d, K=%d', path, pool.N, pool.d, pool.n_classes)
    return pool


def save_pool(pool, path, fmt=None):
    fmt = fmt or ('text' if os.path.splitext(path)[1] in ('.txt', '.tsv', '.dat') else 'binary')
    if fmt == 'binary':
        write_pool_binary(pool, path)
    else:
        write_pool_text(pool, path)


def save_state(state, path):
    mkdir_if_missing(path)
    with open(path, 'w') as f:
        f.write(f't={state.t}\n')
        for i in state.labeled_ids:
            f.write(f'{int(i)}\n')


def load_state(pool, path):
    with open(path, 'r') as f:
        lines = [line.strip() for line in f.read().splitlines() if line.strip()]
    t = 1
    if lines and lines[0].startswith('t='):
        t = int(lines[0][2:])
        lines = lines[1:]
    try:
        labeled = [int(line) for line in lines]
    except ValueError as e:
        raise ValueError(f'{path}: {e}') from e
    return RoundState.from_labeled(pool, labeled, t=t)
