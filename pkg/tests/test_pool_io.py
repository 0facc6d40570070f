import struct

import numpy as np
import pytest

from data.pool import init_label, oracle_label
from data.pool_io import PoolFormatError, ingest, load_state, save_pool, save_state, sniff_format


def write_text_pool(path, header, rows, test_ids):
    path.write_text('\n'.join([header] + rows) + '\n')
    path.with_suffix('.test').write_text(''.join(f'{i}\n' for i in test_ids))
    return str(path)


def test_text_echo(tmp_path):
    path = write_text_pool(tmp_path / 'pool.txt', 'd=2 K=2',
                           ['0.5 1.0 0', '-1 2 1', '3.25 0 0', '1e-3 -4 1'], [2, 3])
    pool = ingest(path)
    assert (pool.N, pool.d, pool.n_classes) == (4, 2, 2)
    assert pool.labels.tolist() == [0, 1, 0, 1]
    assert pool.test_ids.tolist() == [2, 3]
    assert pool.train_ids.tolist() == [0, 1]
    np.testing.assert_array_equal(pool.embeddings[0], [0.5, 1.0])
    assert pool.embeddings[3, 0] == float(np.float32(1e-3))


def test_text_label_out_of_range_names_row(tmp_path):
    path = write_text_pool(tmp_path / 'pool.txt', 'd=2 K=3', ['0 0 0', '1 1 7', '2 2 1'], [0])
    with pytest.raises(PoolFormatError, match='row 1'):
        ingest(path)


def test_text_dimension_mismatch_names_row(tmp_path):
    path = write_text_pool(tmp_path / 'pool.txt', 'd=2 K=2', ['0 0 0', '1 1 1', '2 2 2 0'], [0, 1])
    with pytest.raises(PoolFormatError, match='row 2: expected 3 fields'):
        ingest(path)


def test_text_nonfinite_names_row(tmp_path):
    path = write_text_pool(tmp_path / 'pool.txt', 'd=2 K=2', ['0 0 0', '1 nan 1', '2 2 0', '3 3 1'], [2, 3])
    with pytest.raises(PoolFormatError, match='row 1: non-finite'):
        ingest(path)


def test_text_malformed_header(tmp_path):
    path = write_text_pool(tmp_path / 'pool.txt', 'dim 2', ['0 0 0'], [0])
    with pytest.raises(PoolFormatError, match='malformed header'):
        ingest(path)


def test_text_missing_companion(tmp_path):
    path = tmp_path / 'pool.txt'
    path.write_text('d=1 K=1\n0 0\n')
    with pytest.raises(FileNotFoundError, match='pool.test'):
        ingest(str(path))


def test_binary_and_text_agree(tmp_path, tiny_pool):
    save_pool(tiny_pool, str(tmp_path / 'pool.bin'))
    save_pool(tiny_pool, str(tmp_path / 'pool.txt'))
    assert sniff_format(str(tmp_path / 'pool.bin')) == 'binary'
    assert sniff_format(str(tmp_path / 'pool.txt')) == 'text'
    from_binary = ingest(str(tmp_path / 'pool.bin'))
    from_text = ingest(str(tmp_path / 'pool.txt'))
    assert from_binary.same_contents(from_text)
    assert from_binary.same_contents(tiny_pool)


def test_binary_layout(tmp_path, tiny_pool):
    path = tmp_path / 'pool.bin'
    save_pool(tiny_pool, str(path))
    buf = path.read_bytes()
    magic, version, N, d, K = struct.unpack_from('<8sIIII', buf, 0)
    assert (magic, version, N, d, K) == (b'ALOEPOOL', 1, tiny_pool.N, tiny_pool.d, tiny_pool.n_classes)
    assert len(buf) == 24 + N * (4 * d + 4) + 4 + 4 * len(tiny_pool.test_ids)


def test_binary_truncated(tmp_path, tiny_pool):
    path = tmp_path / 'pool.bin'
    save_pool(tiny_pool, str(path))
    path.write_bytes(path.read_bytes()[:24 + 10 * (4 * tiny_pool.d + 4) + 3])
    with pytest.raises(PoolFormatError, match='row 10'):
        ingest(str(path))


def test_binary_bad_label(tmp_path, tiny_pool):
    path = tmp_path / 'pool.bin'
    save_pool(tiny_pool, str(path))
    buf = bytearray(path.read_bytes())
    record = 4 * tiny_pool.d + 4
    struct.pack_into('<I', buf, 24 + 5 * record + 4 * tiny_pool.d, 99)
    path.write_bytes(bytes(buf))
    with pytest.raises(PoolFormatError, match='row 5: label 99'):
        ingest(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match='nope.bin'):
        ingest(str(tmp_path / 'nope.bin'))


def test_state_file(tmp_path, tiny_pool):
    state = init_label(tiny_pool, k1=2, b=6, seed=0)
    state = oracle_label(tiny_pool, state, state.unlabeled_ids[[4, 0]])
    path = str(tmp_path / 'state.txt')
    save_state(state, path)
    loaded = load_state(tiny_pool, path)
    assert loaded.t == 2
    np.testing.assert_array_equal(loaded.labeled_ids, state.labeled_ids)
    assert loaded.known_classes == state.known_classes
