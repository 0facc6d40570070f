import os

import numpy as np


def isfolder(pathname):
    '''
    a path whose last component has no extension is treated as a folder,
    e.g. results/run_0.5x is NOT a folder but results/run is
    '''
    if not isinstance(pathname, str) or not pathname:
        return False
    pathname = os.path.normpath(pathname)
    if pathname == '.':
        return True
    name, ext = os.path.splitext(os.path.basename(pathname))
    return len(name) > 0 and len(ext) == 0


def mkdir_if_missing(input_path):
    folder = input_path if isfolder(input_path) else os.path.dirname(input_path)
    if folder:
        os.makedirs(folder, exist_ok=True)


def companion_path(path, ext):
    """pool.txt -> pool.test"""
    return os.path.splitext(path)[0] + ext


def convert_secs2time(seconds):
    m, s = divmod(int(seconds), 60)
    h, m = divmod(m, 60)
    return '[%d:%02d:%02d]' % (h, m, s)


def derive_seed(seed, *keys):
    """Independent 32-bit seed for (seed, *keys); keys are ints or short strings."""
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            key = int.from_bytes(key.encode('utf-8')[:8], 'little')
        entropy.append(int(key))
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def readonly(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array
