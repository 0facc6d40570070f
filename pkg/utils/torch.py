import numpy as np
import torch


class num_threads:
    """Pin torch intra-op threads for the duration of a block.

    Head training runs under num_threads(1) so results do not depend on how many
    trials share the machine.
    """

    def __init__(self, n):
        self.n = n
        self.prev = None

    def __enter__(self):
        self.prev = torch.get_num_threads()
        torch.set_num_threads(self.n)

    def __exit__(self, *args):
        torch.set_num_threads(self.prev)
        return False


def to_double(x):
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float64))


def to_long(x):
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.int64))


def to_numpy(x):
    return x.detach().cpu().numpy().astype(np.float64, copy=True)
