import os
import os.path as osp
import glob

import yaml
from easydict import EasyDict


def parse_opts(opts):
    """['pool.alpha=0.1', 'run.T=5'] -> {'pool.alpha': 0.1, 'run.T': 5}"""
    overrides = {}
    for opt in opts or []:
        if '=' not in opt:
            raise ValueError(f'override must look like section.key=value, got {opt!r}')
        key, value = opt.split('=', 1)
        overrides[key.strip()] = yaml.safe_load(value)
    return overrides


def set_dotted(d, dotted_key, value):
    *sections, key = dotted_key.split('.')
    for section in sections:
        if section not in d or d[section] is None:
            d[section] = EasyDict()
        d = d[section]
    d[key] = value


class Config:

    def __init__(self, cfg_id, overrides=None, cfg_root='cfg'):
        if osp.isfile(cfg_id):
            files = [cfg_id]
        else:
            files = glob.glob(osp.join(cfg_root, '**', '%s.yml' % cfg_id), recursive=True)
        if len(files) == 0:
            raise FileNotFoundError(f'config not found: {cfg_id}')
        assert len(files) == 1, f'ambiguous config id {cfg_id}: {files}'
        self.path = files[0]
        self.id = osp.splitext(osp.basename(files[0]))[0]

        with open(files[0], 'r') as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f'{files[0]}: top level of a config must be a mapping')
        self.yml_dict = EasyDict(loaded)
        for key, value in (overrides or {}).items():
            set_dotted(self.yml_dict, key, value)

        self.results_root_dir = os.path.expanduser(self.yml_dict.get('results_root_dir', 'results'))

    def __getattribute__(self, name):
        yml_dict = super().__getattribute__('yml_dict')
        if name in yml_dict:
            return yml_dict[name]
        else:
            return super().__getattribute__(name)

    def __setattr__(self, name, value):
        try:
            yml_dict = super().__getattribute__('yml_dict')
        except AttributeError:
            return super().__setattr__(name, value)
        if name in yml_dict:
            yml_dict[name] = value
        else:
            return super().__setattr__(name, value)

    def get(self, name, default=None):
        if hasattr(self, name):
            return getattr(self, name)
        else:
            return default

    def to_dict(self):
        return yaml.safe_load(yaml.safe_dump(_plain(self.yml_dict)))


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    return d
