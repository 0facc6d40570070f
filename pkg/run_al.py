"""Command-line entry point: gen-data, run, report and score."""
import os
import sys
import logging
import argparse

import numpy as np
import torch
import yaml
import pytorch_lightning as pl

from data.pool import LongTailSpec, synth_longtail
from data.pool_io import ingest, load_state, save_pool
from eval import aggregate_all, budget_summary, emit_report, REPORT_METRICS
from model.linear_head import TrainConfig, load_head, train
from ood.score_sheet import save_score_sheet, score_pool
from ood.scores import OOD_KINDS
from trainer import ExperimentConfig, load_logs, run_trials
from utils.config import Config, parse_opts

logger = logging.getLogger('aloe')

LOG_FORMAT = '[%(name)s:%(funcName)s:%(lineno)s] %(levelname)s: %(message)s'


def setup_logging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)


def print_versions():
    logger.info('python version : %s', sys.version.replace('\n', ' '))
    logger.info('numpy version : %s', np.__version__)
    logger.info('torch version : %s', torch.__version__)
    logger.info('pytorch_lightning version : %s', pl.__version__)


def gen_data(args):
    with open(args.spec_file, 'r') as f:
        spec = yaml.safe_load(f) or {}
    if not isinstance(spec, dict):
        raise ValueError(f'{args.spec_file}: expected a mapping of long-tail parameters')
    spec = spec.get('pool', spec)
    pool = synth_longtail(LongTailSpec.from_dict(spec))
    save_pool(pool, args.out, args.format)
    logger.info('wrote pool (N=%d, d=%d, K=%d) to %s', pool.N, pool.d, pool.n_classes, args.out)


def run(args):
    cfg = Config(args.cfg, overrides=parse_opts(args.opts))
    exp = ExperimentConfig.from_config(cfg)
    out_dir = args.out or os.path.join(cfg.results_root_dir, cfg.id)
    os.makedirs(out_dir, exist_ok=True)

    log_handler = logging.FileHandler(os.path.join(out_dir, 'run.log'), mode='w')
    log_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(log_handler)
    try:
        logger.info('config %s -> %s', cfg.path, out_dir)
        with open(os.path.join(out_dir, 'config.yml'), 'w') as f:
            yaml.safe_dump(cfg.to_dict(), f, sort_keys=True)
        logs = run_trials(exp, workers=args.workers, log_dir=os.path.join(out_dir, 'logs'),
                          head_dir=os.path.join(out_dir, 'heads') if args.save_heads else None,
                          diag_dir=os.path.join(out_dir, 'diagnostics') if args.save_diagnostics else None)
        emit_report(aggregate_all(logs), os.path.join(out_dir, 'report'), exp.metrics)
    finally:
        logging.getLogger().removeHandler(log_handler)
        log_handler.close()


def report(args):
    table = aggregate_all(load_logs(args.log_dir))
    emit_report(table, args.out, args.metrics)
    if args.target is not None:
        summary = budget_summary(table, args.target, reference=args.reference)
        summary.to_csv(os.path.join(args.out, 'budget_to_reach.tsv'), sep='\t', index=False, float_format='%.6g')
        print(summary.to_string(index=False))


def score(args):
    pool = ingest(args.pool)
    state = load_state(pool, args.state)
    if args.head is not None:
        head = load_head(args.head)
        if set(head.class_map) != state.known_classes:
            raise ValueError(f'{args.head}: head classes {sorted(head.class_map)} differ from the state\'s '
                             f'known classes {state.sorted_known_classes()}')
    else:
        head = train(pool, state, TrainConfig(seed=args.seed))
    sheet = score_pool(args.ood, head, pool, state)
    if args.out is None:
        sys.stdout.write(f'# kind={sheet.kind} tau={sheet.tau!r}\n')
        sheet.to_frame().to_csv(sys.stdout, sep='\t', index=False, float_format='%.17g')
    else:
        save_score_sheet(sheet, args.out)
        logger.info('%s: %d of %d unlabeled flagged (tau=%.6g)', args.out, int(sheet.flagged.sum()),
                    len(sheet.scores), sheet.tau)


def build_parser():
    parser = argparse.ArgumentParser(prog='run_al', description='open-world active learning simulator')
    parser.add_argument('--verbose', '-v', action='store_true', default=False)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen-data', help='synthesize a long-tail pool and write it to a file')
    p.add_argument('spec_file')
    p.add_argument('out')
    p.add_argument('--format', choices=['binary', 'text'], default=None)
    p.set_defaults(func=gen_data)

    p = sub.add_parser('run', help='run every trial of an experiment config')
    p.add_argument('cfg', help='config file or config id under cfg/')
    p.add_argument('--out', '-o', default=None, help='output directory, default <results_root_dir>/<config id>')
    p.add_argument('--opts', nargs='*', default=[], help='overrides like run.T=5 pool.alpha=0.1')
    p.add_argument('--workers', '-w', type=int, default=None)
    p.add_argument('--save-heads', dest='save_heads', action='store_true', default=False)
    p.add_argument('--save-diagnostics', dest='save_diagnostics', action='store_true', default=False,
                   help="write every round's query batch to diagnostics/")
    p.set_defaults(func=run)

    p = sub.add_parser('report', help='re-aggregate trial logs into tables and charts')
    p.add_argument('log_dir')
    p.add_argument('--out', '-o', required=True)
    p.add_argument('--metrics', nargs='+', choices=REPORT_METRICS, default=['balanced_accuracy', 'n_known'])
    p.add_argument('--target', type=float, default=None, help='report the budget needed to reach this accuracy')
    p.add_argument('--reference', default='random')
    p.set_defaults(func=report)

    p = sub.add_parser('score', help='dump the OOD score sheet of a labeled state')
    p.add_argument('pool')
    p.add_argument('state')
    p.add_argument('--ood', choices=OOD_KINDS, required=True)
    p.add_argument('--head', default=None, help='head checkpoint; trained from the state when omitted')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', '-o', default=None)
    p.set_defaults(func=score)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    setup_logging(args.verbose)
    print_versions()
    try:
        args.func(args)
    except Exception as e:
        logger.debug('command failed', exc_info=True)
        print(f'error: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(cli_main())
