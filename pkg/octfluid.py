"""
Command line of the retinal fluid segmentation pipeline.

    python octfluid.py phantom --profile Tiny --count 3 --out data
    python octfluid.py fingerprint --index data/index.json --out fingerprint.json
    python octfluid.py plan --fingerprint fingerprint.json --out plan.json
    python octfluid.py train --index data/index.json --plan plan.json --fingerprint fingerprint.json --out ckpt
    python octfluid.py predict --checkpoint ckpt --index data/index.json --out predictions
    python octfluid.py evaluate --index data/index.json --predictions predictions --out report
    python octfluid.py loo --config experiment.json
    python octfluid.py full --config experiment.json

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""

from typing import List, Optional
import argparse
import os
import sys
from errors import OctFluidError, EXIT_OK, EXIT_RUNTIME
from lock import ExtLock
from logger import Logger
from oct_types import Split, ModelName
from io_data.phantom import VENDOR_PROFILES
from planner.planner import plan_summary
from evaluation.metrics import REDUCERS
from harness.experiment_config import ExperimentConfig
from harness import commands
from harness import loo


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', dest='config', type=str, required=False,
                        help='the path to the JSON experiment configuration')
    parser.add_argument('--seed', dest='seed', type=int, required=False, help='the experiment seed')
    parser.add_argument('--out', dest='out', type=str, required=False, help='the output path')
    parser.add_argument('--model', dest='model', type=str, required=False,
                        choices=[m.value for m in ModelName], help='the network architecture')
    parser.add_argument('--workers', dest='workers', type=int, required=False,
                        help='the number of worker threads')
    parser.add_argument('--deterministic', dest='deterministic', action='store_true', default=None,
                        help='single threaded, reproducible run')
    parser.add_argument('--epochs', dest='epochs', type=int, required=False, help='the number of training epochs')
    parser.add_argument('--index', dest='index', type=str, required=False, help='the path to the dataset index')
    parser.add_argument('--verbose', dest='verbose', action='store_true', default=False,
                        help='print progress lines')
    parser.add_argument('--log', dest='log', type=str, required=False, default="octfluid.log",
                        help='the path to the run log')
    parser.add_argument('--lock-trace', dest='lock_trace', type=str, required=False,
                        help='the path to the lock acquisition trace')


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Retinal OCT fluid segmentation')
    verbs = parser.add_subparsers(dest='verb', required=True)

    p = verbs.add_parser('phantom', help='write a phantom dataset and its index')
    _common(p)
    p.add_argument('--profile', dest='profile', type=str, default="Tiny", choices=sorted(VENDOR_PROFILES))
    p.add_argument('--count', dest='count', type=int, default=3)
    p.add_argument('--vendors', dest='vendors', type=str, required=False,
                   help='comma separated vendors: "count" phantoms per vendor')
    p.add_argument('--blobs', dest='blobs', type=str, default="0,3",
                   help='inclusive range of blobs per class, for example "1,3"')
    p.add_argument('--split', dest='split', type=str, default=Split.TRAIN.value, choices=[s.value for s in Split])

    p = verbs.add_parser('fingerprint', help='extract the dataset fingerprint')
    _common(p)

    p = verbs.add_parser('plan', help='plan patch size, batch size and pooling')
    _common(p)
    p.add_argument('--fingerprint', dest='fingerprint', type=str, default="fingerprint.json")
    p.add_argument('--dimensionality', dest='dimensionality', type=int, choices=[2, 3], required=False)

    p = verbs.add_parser('train', help='train a network')
    _common(p)
    p.add_argument('--plan', dest='plan', type=str, default="plan.json")
    p.add_argument('--fingerprint', dest='fingerprint', type=str, default="fingerprint.json")

    p = verbs.add_parser('predict', help='predict masks and probabilities')
    _common(p)
    p.add_argument('--checkpoint', dest='checkpoint', type=str, default="checkpoint")
    p.add_argument('--split', dest='split', type=str, required=False, choices=[s.value for s in Split])
    p.add_argument('--vendors', dest='vendors', type=str, required=False)

    p = verbs.add_parser('evaluate', help='score predictions against ground truth masks')
    _common(p)
    p.add_argument('--predictions', dest='predictions', type=str, default="predictions")
    p.add_argument('--reducer', dest='reducer', type=str, required=False, choices=list(REDUCERS))

    p = verbs.add_parser('loo', help='leave-one-vendor-out experiment')
    _common(p)
    p.add_argument('--train-vendors', dest='train_vendors', type=str, required=False)
    p.add_argument('--test-vendor', dest='test_vendor', type=str, required=False)
    p.add_argument('--all', dest='all', action='store_true', default=False, help='hold out every vendor in turn')
    p.add_argument('--compare', dest='compare', action='store_true', default=False,
                   help='run unet and raspp on the same split')

    p = verbs.add_parser('full', help='train on the training vendors, test on the test vendors')
    _common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Load the configuration document, then apply the flags (flags win).
    """
    cfg = ExperimentConfig.load(args.config) if args.config is not None else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    if args.model is not None:
        cfg.model = args.model
    if args.workers is not None:
        cfg.workers = args.workers
        if args.deterministic is None:
            cfg.deterministic = args.workers == 0
    if args.deterministic is not None:
        cfg.deterministic = args.deterministic
    if args.epochs is not None:
        cfg.train.max_epochs = args.epochs
    if args.index is not None:
        cfg.index = args.index
    if getattr(args, 'train_vendors', None):
        cfg.vendors_train = args.train_vendors
    if getattr(args, 'test_vendor', None):
        cfg.vendors_test = [args.test_vendor]
    if getattr(args, 'dimensionality', None) is not None:
        cfg.dimensionality = args.dimensionality
    if getattr(args, 'reducer', None) is not None:
        cfg.detection_reducer = args.reducer
    cfg.verbose = cfg.verbose or args.verbose
    return cfg


def _echo(cfg: ExperimentConfig) -> None:
    Logger.log_object(cfg, "config")
    print(cfg.to_json(), flush=True)


def run(args: argparse.Namespace) -> None:
    cfg = resolve_config(args)
    _echo(cfg)
    index = str(cfg.index) if cfg.index is not None else "index.json"

    if args.verb == 'phantom':
        low, high = (int(v) for v in args.blobs.split(","))
        vendors = [v for v in (args.vendors or "").split(",") if v]
        result = commands.cmd_phantom(cfg.seed, args.profile, args.count, args.out or "phantoms", vendors,
                                      (low, high), Split(args.split))
        print("{0:d} phantom pairs written".format(len(result)))
    elif args.verb == 'fingerprint':
        fingerprint = commands.cmd_fingerprint(index, args.out or commands.FINGERPRINT_FILE)
        print("{0:d} training volumes fingerprinted".format(fingerprint.num_volumes))
    elif args.verb == 'plan':
        plan = commands.cmd_plan(args.fingerprint, args.out or commands.PLAN_FILE, cfg)
        for line in plan_summary(plan):
            print(line)
    elif args.verb == 'train':
        checkpoint = commands.cmd_train(index, args.plan, args.fingerprint, args.out or commands.CHECKPOINT_DIR, cfg)
        print("{0:d} epochs, {1:d} weights".format(checkpoint.epoch, checkpoint.spec.param_count()))
    elif args.verb == 'predict':
        vendors = [v for v in (args.vendors or "").split(",") if v]
        split = Split(args.split) if args.split is not None else None
        records = commands.cmd_predict(args.checkpoint, index, args.out or commands.PREDICTIONS_DIR, split, vendors,
                                       0 if cfg.deterministic else cfg.workers, cfg.verbose)
        print("{0:d} volumes predicted".format(len(records)))
    elif args.verb == 'evaluate':
        report = commands.cmd_evaluate(index, args.predictions, args.out or ".", cfg.detection_reducer,
                                       0 if cfg.deterministic else cfg.workers)
        print(report.frame.to_string(index=False))
    elif args.verb == 'loo':
        if args.compare:
            reports = loo.compare_models(cfg)
            for model, report in reports.items():
                print("{0:s}: overall dice {1:.4f}".format(model, report.overall_dice()))
        elif args.all:
            for vendor, report in loo.cmd_loo_all(cfg).items():
                if report is not None:
                    print("{0:s}: overall dice {1:.4f}".format(vendor, report.overall_dice()))
        else:
            report = loo.cmd_loo(cfg)
            if report is not None:
                print(report.frame.to_string(index=False))
    elif args.verb == 'full':
        report = commands.cmd_full(cfg)
        if report is not None:
            print(report.frame.to_string(index=False))


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        ExtLock.init(args.lock_trace or os.devnull, enabled=args.lock_trace is not None)
        Logger.init(args.log)
        run(args)
    except OctFluidError as e:
        print("ERROR: {0}".format(e), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print("ERROR: {0}".format(e), file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        Logger.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
