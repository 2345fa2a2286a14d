"""
Leave-one-vendor-out experiments.

Training uses every annotated volume of the training vendors, testing every annotated volume of the
held-out vendor. Before anything is trained, the split manifest is checked structurally: no volume of
the held-out vendor may appear among the training volumes.
"""

from typing import Dict, Any, List, Optional, Sequence
import os
from errors import ConfigError
from logger import Logger
from loggable import Loggable
from oct_types import Split
from io_data.dataset_index import DatasetIndex, IndexEntry
from evaluation.report import SegmentationReport, compare_reports, save_json
from harness.experiment_config import ExperimentConfig
from harness.commands import load_index, run_experiment, apply_determinism

MANIFEST_FILE = "manifest.json"
COMPARISON_FILE = "comparison.csv"

# Composition of the public training set: annotated volumes per vendor.
RETOUCH_TRAINING_COUNTS: Dict[str, int] = {"Cirrus": 24, "Spectralis": 24, "Topcon": 22}


class SplitManifest(Loggable):
    """
    The exact volume lists of a leave-one-vendor-out split.
    """

    def __init__(self, held_out: str, train: Sequence[IndexEntry], test: Sequence[IndexEntry]):
        self.__held_out = held_out
        self.__train = tuple(train)
        self.__test = tuple(test)

    @property
    def held_out(self) -> str:
        return self.__held_out

    @property
    def train(self) -> Sequence[IndexEntry]:
        return self.__train

    @property
    def test(self) -> Sequence[IndexEntry]:
        return self.__test

    def train_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for entry in self.__train:
            counts[entry.vendor] = counts.get(entry.vendor, 0) + 1
        return dict(sorted(counts.items()))

    def verify(self) -> None:
        """
        :raise ConfigError: if a training volume belongs to the held-out vendor, or if a volume is both
        a training and a test volume.
        """
        leaked = [e.volume for e in self.__train if e.vendor == self.__held_out]
        if leaked:
            raise ConfigError("Held-out vendor {0} leaks into training: {1}.".format(self.__held_out, ", ".join(leaked)))
        shared = sorted({e.volume for e in self.__train} & {e.volume for e in self.__test})
        if shared:
            raise ConfigError("Volume(s) both train and test: {0}.".format(", ".join(shared)))

    def to_dict(self) -> Dict[str, Any]:
        return {'log-type': 'experiment',
                'held_out': self.__held_out,
                'train_count': len(self.__train),
                'test_count': len(self.__test),
                'train_per_vendor': self.train_counts(),
                'train': [e.to_dict() for e in self.__train],
                'test': [e.to_dict() for e in self.__test]}


def split_manifest(index: DatasetIndex, vendors_train: Sequence[str], held_out: str) -> SplitManifest:
    """
    Build the split of an index: the annotated volumes of the training vendors against the annotated
    volumes of the held-out vendor.

    :raise ConfigError: if fewer than 2 vendors train or if the held-out vendor also trains.
    """
    if len(set(vendors_train)) < 2:
        raise ConfigError("Leave-one-vendor-out needs at least 2 training vendors, got {0}.".format(list(vendors_train)))
    if held_out in vendors_train:
        raise ConfigError("Vendor {0} both trains and is held out.".format(held_out))
    annotated = [e for e in index.entries if e.mask is not None]
    train = [e for e in annotated if e.vendor in set(vendors_train)]
    test = [e for e in annotated if e.vendor == held_out]
    return SplitManifest(held_out, train, test)


def retouch_split_counts(vendors_train: Sequence[str]) -> int:
    """
    :return: the number of training volumes of the public training set for a set of training vendors.
    """
    unknown = [v for v in vendors_train if v not in RETOUCH_TRAINING_COUNTS]
    if unknown:
        raise ConfigError("No public count for vendor(s) {0}.".format(", ".join(unknown)))
    return sum(RETOUCH_TRAINING_COUNTS[v] for v in set(vendors_train))


def _as_train(entry: IndexEntry) -> IndexEntry:
    return IndexEntry(entry.volume, entry.vendor, Split.TRAIN, entry.mask)


def cmd_loo(cfg: ExperimentConfig) -> Optional[SegmentationReport]:
    """
    Train on cfg.vendors_train, test on the single vendor of cfg.vendors_test.

    :return: the report of the held-out vendor.
    :raise ConfigError: if the vendors overlap, or if not exactly one vendor is held out.
    """
    cfg.check()
    if len(cfg.vendors_test) != 1:
        raise ConfigError("Leave-one-vendor-out holds out exactly one vendor, got {0}.".format(cfg.vendors_test))
    index = load_index(str(cfg.index))
    manifest = split_manifest(index, cfg.vendors_train, cfg.vendors_test[0])
    manifest.verify()
    if len(manifest.test) == 0:
        raise ConfigError("The index holds no annotated volume of {0}.".format(manifest.held_out))
    os.makedirs(cfg.output, exist_ok=True)
    save_json(manifest.to_dict(), os.path.join(cfg.output, MANIFEST_FILE))
    apply_determinism(cfg)
    Logger.log_object(cfg, "loo")
    Logger.log_object(manifest, "loo")
    if cfg.verbose:
        for line in manifest_lines(manifest):
            print(line, flush=True)
    return run_experiment(cfg,
                          DatasetIndex([_as_train(e) for e in manifest.train], index.root),
                          DatasetIndex(manifest.test, index.root),
                          cfg.output)


def _held_out_config(cfg: ExperimentConfig, vendors: Sequence[str], held_out: str, output: str) \
        -> ExperimentConfig:
    fold = ExperimentConfig.from_dict(cfg.to_dict())
    fold.vendors_train = [v for v in vendors if v != held_out]
    fold.vendors_test = [held_out]
    fold.output = output
    return fold


def cmd_loo_all(cfg: ExperimentConfig) -> Dict[str, Optional[SegmentationReport]]:
    """
    Hold out, in turn, every vendor of the index that has annotated volumes. The fold of vendor v is
    written to <output>/<v>.

    :return: the reports keyed by held-out vendor.
    """
    index = load_index(str(cfg.index))
    vendors = sorted({e.vendor for e in index.entries if e.mask is not None})
    if len(vendors) < 3:
        raise ConfigError("Holding out every vendor needs at least 3 annotated vendors, got {0}.".format(vendors))
    reports: Dict[str, Optional[SegmentationReport]] = {}
    for held_out in vendors:
        reports[held_out] = cmd_loo(_held_out_config(cfg, vendors, held_out, os.path.join(cfg.output, held_out)))
    return reports


def compare_models(cfg: ExperimentConfig, models: Sequence[str] = ("unet", "raspp"),
                   metric: str = "dice") -> Dict[str, SegmentationReport]:
    """
    Run the same leave-one-vendor-out split with several models (same seed, same plan) and write the
    side by side table <output>/comparison.csv.
    """
    reports: Dict[str, SegmentationReport] = {}
    for model in models:
        fold = ExperimentConfig.from_dict(cfg.to_dict())
        fold.model = model
        fold.output = os.path.join(cfg.output, model)
        report = cmd_loo(fold)
        if report is not None:
            reports[model] = report
    if reports:
        os.makedirs(cfg.output, exist_ok=True)
        compare_reports(reports, metric).to_csv(os.path.join(cfg.output, COMPARISON_FILE), float_format="%.17g")
    return reports


def manifest_lines(manifest: SplitManifest) -> List[str]:
    lines = ["held out : {0:s} ({1:d} volumes)".format(manifest.held_out, len(manifest.test))]
    for vendor, count in manifest.train_counts().items():
        lines.append("train    : {0:s} ({1:d} volumes)".format(vendor, count))
    lines.append("total    : {0:d} training volumes".format(len(manifest.train)))
    return lines
