"""
Pipeline commands: each one wraps a module operation with file I/O.

Artifacts written under an experiment output directory:

    train_index.json      the training entries (loo and full runs)
    test_index.json       the test entries (loo and full runs)
    fingerprint.json      cmd_fingerprint
    plan.json             cmd_plan
    checkpoint/           cmd_train (see training.checkpoint)
    predictions/          cmd_predict: <nnn>_<stem>_mask.mha, <nnn>_<stem>_prob_<channel>.mha, predictions.json
    report.csv            cmd_evaluate (also report.json, detection.csv, roc_points.csv)
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar
from concurrent.futures import ThreadPoolExecutor
import json
import os
import numpy as np
import torch
from errors import MissingArtifactError, ConfigError, PreconditionError
from logger import Logger
from oct_types import Split, CLASS_NAMES, FLUID_CLASSES
from io_data.volume import Volume, LabelMask
from io_data.dataset_index import DatasetIndex, IndexEntry
from io_data.fingerprint import Fingerprint, extract_fingerprint
from io_data.metaimage import read_metaimage, write_metaimage
from io_data.phantom import generate_phantom
from planner.plan_config import PlanConfig
from planner.planner import make_plan, pools_for, plan_summary
from network.builder import build_network
from network.parameters import init_parameters
from training.sampler import prepare_cases
from training.trainer import train
from training.checkpoint import Checkpoint
from training.inference import predict_volume, ProbabilityMap
from evaluation.metrics import detection_score, DetectionRecord
from evaluation.postprocessing import largest_components, decide_postprocessing
from evaluation.report import volume_metrics, build_report, detection_table, roc_points_frame, \
    SegmentationReport, save_json
from harness.experiment_config import ExperimentConfig

FINGERPRINT_FILE = "fingerprint.json"
PLAN_FILE = "plan.json"
CHECKPOINT_DIR = "checkpoint"
PREDICTIONS_DIR = "predictions"
PREDICTIONS_MANIFEST = "predictions.json"
TRAIN_INDEX_FILE = "train_index.json"
TEST_INDEX_FILE = "test_index.json"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
DETECTION_CSV = "detection.csv"
ROC_POINTS_CSV = "roc_points.csv"
INDEX_FILE = "index.json"

CHANNEL_NAMES: Dict[int, str] = {0: "background", **CLASS_NAMES}

T = TypeVar('T')
R = TypeVar('R')


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise MissingArtifactError(path, what)
    return path


def _read_json(path: str, what: str) -> Any:
    with open(_require(path, what), "r") as fd:
        return json.load(fd)


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fd:
        fd.write(text + "\n")


def load_index(path: str) -> DatasetIndex:
    return DatasetIndex.load(_require(path, "dataset index"))


def load_fingerprint(path: str) -> Fingerprint:
    return Fingerprint.from_dict(_read_json(path, "fingerprint"))


def load_plan(path: str) -> PlanConfig:
    return PlanConfig.from_dict(_read_json(path, "plan"))


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 0) -> List[R]:
    """
    Apply a function to every item, in a thread pool when workers > 0. Results keep the input order.
    """
    if workers <= 0 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def apply_determinism(cfg: ExperimentConfig) -> None:
    """
    In deterministic mode, torch runs on one thread with deterministic kernels.
    """
    if cfg.deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.set_num_threads(1)


# --------------------------------------------------------------------------------------------------
# phantom
# --------------------------------------------------------------------------------------------------

def cmd_phantom(seed: int,
                profile: str,
                count: int,
                out: str,
                vendors: Optional[Sequence[str]] = None,
                blobs_per_class: Tuple[int, int] = (0, 3),
                split: Split = Split.TRAIN) -> DatasetIndex:
    """
    Write phantom (volume, mask) MetaImage pairs and their index.

    Without vendors, "count" phantoms are drawn with the seeds seed, seed+1, ... and tagged with the
    vendor of the profile. With vendors, "count" phantoms are drawn per vendor, the vendor k using the
    seeds seed + k × count, ...

    :return: the index (also written to <out>/index.json).
    :raise PreconditionError: if count < 1.
    """
    if count < 1:
        raise PreconditionError("The phantom count must be >= 1, got {0}.".format(count))
    os.makedirs(out, exist_ok=True)
    groups: List[Optional[str]] = list(vendors) if vendors else [None]
    entries: List[IndexEntry] = []
    for k, vendor in enumerate(groups):
        for i in range(count):
            number = k * count + i
            volume, mask = generate_phantom(seed + number, profile, blobs_per_class=blobs_per_class, vendor=vendor)
            volume_name = "phantom_{0:03d}_volume.mha".format(number)
            mask_name = "phantom_{0:03d}_mask.mha".format(number)
            write_metaimage(volume, os.path.join(out, volume_name))
            write_metaimage(mask, os.path.join(out, mask_name))
            entries.append(IndexEntry(volume_name, volume.vendor, split, mask_name))
    index = DatasetIndex(entries, os.path.abspath(out))
    index.save(os.path.join(out, INDEX_FILE))
    Logger.log_dict({'log-type': 'message', 'message': 'phantoms written', 'count': len(entries),
                     'profile': profile, 'seed': seed, 'out': out}, "phantom")
    return index


# --------------------------------------------------------------------------------------------------
# fingerprint / plan
# --------------------------------------------------------------------------------------------------

def cmd_fingerprint(index_path: str, out: str) -> Fingerprint:
    """
    Extract the fingerprint of the training entries of an index and write it to "out".
    """
    fingerprint = extract_fingerprint(load_index(index_path))
    _write_text(out, fingerprint.to_json())
    Logger.log_object(fingerprint, "fingerprint")
    return fingerprint


def _overrides(plan: PlanConfig, overrides: Dict[str, Any]) -> PlanConfig:
    changes = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    if 'patch_size' in changes and 'pools_per_axis' not in changes:
        changes['pools_per_axis'] = pools_for(changes['patch_size'])
    return plan.replace(**changes) if changes else plan


def plan_for(fingerprint: Fingerprint, cfg: ExperimentConfig) -> PlanConfig:
    """
    Plan a dataset, then apply the plan overrides of the experiment.
    """
    overrides = cfg.plan_overrides
    plan = make_plan(fingerprint, cfg.budget,
                     base_features=int(overrides.get('base_features', 32)),
                     max_features=int(overrides.get('max_features', 320)),
                     dimensionality=cfg.dimensionality,
                     max_dataset_fraction=cfg.max_dataset_fraction)
    return _overrides(plan, overrides)


def cmd_plan(fingerprint_path: str, out: str, cfg: Optional[ExperimentConfig] = None) -> PlanConfig:
    plan = plan_for(load_fingerprint(fingerprint_path), cfg or ExperimentConfig())
    _write_text(out, plan.to_json())
    Logger.log_object(plan, "plan")
    for line in plan_summary(plan):
        Logger.log(line, "plan")
    return plan


# --------------------------------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------------------------------

def training_pairs(index: DatasetIndex, vendors: Optional[Sequence[str]] = None) \
        -> List[Tuple[Volume, LabelMask]]:
    selected = index.select(Split.TRAIN, vendors or None)
    if len(selected) == 0:
        raise PreconditionError("No training entry for the vendors {0}.".format(list(vendors or [])))
    return [selected.load_pair(e) for e in selected.entries]


def validation_split(count: int, fraction: float, seed: int) -> Tuple[List[int], List[int]]:
    """
    Split the positions of the training pairs into a fitting fold and a validation fold.

    The validation fold holds round(fraction × count) positions, at least 1 and at most count - 1,
    drawn by a generator seeded with "seed". With fewer than 2 pairs or a zero fraction, the validation
    fold is empty.

    :return: the fitting positions and the validation positions, both sorted.
    """
    if count < 2 or fraction <= 0:
        return list(range(count)), []
    size = min(count - 1, max(1, int(round(fraction * count))))
    held = sorted(int(i) for i in np.random.default_rng(seed).permutation(count)[:size])
    return [i for i in range(count) if i not in held], held


def validate(checkpoint: Checkpoint, pairs: Sequence[Tuple[Volume, LabelMask]], workers: int = 0) -> Checkpoint:
    """
    Decide the per-class connected component post-processing on validation pairs (pairs the network
    was not fitted on).
    :return: the checkpoint carrying the policy.
    """
    predictions = map_ordered(lambda pair: predict_volume(checkpoint, pair[0]).argmax(), list(pairs), workers)
    policy = decide_postprocessing([(p, gt) for p, (_, gt) in zip(predictions, pairs)])
    Logger.log_dict({'log-type': 'message', 'message': 'post-processing policy',
                     'policy': {CLASS_NAMES[c]: v for c, v in sorted(policy.items())}}, "train")
    return checkpoint.with_postprocessing(policy)


def cmd_train(index_path: str, plan_path: str, fingerprint_path: str, out: str,
              cfg: Optional[ExperimentConfig] = None) -> Checkpoint:
    """
    Train a network on the training entries of the index and write the checkpoint directory "out".
    When the post-processing is decided, "cfg.validation_fraction" of the training pairs are held out
    of the fitting and used for that decision.

    :raise MissingArtifactError: if the index, the plan or the fingerprint is missing.
    """
    cfg = cfg or ExperimentConfig()
    index = load_index(index_path)
    plan = load_plan(plan_path)
    fingerprint = load_fingerprint(fingerprint_path)
    apply_determinism(cfg)
    train_cfg = cfg.resolved_train()
    aug_cfg = cfg.resolved_augmentation()
    Logger.log_object(cfg, "train")

    pairs = training_pairs(index, cfg.vendors_train)
    decide = cfg.postprocessing and train_cfg.max_epochs > 0
    fitting, held_out = validation_split(len(pairs), cfg.validation_fraction if decide else 0.0, cfg.seed)
    Logger.log_dict({'log-type': 'message', 'message': 'validation fold',
                     'fitting': len(fitting), 'validation': len(held_out)}, "train")
    cases = prepare_cases([pairs[i] for i in fitting], fingerprint, plan)
    spec = build_network(cfg.model, plan)
    params = init_parameters(spec, cfg.seed)
    Logger.log_object(spec, "train")
    checkpoint = train(spec, params, cases, plan, train_cfg, aug_cfg, fingerprint, cfg.verbose)
    if decide:
        # A single training pair leaves no validation fold: the policy is decided on that pair.
        checkpoint = validate(checkpoint, [pairs[i] for i in (held_out or fitting)], train_cfg.workers)
    checkpoint.save(out)
    Logger.log_object(checkpoint, "train")
    return checkpoint


# --------------------------------------------------------------------------------------------------
# predict
# --------------------------------------------------------------------------------------------------

def _stem(position: int, entry: IndexEntry) -> str:
    name = os.path.basename(entry.volume)
    for extension in (".mhd", ".mha"):
        if name.lower().endswith(extension):
            name = name[:-len(extension)]
    return "{0:03d}_{1:s}".format(position, name)


def _predict_entry(checkpoint: Checkpoint, index: DatasetIndex, position: int, entry: IndexEntry,
                   out: str) -> Dict[str, Any]:
    volume = index.load_volume(entry)
    probs = predict_volume(checkpoint, volume)
    mask = largest_components(probs.argmax(), checkpoint.postprocessing)
    stem = _stem(position, entry)
    record: Dict[str, Any] = {'volume': entry.volume, 'vendor': entry.vendor, 'mask': stem + "_mask.mha",
                              'probabilities': {}}
    write_metaimage(mask, os.path.join(out, record['mask']))
    for c in range(probs.num_classes):
        name = "{0:s}_prob_{1:s}.mha".format(stem, CHANNEL_NAMES.get(c, str(c)))
        write_metaimage(Volume(probs.channel(c).copy(), probs.spacing, probs.origin, probs.meta),
                        os.path.join(out, name))
        record['probabilities'][CHANNEL_NAMES.get(c, str(c))] = name
    return record


def cmd_predict(checkpoint_dir: str, index_path: str, out: str, split: Optional[Split] = None,
                vendors: Optional[Sequence[str]] = None, workers: int = 0, verbose: bool = False) \
        -> List[Dict[str, Any]]:
    """
    Predict every selected volume of an index: one mask MetaImage and one probability MetaImage per
    channel, plus the manifest predictions.json.

    :return: the manifest records, in index order.
    """
    checkpoint = Checkpoint.load(_require(checkpoint_dir, "checkpoint directory"))
    index = load_index(index_path).select(split, vendors or None)
    if len(index) == 0:
        raise PreconditionError('No volume of "{0:s}" to predict.'.format(index_path))
    os.makedirs(out, exist_ok=True)

    def run(item: Tuple[int, IndexEntry]) -> Dict[str, Any]:
        position, entry = item
        record = _predict_entry(checkpoint, index, position, entry, out)
        if verbose:
            print("{0:04d}> {1:s}".format(position, entry.volume), flush=True)
        return record

    records = map_ordered(run, list(enumerate(index.entries)), workers)
    save_json({'index': os.path.abspath(index_path), 'predictions': records}, os.path.join(out, PREDICTIONS_MANIFEST))
    Logger.log_dict({'log-type': 'message', 'message': 'predictions written', 'count': len(records),
                     'out': out}, "predict")
    return records


def load_probabilities(directory: str, record: Dict[str, Any]) -> ProbabilityMap:
    channels = [read_metaimage(os.path.join(directory, record['probabilities'][CHANNEL_NAMES.get(c, str(c))]),
                               as_mask=False)
                for c in range(len(record['probabilities']))]
    first = channels[0]
    return ProbabilityMap(np.stack([c.array for c in channels]), first.spacing, first.origin, first.meta)


# --------------------------------------------------------------------------------------------------
# evaluate
# --------------------------------------------------------------------------------------------------

def _evaluate_record(index: DatasetIndex, predictions_dir: str, record: Dict[str, Any], reducer: str):
    entry = next((e for e in index.entries if e.volume == record['volume']), None)
    if entry is None:
        raise ConfigError('Predicted volume "{0}" is not in the dataset index.'.format(record['volume']))
    gt = index.load_mask(entry)
    if gt is None:
        return None
    pred = read_metaimage(_require(os.path.join(predictions_dir, record['mask']), "predicted mask"), as_mask=True)
    metrics = volume_metrics(entry.volume, entry.vendor, pred, gt)
    probs = load_probabilities(predictions_dir, record)
    detections = [DetectionRecord(entry.volume, c, detection_score(probs, c, reducer), int(gt.count(c) > 0),
                                  entry.vendor) for c in FLUID_CLASSES]
    return metrics, detections


def cmd_evaluate(index_path: str, predictions_dir: str, out: str, reducer: str = "percentile",
                 workers: int = 0) -> SegmentationReport:
    """
    Score the predictions of the annotated volumes: report.csv / report.json (Dice and AVD per vendor
    and class), detection.csv (AUC per class) and roc_points.csv.

    :raise MissingArtifactError: if the index, the predictions manifest or a predicted file is missing.
    :raise ConfigError: if a predicted volume is not in the index.
    :raise PreconditionError: if no predicted volume carries a ground truth mask.
    """
    index = load_index(index_path)
    manifest = _read_json(os.path.join(predictions_dir, PREDICTIONS_MANIFEST), "predictions manifest")
    results = [r for r in map_ordered(lambda rec: _evaluate_record(index, predictions_dir, rec, reducer),
                                      manifest['predictions'], workers) if r is not None]
    if len(results) == 0:
        raise PreconditionError("None of the predicted volumes has a ground truth mask.")
    entries = [metrics for metrics, _ in results]
    detections = [d for _, records in results for d in records]
    for metrics in entries:
        Logger.log_object(metrics, "evaluate")
    for detection in detections:
        Logger.log_object(detection, "evaluate")

    os.makedirs(out, exist_ok=True)
    report = build_report(entries)
    report.save(os.path.join(out, REPORT_CSV), os.path.join(out, REPORT_JSON))
    detection_table(detections).to_csv(os.path.join(out, DETECTION_CSV), index=False, float_format="%.17g")
    roc_points_frame(detections).to_csv(os.path.join(out, ROC_POINTS_CSV), index=False, float_format="%.17g")
    Logger.log_object(report, "evaluate")
    return report


# --------------------------------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, train_index: DatasetIndex, test_index: DatasetIndex,
                   out: str) -> Optional[SegmentationReport]:
    """
    fingerprint -> plan -> train -> predict -> evaluate, every artifact under "out".
    :return: the report, or None when no test volume carries a ground truth mask.
    """
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError('The output directory "{0:s}" is not writable.'.format(out))
    train_path = os.path.join(out, TRAIN_INDEX_FILE)
    test_path = os.path.join(out, TEST_INDEX_FILE)
    DatasetIndex([_absolute(train_index, e, Split.TRAIN) for e in train_index.entries]).save(train_path)
    DatasetIndex([_absolute(test_index, e, e.split) for e in test_index.entries]).save(test_path)

    fingerprint_path = os.path.join(out, FINGERPRINT_FILE)
    plan_path = os.path.join(out, PLAN_FILE)
    checkpoint_dir = os.path.join(out, CHECKPOINT_DIR)
    predictions_dir = os.path.join(out, PREDICTIONS_DIR)
    cmd_fingerprint(train_path, fingerprint_path)
    cmd_plan(fingerprint_path, plan_path, cfg)
    cmd_train(train_path, plan_path, fingerprint_path, checkpoint_dir, cfg)
    workers = 0 if cfg.deterministic else cfg.workers
    cmd_predict(checkpoint_dir, test_path, predictions_dir, workers=workers, verbose=cfg.verbose)
    if not any(e.mask is not None for e in test_index.entries):
        Logger.log("no annotated test volume: evaluation skipped", "experiment")
        return None
    return cmd_evaluate(test_path, predictions_dir, out, cfg.detection_reducer, workers)


def _absolute(index: DatasetIndex, entry: IndexEntry, split: Split) -> IndexEntry:
    mask = None if entry.mask is None else os.path.abspath(index.resolve(entry.mask))
    return IndexEntry(os.path.abspath(index.resolve(entry.volume)), entry.vendor, split, mask)


def cmd_full(cfg: ExperimentConfig) -> Optional[SegmentationReport]:
    """
    Train on the training entries of the training vendors (all vendors when none is given) and test
    on the test entries of the test vendors (all vendors when none is given).
    """
    index = load_index(str(cfg.index))
    train_vendors = cfg.vendors_train or index.vendors()
    overlap = sorted(set(cfg.vendors_train) & set(cfg.vendors_test))
    if overlap:
        raise ConfigError("Vendor(s) {0} both train and test.".format(", ".join(overlap)))
    apply_determinism(cfg)
    Logger.log_object(cfg, "experiment")
    resolved = ExperimentConfig.from_dict(cfg.to_dict())
    resolved.vendors_train = train_vendors
    train_index = index.select(Split.TRAIN, train_vendors)
    test_index = index.select(Split.TEST, cfg.vendors_test or None)
    if len(test_index) == 0:
        raise PreconditionError("The index holds no test entry for the vendors {0}.".format(cfg.vendors_test))
    return run_experiment(resolved, train_index, test_index, cfg.output)
