"""
Per-vendor and per-class segmentation reports.

report.csv holds one row per (vendor, class) with the columns

    vendor, class, dice, avd_mm3, avd_ml

Vendor rows average the volumes of that vendor. The "all" rows average every volume (not the vendor
means). The "mean" class rows average the fluid classes of their vendor row group.
report.json nests the same values: vendor -> class -> metrics.
"""

from typing import Dict, Any, List, Sequence, Optional
import json
import pandas as pd
from errors import PreconditionError
from loggable import Loggable
from oct_types import FLUID_CLASSES, CLASS_NAMES
from io_data.volume import LabelMask
from evaluation.metrics import dice_score, avd, mm3_to_ml, DetectionRecord, roc_auc, roc_curve_points

ALL_VENDORS = "all"
MEAN_CLASS = "mean"
COLUMNS = ["vendor", "class", "dice", "avd_mm3", "avd_ml"]


class VolumeMetrics(Loggable):
    """
    The metrics of one predicted volume.
    """

    def __init__(self, volume: str, vendor: str, dice: Dict[int, float], avd_mm3: Dict[int, float]):
        self.__volume = volume
        self.__vendor = vendor
        self.__dice = {int(k): float(v) for k, v in dice.items()}
        self.__avd_mm3 = {int(k): float(v) for k, v in avd_mm3.items()}

    @property
    def volume(self) -> str:
        return self.__volume

    @property
    def vendor(self) -> str:
        return self.__vendor

    @property
    def dice(self) -> Dict[int, float]:
        return dict(self.__dice)

    @property
    def avd_mm3(self) -> Dict[int, float]:
        return dict(self.__avd_mm3)

    def to_dict(self) -> Dict[str, Any]:
        return {'log-type': 'evaluation', 'volume': self.__volume, 'vendor': self.__vendor,
                'dice': {CLASS_NAMES[c]: v for c, v in self.__dice.items()},
                'avd_mm3': {CLASS_NAMES[c]: v for c, v in self.__avd_mm3.items()}}


def volume_metrics(volume: str, vendor: str, pred: LabelMask, gt: LabelMask,
                   classes: Sequence[int] = FLUID_CLASSES) -> VolumeMetrics:
    """
    Score a prediction against its ground truth (AVD uses the ground truth spacing).
    """
    return VolumeMetrics(volume, vendor,
                         {c: dice_score(pred, gt, c) for c in classes},
                         {c: avd(pred, gt, c, gt.spacing) for c in classes})


class SegmentationReport(Loggable):

    def __init__(self, frame: pd.DataFrame, entries: Sequence[VolumeMetrics]):
        self.__frame = frame
        self.__entries = tuple(entries)

    @property
    def frame(self) -> pd.DataFrame:
        return self.__frame.copy()

    @property
    def entries(self) -> Sequence[VolumeMetrics]:
        return self.__entries

    def vendors(self) -> List[str]:
        return [v for v in self.__frame["vendor"].unique() if v != ALL_VENDORS]

    def value(self, vendor: str, class_name: str, metric: str) -> float:
        rows = self.__frame[(self.__frame["vendor"] == vendor) & (self.__frame["class"] == class_name)]
        if len(rows) != 1:
            raise PreconditionError('No report row for ({0}, {1}).'.format(vendor, class_name))
        return float(rows.iloc[0][metric])

    def overall_dice(self) -> float:
        return self.value(ALL_VENDORS, MEAN_CLASS, "dice")

    def to_dict(self) -> Dict[str, Any]:
        nested: Dict[str, Dict[str, Dict[str, float]]] = {}
        for _, row in self.__frame.iterrows():
            nested.setdefault(row["vendor"], {})[row["class"]] = {
                'dice': float(row["dice"]), 'avd_mm3': float(row["avd_mm3"]), 'avd_ml': float(row["avd_ml"])}
        return {'log-type': 'report', 'vendors': nested, 'volumes': len(self.__entries)}

    def to_csv(self, path: str) -> None:
        self.__frame.to_csv(path, index=False, columns=COLUMNS, float_format="%.17g")

    def save(self, csv_path: str, json_path: str) -> None:
        self.to_csv(csv_path)
        with open(json_path, "w") as fd:
            fd.write(self.to_json() + "\n")


def _group_rows(vendor: str, frame: pd.DataFrame) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    means = frame.groupby("class", sort=False)[["dice", "avd_mm3"]].mean()
    for name in [CLASS_NAMES[c] for c in FLUID_CLASSES if CLASS_NAMES[c] in means.index]:
        dice, avd_mm3 = float(means.loc[name, "dice"]), float(means.loc[name, "avd_mm3"])
        rows.append({'vendor': vendor, 'class': name, 'dice': dice, 'avd_mm3': avd_mm3, 'avd_ml': mm3_to_ml(avd_mm3)})
    dice = sum(r['dice'] for r in rows) / len(rows)
    avd_mm3 = sum(r['avd_mm3'] for r in rows) / len(rows)
    rows.append({'vendor': vendor, 'class': MEAN_CLASS, 'dice': dice, 'avd_mm3': avd_mm3,
                 'avd_ml': mm3_to_ml(avd_mm3)})
    return rows


def build_report(entries: Sequence[VolumeMetrics]) -> SegmentationReport:
    """
    Group per-volume metrics by vendor and class.

    :param entries: the per-volume metrics.
    :return: the report.
    :raise PreconditionError: if there is no entry.
    """
    if len(entries) == 0:
        raise PreconditionError("Cannot build a report without entries.")
    long = pd.DataFrame([{'vendor': e.vendor, 'volume': e.volume, 'class': CLASS_NAMES[c],
                          'dice': e.dice[c], 'avd_mm3': e.avd_mm3[c]}
                         for e in entries for c in sorted(e.dice)])
    rows: List[Dict[str, Any]] = []
    for vendor in sorted(long["vendor"].unique()):
        rows.extend(_group_rows(vendor, long[long["vendor"] == vendor]))
    rows.extend(_group_rows(ALL_VENDORS, long))
    return SegmentationReport(pd.DataFrame(rows, columns=COLUMNS), entries)


def detection_table(records: Sequence[DetectionRecord]) -> pd.DataFrame:
    """
    :return: one row per class: class, auc (NaN when the truths hold a single class), positives, negatives.
    """
    rows = []
    for c in sorted({r.label for r in records}):
        subset = [r for r in records if r.label == c]
        positives = sum(r.truth for r in subset)
        try:
            value = roc_auc(subset)
        except ValueError:
            value = float("nan")
        rows.append({'class': CLASS_NAMES.get(c, str(c)), 'auc': value, 'positives': positives,
                     'negatives': len(subset) - positives})
    return pd.DataFrame(rows, columns=["class", "auc", "positives", "negatives"])


def roc_points_frame(records: Sequence[DetectionRecord]) -> pd.DataFrame:
    """
    :return: the (class, threshold, fpr, tpr) rows of every class with a defined curve (roc_points.csv).
    """
    rows = []
    for c in sorted({r.label for r in records}):
        subset = [r for r in records if r.label == c]
        try:
            points = roc_curve_points(subset)
        except ValueError:
            continue
        rows.extend({'class': CLASS_NAMES.get(c, str(c)), 'threshold': t, 'fpr': f, 'tpr': p} for t, f, p in points)
    return pd.DataFrame(rows, columns=["class", "threshold", "fpr", "tpr"])


def compare_reports(reports: Dict[str, SegmentationReport], metric: str = "dice",
                    vendor: Optional[str] = None) -> pd.DataFrame:
    """
    Side by side table of several models: one row per model, one column per class (and the mean).

    :param reports: the reports keyed by model name.
    :param metric: "dice", "avd_mm3" or "avd_ml".
    :param vendor: the vendor rows to compare (default: all vendors).
    """
    vendor = vendor or ALL_VENDORS
    rows = []
    for model, report in reports.items():
        frame = report.frame
        frame = frame[frame["vendor"] == vendor]
        row: Dict[str, Any] = {'model': model}
        row.update({r["class"]: float(r[metric]) for _, r in frame.iterrows()})
        rows.append(row)
    return pd.DataFrame(rows).set_index("model")


def save_json(data: Dict[str, Any], path: str) -> None:
    with open(path, "w") as fd:
        json.dump(data, fd, indent=2, sort_keys=True)
        fd.write("\n")
