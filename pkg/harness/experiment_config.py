from typing import Dict, Any, List, Optional, Sequence
import json
import os
from errors import ConfigError, MissingArtifactError
from loggable import Loggable
from oct_types import VENDOR_NAMES, ModelName
from planner.plan_config import MemoryBudget
from training.configs import TrainConfig, AugmentationConfig
from evaluation.metrics import REDUCERS

# Batches of the harness cover at most this fraction of the training voxels.
DEFAULT_DATASET_FRACTION = 0.05
# Share of the training pairs held out to decide the post-processing policy.
DEFAULT_VALIDATION_FRACTION = 0.2


class ExperimentConfig(Loggable):
    """
    One experiment: where the data is, which vendors train and which test, the model, and the
    overrides of the plan and of the training/augmentation recipes.

    The JSON document read by "--config" holds the same keys as "to_dict()"; the sub-documents
    "train", "augmentation" and "budget" hold the keys of their configuration classes.
    """

    def __init__(self):
        self.__index: Optional[str] = None
        self.__vendors_train: List[str] = []
        self.__vendors_test: List[str] = []
        self.__model: str = ModelName.RASPP.value
        self.__plan_overrides: Dict[str, Any] = {}
        self.__train: TrainConfig = TrainConfig()
        self.__augmentation: AugmentationConfig = AugmentationConfig()
        self.__budget: MemoryBudget = MemoryBudget()
        self.__output: str = "out"
        self.__seed: int = 0
        self.__workers: int = 0
        self.__deterministic: bool = True
        self.__dimensionality: int = 3
        self.__max_dataset_fraction: Optional[float] = DEFAULT_DATASET_FRACTION
        self.__detection_reducer: str = "percentile"
        self.__postprocessing: bool = True
        self.__validation_fraction: float = DEFAULT_VALIDATION_FRACTION
        self.__verbose: bool = False

    @property
    def index(self) -> Optional[str]:
        return self.__index

    @index.setter
    def index(self, value: Optional[str]) -> None:
        self.__index = value

    @property
    def vendors_train(self) -> List[str]:
        return list(self.__vendors_train)

    @vendors_train.setter
    def vendors_train(self, value: Sequence[str]) -> None:
        self.__vendors_train = self.__vendors(value, "vendors_train")

    @property
    def vendors_test(self) -> List[str]:
        return list(self.__vendors_test)

    @vendors_test.setter
    def vendors_test(self, value: Sequence[str]) -> None:
        self.__vendors_test = self.__vendors(value, "vendors_test")

    @staticmethod
    def __vendors(value: Sequence[str], name: str) -> List[str]:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        unknown = [v for v in value if v not in VENDOR_NAMES]
        if unknown:
            raise ConfigError("{0:s}: unknown vendor(s) {1} (expected {2}).".format(name, ", ".join(unknown),
                                                                                  ", ".join(VENDOR_NAMES)))
        return list(dict.fromkeys(value))

    @property
    def model(self) -> str:
        return self.__model

    @model.setter
    def model(self, value: str) -> None:
        if value not in [m.value for m in ModelName]:
            raise ConfigError('Unknown model "{0}" (expected unet or raspp).'.format(value))
        self.__model = value

    @property
    def plan_overrides(self) -> Dict[str, Any]:
        return dict(self.__plan_overrides)

    @plan_overrides.setter
    def plan_overrides(self, value: Dict[str, Any]) -> None:
        self.__plan_overrides = dict(value)

    @property
    def train(self) -> TrainConfig:
        return self.__train

    @train.setter
    def train(self, value: TrainConfig) -> None:
        self.__train = value

    @property
    def augmentation(self) -> AugmentationConfig:
        return self.__augmentation

    @augmentation.setter
    def augmentation(self, value: AugmentationConfig) -> None:
        self.__augmentation = value

    @property
    def budget(self) -> MemoryBudget:
        return self.__budget

    @budget.setter
    def budget(self, value: MemoryBudget) -> None:
        self.__budget = value

    @property
    def output(self) -> str:
        return self.__output

    @output.setter
    def output(self, value: str) -> None:
        self.__output = value

    @property
    def seed(self) -> int:
        return self.__seed

    @seed.setter
    def seed(self, value: int) -> None:
        self.__seed = int(value)

    @property
    def workers(self) -> int:
        return self.__workers

    @workers.setter
    def workers(self, value: int) -> None:
        if int(value) < 0:
            raise ConfigError("workers must be >= 0, got {0}.".format(value))
        self.__workers = int(value)

    @property
    def deterministic(self) -> bool:
        return self.__deterministic

    @deterministic.setter
    def deterministic(self, value: bool) -> None:
        self.__deterministic = bool(value)

    @property
    def dimensionality(self) -> int:
        return self.__dimensionality

    @dimensionality.setter
    def dimensionality(self, value: int) -> None:
        if int(value) not in (2, 3):
            raise ConfigError("dimensionality must be 2 or 3, got {0}.".format(value))
        self.__dimensionality = int(value)

    @property
    def max_dataset_fraction(self) -> Optional[float]:
        return self.__max_dataset_fraction

    @max_dataset_fraction.setter
    def max_dataset_fraction(self, value: Optional[float]) -> None:
        if value is not None and not 0 < float(value) <= 1:
            raise ConfigError("max_dataset_fraction must be in (0, 1], got {0}.".format(value))
        self.__max_dataset_fraction = None if value is None else float(value)

    @property
    def detection_reducer(self) -> str:
        return self.__detection_reducer

    @detection_reducer.setter
    def detection_reducer(self, value: str) -> None:
        if value not in REDUCERS:
            raise ConfigError('Unknown detection reducer "{0}" (expected one of {1}).'.format(value,
                                                                                            ", ".join(REDUCERS)))
        self.__detection_reducer = value

    @property
    def postprocessing(self) -> bool:
        return self.__postprocessing

    @postprocessing.setter
    def postprocessing(self, value: bool) -> None:
        self.__postprocessing = bool(value)

    @property
    def validation_fraction(self) -> float:
        return self.__validation_fraction

    @validation_fraction.setter
    def validation_fraction(self, value: float) -> None:
        if not 0 <= float(value) < 1:
            raise ConfigError("validation_fraction must be in [0, 1), got {0}.".format(value))
        self.__validation_fraction = float(value)

    @property
    def verbose(self) -> bool:
        return self.__verbose

    @verbose.setter
    def verbose(self, value: bool) -> None:
        self.__verbose = bool(value)

    def resolved_train(self) -> TrainConfig:
        """
        :return: the training configuration with the experiment seed and worker count applied (the
        deterministic mode forces 0 workers).
        """
        train = TrainConfig.from_dict(self.__train.to_dict())
        train.seed = self.__seed
        train.workers = 0 if self.__deterministic else self.__workers
        return train

    def resolved_augmentation(self) -> AugmentationConfig:
        augmentation = AugmentationConfig.from_dict(self.__augmentation.to_dict())
        augmentation.seed = self.__seed
        return augmentation

    def check(self) -> None:
        """
        :raise ConfigError: if the training vendors are empty or overlap the test vendors.
        :raise MissingArtifactError: if the index does not exist.
        """
        if len(self.__vendors_train) == 0:
            raise ConfigError("vendors_train must not be empty.")
        overlap = sorted(set(self.__vendors_train) & set(self.__vendors_test))
        if overlap:
            raise ConfigError("Vendor(s) {0} both train and test.".format(", ".join(overlap)))
        if self.__index is None or not os.path.isfile(self.__index):
            raise MissingArtifactError(str(self.__index), "dataset index")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'config',
            'index': self.__index,
            'vendors_train': list(self.__vendors_train),
            'vendors_test': list(self.__vendors_test),
            'model': self.__model,
            'plan': dict(self.__plan_overrides),
            'train': self.__train.to_dict(),
            'augmentation': self.__augmentation.to_dict(),
            'budget': self.__budget.to_dict(),
            'output': self.__output,
            'seed': self.__seed,
            'workers': self.__workers,
            'deterministic': self.__deterministic,
            'dimensionality': self.__dimensionality,
            'max_dataset_fraction': self.__max_dataset_fraction,
            'detection_reducer': self.__detection_reducer,
            'postprocessing': self.__postprocessing,
            'validation_fraction': self.__validation_fraction,
            'verbose': self.__verbose
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "ExperimentConfig":
        config = ExperimentConfig()
        for key, value in d.items():
            if key == 'log-type':
                continue
            elif key == 'plan':
                config.plan_overrides = value
            elif key == 'train':
                config.train = TrainConfig.from_dict(value)
            elif key == 'augmentation':
                config.augmentation = AugmentationConfig.from_dict(value)
            elif key == 'budget':
                config.budget = MemoryBudget.from_dict(value)
            elif key in config.to_dict():
                setattr(config, key, value)
            else:
                raise ConfigError('Unknown experiment option "{0}".'.format(key))
        return config

    @staticmethod
    def load(path: str) -> "ExperimentConfig":
        """
        :raise MissingArtifactError: if the file does not exist.
        :raise ConfigError: if the file is not a JSON object.
        """
        if not os.path.isfile(path):
            raise MissingArtifactError(path, "configuration")
        with open(path, "r") as fd:
            try:
                data = json.load(fd)
            except json.JSONDecodeError as e:
                raise ConfigError('Configuration "{0:s}" is not valid JSON: {1}'.format(path, e))
        if not isinstance(data, dict):
            raise ConfigError('Configuration "{0:s}" must hold a JSON object.'.format(path))
        config = ExperimentConfig.from_dict(data)
        if config.index is not None and not os.path.isabs(config.index):
            config.index = os.path.join(os.path.dirname(os.path.abspath(path)), config.index)
        return config
