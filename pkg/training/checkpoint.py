"""
A checkpoint is an immutable snapshot of a training run. On disk it is a directory:

    checkpoint.json      model, epoch, max_epochs, seed
    plan.json            the PlanConfig
    spec.json            the NetworkSpec
    weights.json/.bin    the weights manifest and blob
    optimizer.pt         the optimizer state (torch.save)
    fingerprint.json     the dataset fingerprint (used to normalize at inference)
    train_log.csv        epoch, lr, loss
    postprocessing.json  per class: true if all but the largest component are suppressed
"""

from typing import Dict, Any, List, Optional, Tuple
import json
import os
import pandas as pd
import torch
from errors import MissingArtifactError, PreconditionError
from loggable import Loggable
from planner.plan_config import PlanConfig
from io_data.fingerprint import Fingerprint
from network.specs import NetworkSpec
from network.parameters import Parameters
from network.checkpoint_io import save_spec, load_spec, save_parameters, load_parameters

CHECKPOINT_FILE = "checkpoint.json"
PLAN_FILE = "plan.json"
OPTIMIZER_FILE = "optimizer.pt"
FINGERPRINT_FILE = "fingerprint.json"
TRAIN_LOG_FILE = "train_log.csv"
POSTPROCESSING_FILE = "postprocessing.json"

HistoryRow = Tuple[int, float, float]


class Checkpoint(Loggable):

    def __init__(self,
                 spec: NetworkSpec,
                 parameters: Parameters,
                 plan: PlanConfig,
                 epoch: int = 0,
                 max_epochs: int = 0,
                 history: Optional[List[HistoryRow]] = None,
                 optimizer_state: Optional[Dict[str, Any]] = None,
                 fingerprint: Optional[Fingerprint] = None,
                 postprocessing: Optional[Dict[int, bool]] = None,
                 seed: int = 0):
        history = list(history) if history is not None else []
        if epoch > max_epochs:
            raise PreconditionError("Epoch {0:d} exceeds max_epochs {1:d}.".format(epoch, max_epochs))
        if len(history) != epoch:
            raise PreconditionError("The history holds {0:d} rows for epoch {1:d}.".format(len(history), epoch))
        self.__spec = spec
        self.__parameters = parameters.clone()
        self.__plan = plan
        self.__epoch = int(epoch)
        self.__max_epochs = int(max_epochs)
        self.__history: Tuple[HistoryRow, ...] = tuple((int(e), float(lr), float(loss)) for e, lr, loss in history)
        self.__optimizer_state = optimizer_state
        self.__fingerprint = fingerprint
        self.__postprocessing: Dict[int, bool] = {int(k): bool(v) for k, v in (postprocessing or {}).items()}
        self.__seed = int(seed)

    @property
    def spec(self) -> NetworkSpec:
        return self.__spec

    @property
    def parameters(self) -> Parameters:
        return self.__parameters

    @property
    def plan(self) -> PlanConfig:
        return self.__plan

    @property
    def epoch(self) -> int:
        return self.__epoch

    @property
    def max_epochs(self) -> int:
        return self.__max_epochs

    @property
    def history(self) -> Tuple[HistoryRow, ...]:
        return self.__history

    @property
    def optimizer_state(self) -> Optional[Dict[str, Any]]:
        return self.__optimizer_state

    @property
    def fingerprint(self) -> Optional[Fingerprint]:
        return self.__fingerprint

    @property
    def postprocessing(self) -> Dict[int, bool]:
        return dict(self.__postprocessing)

    @property
    def seed(self) -> int:
        return self.__seed

    @property
    def model(self) -> str:
        return self.__spec.model

    def losses(self) -> List[float]:
        return [loss for _, _, loss in self.__history]

    def with_postprocessing(self, policy: Dict[int, bool]) -> "Checkpoint":
        return Checkpoint(self.__spec, self.__parameters, self.__plan, self.__epoch, self.__max_epochs,
                          list(self.__history), self.__optimizer_state, self.__fingerprint, policy, self.__seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'checkpoint',
            'model': self.model,
            'epoch': self.__epoch,
            'max_epochs': self.__max_epochs,
            'seed': self.__seed,
            'param_count': self.__spec.param_count()
        }

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, CHECKPOINT_FILE), "w") as fd:
            fd.write(self.to_json() + "\n")
        with open(os.path.join(directory, PLAN_FILE), "w") as fd:
            fd.write(self.__plan.to_json() + "\n")
        save_spec(self.__spec, directory)
        save_parameters(self.__parameters, directory)
        if self.__optimizer_state is not None:
            torch.save(self.__optimizer_state, os.path.join(directory, OPTIMIZER_FILE))
        if self.__fingerprint is not None:
            with open(os.path.join(directory, FINGERPRINT_FILE), "w") as fd:
                fd.write(self.__fingerprint.to_json() + "\n")
        pd.DataFrame(list(self.__history), columns=["epoch", "lr", "loss"]) \
            .to_csv(os.path.join(directory, TRAIN_LOG_FILE), index=False, float_format="%.17g")
        with open(os.path.join(directory, POSTPROCESSING_FILE), "w") as fd:
            json.dump({str(k): v for k, v in sorted(self.__postprocessing.items())}, fd, indent=2, sort_keys=True)
            fd.write("\n")

    @staticmethod
    def load(directory: str) -> "Checkpoint":
        """
        :raise MissingArtifactError: if the directory or a mandatory file is missing.
        """
        for name in (CHECKPOINT_FILE, PLAN_FILE):
            path = os.path.join(directory, name)
            if not os.path.isfile(path):
                raise MissingArtifactError(path, "checkpoint file")
        with open(os.path.join(directory, CHECKPOINT_FILE), "r") as fd:
            header = json.load(fd)
        with open(os.path.join(directory, PLAN_FILE), "r") as fd:
            plan = PlanConfig.from_dict(json.load(fd))
        spec = load_spec(directory)
        parameters = load_parameters(directory)
        optimizer_state = None
        optimizer_path = os.path.join(directory, OPTIMIZER_FILE)
        if os.path.isfile(optimizer_path):
            optimizer_state = torch.load(optimizer_path, weights_only=False)
        fingerprint = None
        fingerprint_path = os.path.join(directory, FINGERPRINT_FILE)
        if os.path.isfile(fingerprint_path):
            with open(fingerprint_path, "r") as fd:
                fingerprint = Fingerprint.from_dict(json.load(fd))
        history: List[HistoryRow] = []
        log_path = os.path.join(directory, TRAIN_LOG_FILE)
        if os.path.isfile(log_path) and header['epoch'] > 0:
            frame = pd.read_csv(log_path)
            history = [(int(r.epoch), float(r.lr), float(r.loss)) for r in frame.itertuples(index=False)]
        policy: Dict[int, bool] = {}
        policy_path = os.path.join(directory, POSTPROCESSING_FILE)
        if os.path.isfile(policy_path):
            with open(policy_path, "r") as fd:
                policy = {int(k): bool(v) for k, v in json.load(fd).items()}
        return Checkpoint(spec, parameters, plan, header['epoch'], header['max_epochs'], history, optimizer_state,
                          fingerprint, policy, header.get('seed', 0))
