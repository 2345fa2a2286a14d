from typing import List, Optional, Sequence, Tuple
import math
import numpy as np
import torch
from errors import NonFiniteLossError, PreconditionError
from logger import Logger
from planner.plan_config import PlanConfig
from io_data.fingerprint import Fingerprint
from network.specs import NetworkSpec
from network.parameters import Parameters, forward
from training.configs import TrainConfig, AugmentationConfig
from training.loss import dice_ce_loss
from training.sampler import TrainingCase, BatchFeeder
from training.checkpoint import Checkpoint, HistoryRow


def make_optimizer(weights: Parameters, cfg: TrainConfig, lr: Optional[float] = None) -> torch.optim.Adam:
    return torch.optim.Adam(list(weights.tensors.values()),
                            lr=cfg.learning_rate if lr is None else lr,
                            betas=cfg.betas,
                            eps=cfg.epsilon)


def batch_loss(spec: NetworkSpec, weights: Parameters, images: np.ndarray, labels: np.ndarray,
               cfg: TrainConfig) -> torch.Tensor:
    probs = forward(spec, weights, torch.from_numpy(images))
    loss, _ = dice_ce_loss(probs, torch.from_numpy(labels), cfg.dice_smooth)
    return loss


def optimizer_step(spec: NetworkSpec,
                   params: Parameters,
                   images: np.ndarray,
                   labels: np.ndarray,
                   cfg: TrainConfig,
                   lr: float) -> Tuple[Parameters, float]:
    """
    One Adam step from fresh moments.
    :return: the updated weights (a new store) and the loss before the step.
    """
    weights = params.clone(requires_grad=True)
    optimizer = make_optimizer(weights, cfg, lr)
    loss = batch_loss(spec, weights, images, labels, cfg)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return weights.clone(), float(loss.detach())


def train(spec: NetworkSpec,
          params: Parameters,
          dataset: Sequence[TrainingCase],
          plan: PlanConfig,
          train_cfg: TrainConfig,
          aug_cfg: AugmentationConfig,
          fingerprint: Optional[Fingerprint] = None,
          verbose: bool = False) -> Checkpoint:
    """
    Train a network.

    Each epoch runs "batches_per_epoch" Adam steps at the learning rate
    lr0 × (1 - epoch / max_epochs) ^ 0.9. The history records, per epoch, the learning rate and the
    mean batch loss. With 0 workers, the run is a pure function of (spec, params, dataset, plan, configs).

    :param spec: the network spec.
    :param params: the initial weights (not modified).
    :param dataset: the prepared training cases.
    :param plan: the plan (patch size, batch size).
    :param train_cfg: the training configuration.
    :param aug_cfg: the augmentation configuration.
    :param fingerprint: the fingerprint stored in the checkpoint for inference.
    :param verbose: print one progress line per epoch.
    :return: the checkpoint after the last epoch.
    :raise PreconditionError: if the dataset is empty.
    :raise NonFiniteLossError: if a batch loss is not finite.
    """
    if len(dataset) == 0:
        raise PreconditionError("The training set is empty.")
    Logger.log_object(train_cfg, "train")
    Logger.log_object(aug_cfg, "train")
    weights = params.clone(requires_grad=True)
    optimizer = make_optimizer(weights, train_cfg)
    history: List[HistoryRow] = []

    with BatchFeeder(dataset, plan, train_cfg, aug_cfg) as feeder:
        for epoch in range(train_cfg.max_epochs):
            lr = train_cfg.learning_rate_at(epoch)
            for group in optimizer.param_groups:
                group['lr'] = lr
            total = 0.0
            for batch in range(train_cfg.batches_per_epoch):
                images, labels = feeder.next_batch()
                loss = batch_loss(spec, weights, images, labels, train_cfg)
                value = float(loss.detach())
                if not math.isfinite(value):
                    Logger.log_dict({'log-type': 'message', 'message': 'non-finite loss', 'epoch': epoch,
                                     'batch': batch, 'lr': lr, 'loss': repr(value)}, "train")
                    raise NonFiniteLossError(epoch, batch, lr, value)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += value
            mean = total / train_cfg.batches_per_epoch
            history.append((epoch, lr, mean))
            Logger.log_epoch(epoch, lr, mean, "train")
            if verbose:
                print("{0:04d}> lr={1:.6f} loss={2:.6f}".format(epoch, lr, mean), flush=True)

    return Checkpoint(spec, weights, plan, train_cfg.max_epochs, train_cfg.max_epochs, history,
                      optimizer.state_dict(), fingerprint, None, train_cfg.seed)
