"""
Finite-difference verification of the loss gradients.

The analytic gradient (autograd) of the Dice + cross-entropy loss is compared, on randomly sampled
weights, to the central difference (L(w + h) - L(w - h)) / 2h computed in double precision. A weight
whose ±h perturbation changes the sign of any LeakyReLU input is not differentiable at the scale of h
and is replaced by another draw.
"""

from typing import List, Optional, Tuple
import numpy as np
import torch
from torch import nn
from errors import PreconditionError
from network.specs import NetworkSpec
from network.parameters import Parameters, forward, module_for
from training.loss import dice_ce_loss

STEP = 1e-5
MIN_SAMPLES = 100
# Denominator floor: gradients below the step are compared in absolute terms.
ERROR_FLOOR = STEP
# Draws allowed per requested sample before the check gives up.
MAX_DRAWS_PER_SAMPLE = 50


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def _same_signs(baseline: List[torch.Tensor], patterns: List[torch.Tensor]) -> bool:
    return len(baseline) == len(patterns) and all(torch.equal(a, b) for a, b in zip(baseline, patterns))


class _SignRecorder:
    """
    Record the sign pattern of every LeakyReLU input during a forward pass.
    """

    def __init__(self, spec: NetworkSpec):
        self.__patterns: List[torch.Tensor] = []
        self.__handles = [m.register_forward_hook(self.__hook) for m in module_for(spec).modules()
                          if isinstance(m, nn.LeakyReLU)]

    def __hook(self, module: nn.Module, inputs: Tuple[torch.Tensor, ...], output: torch.Tensor) -> None:
        self.__patterns.append((inputs[0].detach() > 0).clone())

    def take(self) -> List[torch.Tensor]:
        patterns, self.__patterns = self.__patterns, []
        return patterns

    def close(self) -> None:
        for handle in self.__handles:
            handle.remove()


def _loss(spec: NetworkSpec, params: Parameters, images: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    loss, _ = dice_ce_loss(forward(spec, params, images), labels)
    return loss


def gradient_check(spec: NetworkSpec,
                   params: Parameters,
                   images: np.ndarray,
                   labels: np.ndarray,
                   samples: int = MIN_SAMPLES,
                   seed: int = 0,
                   step: float = STEP,
                   max_params: Optional[int] = 10000) -> float:
    """
    :param spec: a tiny network spec.
    :param params: its weights (converted to float64).
    :param images: a tiny batch (batch, channels, x, y, z).
    :param labels: its labels (batch, x, y, z).
    :param samples: the number of sampled weights (at least 100).
    :param seed: the seed of the weight draws.
    :param step: the finite difference step.
    :param max_params: refuse specs larger than this.
    :return: the maximal relative error.
    :raise PreconditionError: if the network spec is too large or has no weight, or if fewer than "samples"
    weights could be checked (every other draw flipped a LeakyReLU sign).
    """
    if max_params is not None and spec.param_count() > max_params:
        raise PreconditionError("The gradient check runs on tiny networks ({0:d} > {1:d} weights)."
                                .format(spec.param_count(), max_params))
    if len(params) == 0:
        raise PreconditionError("The network has no weight.")
    samples = max(int(samples), MIN_SAMPLES)
    weights = params.to(torch.float64).clone(requires_grad=True)
    x = torch.from_numpy(np.asarray(images, dtype=np.float64))
    y = torch.from_numpy(np.asarray(labels, dtype=np.int64))

    recorder = _SignRecorder(spec)
    try:
        loss = _loss(spec, weights, x, y)
        baseline = recorder.take()
        loss.backward()
        gradients = {k: v.grad.detach().clone() for k, v in weights.items()}
        base = weights.clone()

        names = base.names()
        sizes = np.array([base[k].numel() for k in names])
        rng = np.random.default_rng(seed)
        worst = 0.0
        checked = 0
        attempts = 0
        while checked < samples and attempts < MAX_DRAWS_PER_SAMPLE * samples:
            attempts += 1
            k = names[int(rng.choice(len(names), p=sizes / sizes.sum()))]
            flat = int(rng.integers(base[k].numel()))
            values = []
            stable = True
            with torch.no_grad():
                for sign in (1.0, -1.0):
                    tensor = base[k].clone()
                    tensor.view(-1)[flat] += sign * step
                    values.append(float(_loss(spec, base.replace({k: tensor}), x, y)))
                    patterns = recorder.take()
                    stable = stable and _same_signs(baseline, patterns)
            if not stable:
                continue
            numeric = (values[0] - values[1]) / (2.0 * step)
            analytic = float(gradients[k].view(-1)[flat])
            worst = max(worst, relative_error(analytic, numeric))
            checked += 1
    finally:
        recorder.close()
    if checked < samples:
        raise PreconditionError("Only {0:d} of {1:d} sampled weights are differentiable at step {2:g} ({3:d} draws)."
                                .format(checked, samples, step, attempts))
    return worst
