from typing import Dict, Iterator, List, Optional, Tuple, Union
from collections import OrderedDict
import math
import threading
import numpy as np
import torch
from torch import nn
from torch.func import functional_call
from errors import ShapeError, PreconditionError
from network.specs import NetworkSpec
from network.modules import SegmentationNetwork


class Parameters:
    """
    The weights of a network: named tensors keyed by layer path (for example
    "encoder.0.first.conv.weight"), in module registration order.
    """

    def __init__(self, tensors: Dict[str, torch.Tensor], seed: Optional[int] = None):
        self.__tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict(tensors)
        self.__seed = seed

    @property
    def seed(self) -> Optional[int]:
        return self.__seed

    @property
    def tensors(self) -> "OrderedDict[str, torch.Tensor]":
        return OrderedDict(self.__tensors)

    @property
    def dtype(self) -> torch.dtype:
        for t in self.__tensors.values():
            return t.dtype
        return torch.float32

    def names(self) -> List[str]:
        return list(self.__tensors.keys())

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {k: tuple(v.shape) for k, v in self.__tensors.items()}

    def numel(self) -> int:
        return sum(int(t.numel()) for t in self.__tensors.values())

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.__tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.__tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.__tensors)

    def __len__(self) -> int:
        return len(self.__tensors)

    def items(self):
        return self.__tensors.items()

    def to(self, dtype: torch.dtype) -> "Parameters":
        return Parameters(OrderedDict((k, v.detach().to(dtype)) for k, v in self.__tensors.items()), self.__seed)

    def clone(self, requires_grad: bool = False) -> "Parameters":
        """
        :return: a deep copy detached from any graph; with "requires_grad" the copies are leaf tensors
        suitable for an optimizer.
        """
        return Parameters(OrderedDict((k, v.detach().clone().requires_grad_(requires_grad))
                                      for k, v in self.__tensors.items()), self.__seed)

    def replace(self, updates: Dict[str, torch.Tensor]) -> "Parameters":
        tensors = OrderedDict(self.__tensors)
        for k, v in updates.items():
            if k not in tensors:
                raise PreconditionError('Unknown parameter "{0:s}".'.format(k))
            if tuple(v.shape) != tuple(tensors[k].shape):
                raise ShapeError('Parameter "{0:s}" has shape {1}, {2} expected.'.format(k, tuple(v.shape),
                                                                                         tuple(tensors[k].shape)))
            tensors[k] = v
        return Parameters(tensors, self.__seed)

    def equal(self, other: "Parameters") -> bool:
        """
        :return: True if both stores hold the same names and bit-identical values.
        """
        if self.names() != other.names():
            return False
        return all(torch.equal(self.__tensors[k].detach(), other[k].detach()) for k in self.__tensors)


def _fan_in(module: nn.Module) -> int:
    weight = module.weight
    if isinstance(module, nn.ConvTranspose3d):
        # kernel == stride: every output voxel receives exactly one tap per input channel.
        return int(weight.shape[0])
    return int(weight.shape[1] * np.prod(weight.shape[2:]))


def init_parameters(spec: NetworkSpec, seed: int, dtype: torch.dtype = torch.float32) -> Parameters:
    """
    Instantiate the weights of a network.

    Conv weights are drawn from N(0, 2 / fan_in), conv biases are 0, norm scales are 1 and norm
    shifts are 0. The draws are made in module registration order from a generator seeded with
    "seed", so the result is a pure function of (spec, seed).

    :param spec: the network spec.
    :param seed: the seed.
    :param dtype: the dtype of the tensors.
    :return: the parameters.
    """
    generator = torch.Generator().manual_seed(int(seed))
    module = SegmentationNetwork(spec)
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for prefix, sub in module.named_modules():
        name = (prefix + ".") if prefix else ""
        if isinstance(sub, (nn.Conv3d, nn.ConvTranspose3d)):
            std = math.sqrt(2.0 / _fan_in(sub))
            tensors[name + "weight"] = (torch.randn(tuple(sub.weight.shape), generator=generator,
                                                    dtype=torch.float64) * std).to(dtype)
            tensors[name + "bias"] = torch.zeros(tuple(sub.bias.shape), dtype=dtype)
        elif isinstance(sub, nn.InstanceNorm3d):
            tensors[name + "weight"] = torch.ones(tuple(sub.weight.shape), dtype=dtype)
            tensors[name + "bias"] = torch.zeros(tuple(sub.bias.shape), dtype=dtype)
    # Re-key in registration order of the parameters themselves.
    ordered = OrderedDict((k, tensors[k]) for k, _ in module.named_parameters())
    return Parameters(ordered, seed)


def check_parameters(spec: NetworkSpec, params: Parameters) -> None:
    """
    :raise PreconditionError: if the names do not match the layers of the network spec one to one.
    :raise ShapeError: if a shape does not match.
    """
    expected = OrderedDict((k, tuple(v.shape)) for k, v in module_for(spec).named_parameters())
    if list(expected.keys()) != params.names():
        missing = sorted(set(expected) - set(params.names()))
        extra = sorted(set(params.names()) - set(expected))
        raise PreconditionError("Parameters do not match the network (missing: {0}, unexpected: {1})."
                                .format(missing, extra))
    for k, shape in expected.items():
        if tuple(params[k].shape) != shape:
            raise ShapeError('Parameter "{0:s}" has shape {1}, {2} expected.'.format(k, tuple(params[k].shape),
                                                                                     shape))


__shared_cache = threading.local()
# Module trees kept per thread, least recently used first out.
MAX_CACHED_MODULES = 2


def _thread_modules() -> "OrderedDict[str, SegmentationNetwork]":
    modules = getattr(__shared_cache, "modules", None)
    if modules is None:
        modules = OrderedDict()
        __shared_cache.modules = modules
    return modules


def module_for(spec: NetworkSpec) -> SegmentationNetwork:
    """
    :return: the module tree of a spec, built once per thread ("functional_call()" temporarily swaps
    the module tensors, so a module is never shared between threads). Each thread keeps at most
    MAX_CACHED_MODULES trees.
    """
    modules = _thread_modules()
    key = spec.key()
    if key in modules:
        modules.move_to_end(key)
    else:
        modules[key] = SegmentationNetwork(spec)
        while len(modules) > MAX_CACHED_MODULES:
            modules.popitem(last=False)
    return modules[key]


def cached_modules() -> int:
    """
    :return: the number of module trees cached by the calling thread.
    """
    return len(_thread_modules())


def check_input(spec: NetworkSpec, shape: Tuple[int, ...]) -> None:
    if len(shape) != 5:
        raise ShapeError("The input must be (batch, channels, x, y, z), got {0}.".format(shape))
    if shape[1] != spec.in_channels:
        raise ShapeError("The input holds {0:d} channels, {1:d} expected.".format(shape[1], spec.in_channels))
    for axis, (n, d) in enumerate(zip(shape[2:], spec.divisor())):
        if n % d:
            raise ShapeError("Spatial axis {0:d} ({1:d} voxels) is not divisible by {2:d}.".format(axis, n, d),
                             axis=axis)


def forward(spec: NetworkSpec, params: Parameters, patch: Union[torch.Tensor, np.ndarray]) -> torch.Tensor:
    """
    Run the network.

    :param spec: the network spec.
    :param params: the weights; their dtype decides the computation dtype.
    :param patch: the input, (batch, channels, x, y, z).
    :return: the per-voxel class probabilities (batch, classes, x, y, z). The graph is kept when the
    weights require gradients.
    :raise ShapeError: if a spatial axis is not divisible by the pooling schedule (the error names the axis).
    """
    x = torch.as_tensor(patch)
    check_input(spec, tuple(x.shape))
    x = x.to(params.dtype)
    module = module_for(spec)
    return functional_call(module, params.tensors, (x,), strict=True)
