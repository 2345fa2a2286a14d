"""
Declarative description of the segmentation networks.

A NetworkSpec lists, in execution order:

    stem     (optional) one ConvBlockSpec, input channels -> base features
    aspp     (optional) parallel dilated branches fused back to base features
    encoder  one stage per resolution level, the last one being the bottleneck
    decoder  one stage per level above the bottleneck: transposed conv, concatenation
             of the encoder output of the same level, then a conv stage
    head     (optional) 1x1x1 conv to the class channels, followed by a channel softmax

Specs are immutable and hold no weights. They serialize to JSON (spec.json).
"""

from typing import Dict, Any, List, Optional, Sequence, Tuple
from errors import DomainError
from loggable import Loggable
from oct_types import Shape3

NEGATIVE_SLOPE = 0.01


def _triple(values: Sequence[int], what: str) -> Shape3:
    t = tuple(int(v) for v in values)
    if len(t) != 3:
        raise DomainError("{0:s} must hold 3 values, got {1}.".format(what, values))
    return t


def _prod(values: Sequence[int]) -> int:
    n = 1
    for v in values:
        n *= int(v)
    return n


class ConvBlockSpec:
    """
    conv (bias) -> instance norm (affine) -> LeakyReLU(0.01). The padding keeps the spatial shape
    when the stride is 1: padding = dilation × (kernel // 2) per axis.
    """

    def __init__(self, in_channels: int, out_channels: int,
                 kernel: Sequence[int] = (3, 3, 3),
                 stride: Sequence[int] = (1, 1, 1),
                 dilation: int = 1):
        self.__in_channels = int(in_channels)
        self.__out_channels = int(out_channels)
        self.__kernel = _triple(kernel, "kernel")
        self.__stride = _triple(stride, "stride")
        self.__dilation = int(dilation)
        if self.__in_channels < 1 or self.__out_channels < 1:
            raise DomainError("Channel counts must be positive ({0:d}, {1:d}).".format(self.__in_channels,
                                                                                    self.__out_channels))
        if any(k % 2 == 0 or k < 1 for k in self.__kernel):
            raise DomainError("Kernel components must be odd, got {0}.".format(self.__kernel))
        if any(s not in (1, 2) for s in self.__stride):
            raise DomainError("Stride components must be 1 or 2, got {0}.".format(self.__stride))
        if self.__dilation < 1:
            raise DomainError("Dilation must be positive, got {0:d}.".format(self.__dilation))

    @property
    def in_channels(self) -> int:
        return self.__in_channels

    @property
    def out_channels(self) -> int:
        return self.__out_channels

    @property
    def kernel(self) -> Shape3:
        return self.__kernel

    @property
    def stride(self) -> Shape3:
        return self.__stride

    @property
    def dilation(self) -> int:
        return self.__dilation

    @property
    def padding(self) -> Shape3:
        return tuple(self.__dilation * (k // 2) for k in self.__kernel)

    def param_count(self) -> int:
        conv = self.__out_channels * self.__in_channels * _prod(self.__kernel) + self.__out_channels
        return conv + 2 * self.__out_channels

    def to_dict(self) -> Dict[str, Any]:
        return {'in_channels': self.__in_channels, 'out_channels': self.__out_channels,
                'kernel': list(self.__kernel), 'stride': list(self.__stride), 'dilation': self.__dilation}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "ConvBlockSpec":
        return ConvBlockSpec(d['in_channels'], d['out_channels'], d['kernel'], d['stride'], d.get('dilation', 1))


class StageSpec:
    """
    Two chained conv blocks; the first one carries the stride of the stage.
    """

    def __init__(self, first: ConvBlockSpec, second: ConvBlockSpec):
        if first.out_channels != second.in_channels:
            raise DomainError("Stage blocks do not chain ({0:d} -> {1:d}).".format(first.out_channels,
                                                                                 second.in_channels))
        if second.stride != (1, 1, 1):
            raise DomainError("Only the first block of a stage may be strided.")
        self._first = first
        self._second = second

    @property
    def first(self) -> ConvBlockSpec:
        return self._first

    @property
    def second(self) -> ConvBlockSpec:
        return self._second

    @property
    def in_channels(self) -> int:
        return self._first.in_channels

    @property
    def out_channels(self) -> int:
        return self._second.out_channels

    @property
    def stride(self) -> Shape3:
        return self._first.stride

    @property
    def residual(self) -> bool:
        return False

    def param_count(self) -> int:
        return self._first.param_count() + self._second.param_count()

    def to_dict(self) -> Dict[str, Any]:
        return {'residual': self.residual, 'first': self._first.to_dict(), 'second': self._second.to_dict()}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "StageSpec":
        first = ConvBlockSpec.from_dict(d['first'])
        second = ConvBlockSpec.from_dict(d['second'])
        return ResidualBlockSpec(first, second) if d.get('residual', False) else StageSpec(first, second)


class ResidualBlockSpec(StageSpec):
    """
    out = body(x) + skip(x), where body is the two conv blocks and skip is the identity when the
    channel counts and the stride match, otherwise a strided 1x1x1 projection conv (with bias).
    """

    @property
    def residual(self) -> bool:
        return True

    @property
    def projection(self) -> bool:
        return self.in_channels != self.out_channels or self.stride != (1, 1, 1)

    def param_count(self) -> int:
        skip = self.out_channels * self.in_channels + self.out_channels if self.projection else 0
        return super().param_count() + skip


class ASPPSpec:
    """
    Parallel conv blocks with kernel 3 and distinct dilation rates, concatenated and fused by a
    1x1x1 conv block to "out_channels". Every branch keeps the input spatial shape.
    """

    def __init__(self, in_channels: int, branch_channels: int, out_channels: int, rates: Sequence[int],
                 kernel: Sequence[int] = (3, 3, 3)):
        self.__rates: Tuple[int, ...] = tuple(int(r) for r in rates)
        if len(set(self.__rates)) < 2 or len(set(self.__rates)) != len(self.__rates):
            raise DomainError("ASPP needs at least 2 distinct rates, got {0}.".format(rates))
        if min(self.__rates) < 1:
            raise DomainError("ASPP rates must be positive, got {0}.".format(rates))
        self.__branches = tuple(ConvBlockSpec(in_channels, branch_channels, kernel, (1, 1, 1), r)
                                for r in self.__rates)
        self.__fuse = ConvBlockSpec(branch_channels * len(self.__rates), out_channels, (1, 1, 1))

    @property
    def rates(self) -> Tuple[int, ...]:
        return self.__rates

    @property
    def branches(self) -> Tuple[ConvBlockSpec, ...]:
        return self.__branches

    @property
    def fuse(self) -> ConvBlockSpec:
        return self.__fuse

    @property
    def in_channels(self) -> int:
        return self.__branches[0].in_channels

    @property
    def branch_channels(self) -> int:
        return self.__branches[0].out_channels

    @property
    def out_channels(self) -> int:
        return self.__fuse.out_channels

    @property
    def kernel(self) -> Shape3:
        return self.__branches[0].kernel

    def param_count(self) -> int:
        return sum(b.param_count() for b in self.__branches) + self.__fuse.param_count()

    def to_dict(self) -> Dict[str, Any]:
        return {'in_channels': self.in_channels, 'branch_channels': self.branch_channels,
                'out_channels': self.out_channels, 'rates': list(self.__rates), 'kernel': list(self.kernel)}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "ASPPSpec":
        return ASPPSpec(d['in_channels'], d['branch_channels'], d['out_channels'], d['rates'],
                        d.get('kernel', (3, 3, 3)))


class DecoderStageSpec:
    """
    Transposed conv (kernel = stride) from the lower level, concatenation with the encoder output of
    the same level, then a conv stage.
    """

    def __init__(self, up_in: int, up_out: int, stride: Sequence[int], block: StageSpec):
        self.__up_in = int(up_in)
        self.__up_out = int(up_out)
        self.__stride = _triple(stride, "stride")
        self.__block = block

    @property
    def up_in(self) -> int:
        return self.__up_in

    @property
    def up_out(self) -> int:
        return self.__up_out

    @property
    def stride(self) -> Shape3:
        return self.__stride

    @property
    def block(self) -> StageSpec:
        return self.__block

    def param_count(self) -> int:
        return self.__up_in * self.__up_out * _prod(self.__stride) + self.__up_out + self.__block.param_count()

    def to_dict(self) -> Dict[str, Any]:
        return {'up_in': self.__up_in, 'up_out': self.__up_out, 'stride': list(self.__stride),
                'block': self.__block.to_dict()}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "DecoderStageSpec":
        return DecoderStageSpec(d['up_in'], d['up_out'], d['stride'], StageSpec.from_dict(d['block']))


class HeadSpec:

    def __init__(self, in_channels: int, num_classes: int):
        self.__in_channels = int(in_channels)
        self.__num_classes = int(num_classes)
        if self.__in_channels < 1 or self.__num_classes < 2:
            raise DomainError("Invalid head ({0:d} -> {1:d}).".format(self.__in_channels, self.__num_classes))

    @property
    def in_channels(self) -> int:
        return self.__in_channels

    @property
    def num_classes(self) -> int:
        return self.__num_classes

    def param_count(self) -> int:
        return self.__num_classes * self.__in_channels + self.__num_classes

    def to_dict(self) -> Dict[str, Any]:
        return {'in_channels': self.__in_channels, 'num_classes': self.__num_classes}

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "HeadSpec":
        return HeadSpec(d['in_channels'], d['num_classes'])


class NetworkSpec(Loggable):

    def __init__(self,
                 model: str,
                 in_channels: int = 1,
                 encoder: Sequence[StageSpec] = (),
                 decoder: Sequence[DecoderStageSpec] = (),
                 head: Optional[HeadSpec] = None,
                 stem: Optional[ConvBlockSpec] = None,
                 aspp: Optional[ASPPSpec] = None):
        self.__model = model
        self.__in_channels = int(in_channels)
        self.__encoder: Tuple[StageSpec, ...] = tuple(encoder)
        self.__decoder: Tuple[DecoderStageSpec, ...] = tuple(decoder)
        self.__head = head
        self.__stem = stem
        self.__aspp = aspp
        if len(self.__encoder) and len(self.__decoder) != len(self.__encoder) - 1:
            raise DomainError("{0:d} encoder stages need {1:d} decoder stages, got {2:d}."
                              .format(len(self.__encoder), len(self.__encoder) - 1, len(self.__decoder)))

    @property
    def model(self) -> str:
        return self.__model

    @property
    def in_channels(self) -> int:
        return self.__in_channels

    @property
    def encoder(self) -> Tuple[StageSpec, ...]:
        return self.__encoder

    @property
    def decoder(self) -> Tuple[DecoderStageSpec, ...]:
        return self.__decoder

    @property
    def head(self) -> Optional[HeadSpec]:
        return self.__head

    @property
    def stem(self) -> Optional[ConvBlockSpec]:
        return self.__stem

    @property
    def aspp(self) -> Optional[ASPPSpec]:
        return self.__aspp

    @property
    def num_stages(self) -> int:
        return len(self.__encoder)

    @property
    def num_classes(self) -> int:
        return self.__head.num_classes if self.__head is not None else 0

    def divisor(self) -> Shape3:
        """
        :return: per axis, the factor the input spatial dims must be divisible by.
        """
        d = [1, 1, 1]
        for stage in self.__encoder:
            for axis in range(3):
                d[axis] *= stage.stride[axis]
        return tuple(d)

    def stage_shapes(self, patch: Sequence[int]) -> List[Shape3]:
        """
        :return: the spatial dims of the encoder stage outputs followed by those of the decoder
        stage outputs, for an input of spatial dims "patch".
        """
        shape = [int(v) for v in patch]
        encoder: List[Shape3] = []
        for stage in self.__encoder:
            shape = [n // s for n, s in zip(shape, stage.stride)]
            encoder.append(tuple(shape))
        decoder: List[Shape3] = []
        for stage in self.__decoder:
            shape = [n * s for n, s in zip(shape, stage.stride)]
            decoder.append(tuple(shape))
        return encoder + decoder

    def residual_count(self) -> int:
        stages = list(self.__encoder) + [d.block for d in self.__decoder]
        return sum(1 for s in stages if s.residual)

    def conv_stage_count(self) -> int:
        return len(self.__encoder) + len(self.__decoder)

    def param_count(self) -> int:
        """
        :return: the exact number of trainable scalars.
        """
        total = sum(s.param_count() for s in self.__encoder) + sum(d.param_count() for d in self.__decoder)
        for part in (self.__stem, self.__aspp, self.__head):
            if part is not None:
                total += part.param_count()
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'network',
            'model': self.__model,
            'in_channels': self.__in_channels,
            'stem': self.__stem.to_dict() if self.__stem is not None else None,
            'aspp': self.__aspp.to_dict() if self.__aspp is not None else None,
            'encoder': [s.to_dict() for s in self.__encoder],
            'decoder': [d.to_dict() for d in self.__decoder],
            'head': self.__head.to_dict() if self.__head is not None else None
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "NetworkSpec":
        return NetworkSpec(d['model'],
                           d.get('in_channels', 1),
                           [StageSpec.from_dict(s) for s in d.get('encoder', [])],
                           [DecoderStageSpec.from_dict(s) for s in d.get('decoder', [])],
                           HeadSpec.from_dict(d['head']) if d.get('head') else None,
                           ConvBlockSpec.from_dict(d['stem']) if d.get('stem') else None,
                           ASPPSpec.from_dict(d['aspp']) if d.get('aspp') else None)

    def key(self) -> str:
        return self.to_json(indent=None)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NetworkSpec) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(self.key())


def param_count(spec: NetworkSpec) -> int:
    return spec.param_count()
