"""
torch modules instantiated from the network specs.

Modules are only used as a structure to run "torch.func.functional_call()" with a Parameters
store: their own parameters are never trained.
"""

from typing import List, Optional
import torch
from torch import nn
from network.specs import NEGATIVE_SLOPE, ConvBlockSpec, StageSpec, ASPPSpec, DecoderStageSpec, HeadSpec, NetworkSpec


class ConvBlock(nn.Module):

    def __init__(self, spec: ConvBlockSpec):
        super().__init__()
        self.conv = nn.Conv3d(spec.in_channels, spec.out_channels, spec.kernel, stride=spec.stride,
                              padding=spec.padding, dilation=spec.dilation, bias=True)
        self.norm = nn.InstanceNorm3d(spec.out_channels, affine=True)
        self.act = nn.LeakyReLU(NEGATIVE_SLOPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.norm(self.conv(x)))


class ConvStage(nn.Module):

    def __init__(self, spec: StageSpec):
        super().__init__()
        self.first = ConvBlock(spec.first)
        self.second = ConvBlock(spec.second)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.second(self.first(x))


class ResidualBlock(ConvStage):
    """
    out = act(norm(conv(act(norm(conv(x)))))) + skip(x)
    """

    def __init__(self, spec: StageSpec):
        super().__init__(spec)
        if spec.in_channels != spec.out_channels or spec.stride != (1, 1, 1):
            self.skip = nn.Conv3d(spec.in_channels, spec.out_channels, 1, stride=spec.stride, bias=True)
        else:
            self.skip = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.second(self.first(x)) + self.skip(x)


class ASPP(nn.Module):

    def __init__(self, spec: ASPPSpec):
        super().__init__()
        self.branches = nn.ModuleList([ConvBlock(b) for b in spec.branches])
        self.fuse = ConvBlock(spec.fuse)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fuse(torch.cat([branch(x) for branch in self.branches], dim=1))


class DecoderStage(nn.Module):

    def __init__(self, spec: DecoderStageSpec):
        super().__init__()
        self.up = nn.ConvTranspose3d(spec.up_in, spec.up_out, spec.stride, stride=spec.stride, bias=True)
        self.block = make_stage(spec.block)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        return self.block(torch.cat([self.up(x), skip], dim=1))


def make_stage(spec: StageSpec) -> nn.Module:
    return ResidualBlock(spec) if spec.residual else ConvStage(spec)


class SegmentationNetwork(nn.Module):
    """
    The module tree of a NetworkSpec. The output of "forward()" is the channel softmax of the head
    (or the last feature map when the network spec has no head).
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.stem: Optional[nn.Module] = ConvBlock(spec.stem) if spec.stem is not None else None
        self.aspp: Optional[nn.Module] = ASPP(spec.aspp) if spec.aspp is not None else None
        self.encoder = nn.ModuleList([make_stage(s) for s in spec.encoder])
        self.decoder = nn.ModuleList([DecoderStage(d) for d in spec.decoder])
        self.head: Optional[nn.Module] = nn.Conv3d(spec.head.in_channels, spec.head.num_classes, 1, bias=True) \
            if spec.head is not None else None

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        if self.stem is not None:
            x = self.stem(x)
        if self.aspp is not None:
            x = self.aspp(x)
        skips: List[torch.Tensor] = []
        for stage in self.encoder:
            x = stage(x)
            skips.append(x)
        # The last encoder stage is the bottleneck: decoder stage i joins encoder stage (n - 2 - i).
        for i, stage in enumerate(self.decoder):
            x = stage(x, skips[len(skips) - 2 - i])
        if self.head is not None:
            x = self.head(x)
        return x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.logits(x)
        return torch.softmax(out, dim=1) if self.head is not None else out
