from typing import List, Sequence, Tuple
from errors import DomainError
from oct_types import NUM_CLASSES, ModelName, Shape3
from planner.plan_config import PlanConfig
from network.specs import ConvBlockSpec, StageSpec, ResidualBlockSpec, ASPPSpec, DecoderStageSpec, HeadSpec, \
    NetworkSpec

DEFAULT_ASPP_RATES: Tuple[int, ...] = (1, 2, 4, 8)


def _kernel(plan: PlanConfig) -> Shape3:
    # 2D plans convolve within the B-scan only.
    return (3, 3, 3) if plan.dimensionality == 3 else (3, 3, 1)


def _stride(plan: PlanConfig, stage: int) -> Shape3:
    return tuple(2 if 1 <= stage <= p else 1 for p in plan.pools_per_axis)


def _stage(in_channels: int, out_channels: int, kernel: Shape3, stride: Shape3, residual: bool) -> StageSpec:
    first = ConvBlockSpec(in_channels, out_channels, kernel, stride)
    second = ConvBlockSpec(out_channels, out_channels, kernel)
    return ResidualBlockSpec(first, second) if residual else StageSpec(first, second)


def _encoder_decoder(plan: PlanConfig, in_channels: int, residual: bool) \
        -> Tuple[List[StageSpec], List[DecoderStageSpec]]:
    kernel = _kernel(plan)
    encoder: List[StageSpec] = []
    channels = in_channels
    for stage in range(plan.num_stages):
        width = plan.features_at(stage)
        encoder.append(_stage(channels, width, kernel, _stride(plan, stage), residual))
        channels = width
    decoder: List[DecoderStageSpec] = []
    for stage in range(plan.num_stages - 2, -1, -1):
        width = plan.features_at(stage)
        block = _stage(2 * width, width, kernel, (1, 1, 1), residual)
        decoder.append(DecoderStageSpec(plan.features_at(stage + 1), width, _stride(plan, stage + 1), block))
    return encoder, decoder


def aspp_rates(plan: PlanConfig, rates: Sequence[int] = DEFAULT_ASPP_RATES) -> Tuple[int, ...]:
    """
    Scale the dilation rates down so that no dilated kernel exceeds the patch extent: a rate is capped
    at (smallest patch extent along the convolved axes - 1) // 2. Duplicates are dropped; when less
    than 2 distinct rates remain, (1, 2) is used.
    """
    kernel = _kernel(plan)
    extents = [n for n, k in zip(plan.patch_size, kernel) if k > 1]
    cap = max(1, (min(extents) - 1) // 2)
    scaled: List[int] = []
    for r in rates:
        r = min(int(r), cap)
        if r not in scaled:
            scaled.append(r)
    if len(scaled) < 2:
        return 1, 2
    return tuple(scaled)


def build_unet(plan: PlanConfig, num_classes: int = NUM_CLASSES, in_channels: int = 1) -> NetworkSpec:
    """
    The baseline U-Net: plain conv stages, strided conv downsampling, transposed conv upsampling.

    :param plan: the plan.
    :param num_classes: the number of output channels.
    :param in_channels: the number of input channels.
    :return: the network spec.
    """
    encoder, decoder = _encoder_decoder(plan, in_channels, residual=False)
    return NetworkSpec(ModelName.UNET.value, in_channels, encoder, decoder,
                       HeadSpec(plan.features_at(0), num_classes))


def build_raspp(plan: PlanConfig,
                num_classes: int = NUM_CLASSES,
                in_channels: int = 1,
                rates: Sequence[int] = DEFAULT_ASPP_RATES) -> NetworkSpec:
    """
    The U-Net with residual stages (bottleneck included) and an ASPP stem placed between a first
    base-width conv block and encoder stage 0.

    :param plan: the plan.
    :param num_classes: the number of output channels.
    :param in_channels: the number of input channels.
    :param rates: the requested ASPP dilation rates (scaled down to the patch, see "aspp_rates()").
    :return: the network spec.
    """
    base = plan.features_at(0)
    kernel = _kernel(plan)
    stem = ConvBlockSpec(in_channels, base, kernel)
    aspp = ASPPSpec(base, base, base, aspp_rates(plan, rates), kernel)
    encoder, decoder = _encoder_decoder(plan, base, residual=True)
    return NetworkSpec(ModelName.RASPP.value, in_channels, encoder, decoder, HeadSpec(base, num_classes), stem, aspp)


def build_network(model: str, plan: PlanConfig, num_classes: int = NUM_CLASSES, **options) -> NetworkSpec:
    if model == ModelName.UNET.value:
        return build_unet(plan, num_classes, **options)
    if model == ModelName.RASPP.value:
        return build_raspp(plan, num_classes, **options)
    raise DomainError('Unknown model "{0}" (expected one of {1}).'.format(model, ", ".join(m.value
                                                                                        for m in ModelName)))
