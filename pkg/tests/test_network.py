import itertools
import numpy as np
import pytest
import torch
from errors import DomainError, ShapeError
from planner.plan_config import PlanConfig
from network.specs import ConvBlockSpec, ResidualBlockSpec, NetworkSpec, param_count
from network.builder import build_unet, build_raspp, build_network, aspp_rates
from network.modules import ResidualBlock, SegmentationNetwork
from network.parameters import init_parameters, forward


def _random_plan(rng: np.random.Generator) -> PlanConfig:
    pools = tuple(int(p) for p in rng.integers(0, 3, size=3))
    patch = tuple(int(2 ** p * rng.integers(2, 4)) for p in pools)
    base = int(rng.integers(2, 5))
    return PlanConfig((1.0, 1.0, 1.0), patch, 2, pools, base_features=base, max_features=4 * base)


@pytest.mark.parametrize("model", ["unet", "raspp"])
def test_random_plans_give_shape_preserving_softmax_networks(model):
    rng = np.random.default_rng(99 if model == "unet" else 100)
    for _ in range(20):
        plan = _random_plan(rng)
        spec = build_network(model, plan)
        params = init_parameters(spec, int(rng.integers(1000)))
        x = torch.from_numpy(rng.normal(size=(1, 1) + plan.patch_size).astype(np.float32))
        with torch.no_grad():
            probs = forward(spec, params, x)
        assert tuple(probs.shape) == (1, 4) + plan.patch_size
        assert torch.allclose(probs.sum(dim=1), torch.ones((1,) + plan.patch_size), atol=1e-6)
        assert params.numel() == spec.param_count() == param_count(spec)
        assert spec.divisor() == plan.divisor()


def test_raspp_has_one_aspp_stem_and_residual_stages_everywhere(tiny_plan):
    raspp = build_raspp(tiny_plan)
    assert raspp.stem is not None
    assert raspp.aspp is not None
    assert raspp.residual_count() == raspp.conv_stage_count() == 2 * tiny_plan.num_stages - 1
    modules = list(SegmentationNetwork(raspp).modules())
    assert sum(1 for m in modules if type(m).__name__ == "ASPP") == 1
    unet = build_unet(tiny_plan)
    assert unet.aspp is None
    assert unet.residual_count() == 0


def test_zero_body_residual_block_is_its_skip_path(rng):
    for spec in (ResidualBlockSpec(ConvBlockSpec(3, 5, (3, 3, 3), (2, 2, 1)), ConvBlockSpec(5, 5)),
                 ResidualBlockSpec(ConvBlockSpec(4, 4), ConvBlockSpec(4, 4))):
        block = ResidualBlock(spec)
        with torch.no_grad():
            block.second.norm.weight.zero_()
            block.second.norm.bias.zero_()
            x = torch.from_numpy(rng.normal(size=(2, spec.in_channels, 8, 6, 4)).astype(np.float32))
            assert torch.equal(block(x), block.skip(x))
    assert ResidualBlockSpec(ConvBlockSpec(4, 4), ConvBlockSpec(4, 4)).projection is False


def test_stage_shapes(tiny_plan):
    spec = build_unet(tiny_plan)
    assert spec.stage_shapes(tiny_plan.patch_size) == [(16, 16, 8), (8, 8, 4), (4, 4, 4), (8, 8, 4), (16, 16, 8)]


def test_conv_block_parameter_count():
    # weights + bias + instance norm scale and shift
    assert ConvBlockSpec(1, 4).param_count() == 4 * 27 + 4 + 2 * 4
    assert ConvBlockSpec(2, 3, (3, 3, 1), dilation=2).padding == (2, 2, 0)


def test_aspp_rates_shrink_with_the_patch(tiny_plan, toy_plan):
    assert aspp_rates(tiny_plan.replace(patch_size=(32, 32, 16), pools_per_axis=(2, 2, 1))) == (1, 2, 4, 7)
    assert aspp_rates(toy_plan) == (1, 2)


def test_input_must_be_divisible_by_the_pooling_schedule(toy_plan):
    spec = build_unet(toy_plan)
    params = init_parameters(spec, 0)
    with pytest.raises(ShapeError) as info:
        forward(spec, params, np.zeros((1, 1, 8, 6, 4), dtype=np.float32))
    assert info.value.axis == 1


def test_spec_document_rebuilds_the_spec(tiny_plan):
    for spec in (build_unet(tiny_plan), build_raspp(tiny_plan)):
        rebuilt = NetworkSpec.from_dict(spec.to_dict())
        assert rebuilt == spec
        assert rebuilt.param_count() == spec.param_count()


def test_unknown_model(tiny_plan):
    with pytest.raises(DomainError):
        build_network("segnet", tiny_plan)


def _direct_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Zero padded 3x3x3 cross-correlation, one kernel tap at a time.
    _, nx, ny, nz = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))
    out = np.empty((w.shape[0], nx, ny, nz))
    for o in range(w.shape[0]):
        out[o] = b[o]
        for i in range(x.shape[0]):
            for dx, dy, dz in itertools.product(range(3), repeat=3):
                out[o] += w[o, i, dx, dy, dz] * padded[i, dx:dx + nx, dy:dy + ny, dz:dz + nz]
    return out


def _direct_block(x: np.ndarray, p, prefix: str) -> np.ndarray:
    y = _direct_conv(x, p[prefix + ".conv.weight"], p[prefix + ".conv.bias"])
    y = (y - y.mean(axis=(1, 2, 3), keepdims=True)) / np.sqrt(y.var(axis=(1, 2, 3), keepdims=True) + 1e-5)
    y = y * p[prefix + ".norm.weight"][:, None, None, None] + p[prefix + ".norm.bias"][:, None, None, None]
    return np.where(y > 0, y, 0.01 * y)


def test_single_stage_forward_matches_direct_convolution(rng):
    plan = PlanConfig((1.0, 1.0, 1.0), (4, 4, 3), 2, (0, 0, 0), base_features=2, max_features=2)
    spec = build_unet(plan)
    params = init_parameters(spec, 3, dtype=torch.float64)
    params = params.replace({name: torch.from_numpy(rng.normal(size=shape))
                             for name, shape in params.shapes().items()})
    p = {name: t.numpy() for name, t in params.items()}
    x = rng.normal(size=(1, 4, 4, 3))

    y = _direct_block(_direct_block(x, p, "encoder.0.first"), p, "encoder.0.second")
    logits = np.einsum("oi,ixyz->oxyz", p["head.weight"][:, :, 0, 0, 0], y) + p["head.bias"][:, None, None, None]
    expected = np.exp(logits - logits.max(axis=0)) / np.exp(logits - logits.max(axis=0)).sum(axis=0)

    with torch.no_grad():
        out = forward(spec, params, torch.from_numpy(x[None])).numpy()[0]
    assert np.allclose(out, expected, rtol=0.0, atol=1e-10)


def test_single_stage_parameter_count_closed_form():
    plan = PlanConfig((1.0, 1.0, 1.0), (4, 4, 4), 2, (0, 0, 0), base_features=2, max_features=2)
    spec = build_unet(plan, num_classes=2)
    # conv 1->2 and 2->2 (3x3x3, bias), two affine norms, 1x1x1 head 2->2.
    expected = (1 * 2 * 27 + 2) + (2 * 2 * 27 + 2) + 2 * (2 + 2) + (2 * 2 + 2)
    assert spec.param_count() == param_count(spec) == expected == 180
    assert init_parameters(spec, 0).numel() == expected
