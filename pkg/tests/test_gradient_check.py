import numpy as np
import pytest
from training import gradient_check as gradient_check_module
from errors import PreconditionError
from network.builder import build_network
from network.parameters import init_parameters
from training.gradient_check import gradient_check, relative_error


@pytest.mark.parametrize("model", ["unet", "raspp"])
def test_analytic_gradients_match_central_differences(model, toy_plan, rng):
    spec = build_network(model, toy_plan)
    params = init_parameters(spec, 21)
    images = rng.normal(size=(2, 1) + toy_plan.patch_size)
    labels = rng.integers(0, 4, size=(2,) + toy_plan.patch_size)
    assert gradient_check(spec, params, images, labels, samples=100, seed=4) <= 1e-4


def test_large_networks_are_refused(tiny_plan):
    spec = build_network("unet", tiny_plan)
    with pytest.raises(PreconditionError):
        gradient_check(spec, init_parameters(spec, 0), np.zeros((2, 1, 16, 16, 8)), np.zeros((2, 16, 16, 8)),
                       max_params=10)


def test_relative_error_floor():
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1e-3, 1.001e-3) == pytest.approx(1e-3 / 1.001, rel=1e-9)
    assert relative_error(0.0, 1e-9) == pytest.approx(1e-4)
    assert relative_error(0.0, 1e-6) == pytest.approx(0.1)


def test_too_few_differentiable_weights_is_an_error(monkeypatch, toy_plan, rng):
    spec = build_network("unet", toy_plan)
    images = rng.normal(size=(2, 1) + toy_plan.patch_size)
    labels = rng.integers(0, 4, size=(2,) + toy_plan.patch_size)
    monkeypatch.setattr(gradient_check_module, "_same_signs", lambda baseline, patterns: False)
    monkeypatch.setattr(gradient_check_module, "MAX_DRAWS_PER_SAMPLE", 1)
    with pytest.raises(PreconditionError) as info:
        gradient_check(spec, init_parameters(spec, 21), images, labels, samples=100, seed=4)
    assert "Only 0 of 100" in str(info.value)
