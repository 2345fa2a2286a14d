import numpy as np
import pytest
from errors import PreconditionError, ShapeError
from network.builder import build_unet
from network.parameters import init_parameters
from training.checkpoint import Checkpoint
from training.inference import sliding_window_steps, window_weights, sliding_window_predict, \
    gaussian_importance_map, network_predictor, predict_volume

CONSTANT = np.array([0.1, 0.2, 0.3, 0.4])


def _constant_predictor(batch: np.ndarray) -> np.ndarray:
    shape = (1, 4) + batch.shape[2:]
    return np.broadcast_to(CONSTANT[None, :, None, None, None], shape).copy()


def test_window_starts_cover_the_image():
    assert sliding_window_steps((8, 8, 4), (20, 8, 9)) == [[0, 4, 8, 12], [0], [0, 2, 3, 5]]
    with pytest.raises(ShapeError):
        sliding_window_steps((8, 8, 4), (6, 8, 4))
    with pytest.raises(PreconditionError):
        sliding_window_steps((8, 8, 4), (8, 8, 4), step_size=0.0)


def test_blending_weights_sum_to_one():
    image_size = (20, 17, 9)
    total = np.zeros(image_size)
    for window, weights in window_weights(image_size, (8, 8, 4)):
        total[window] += weights
    assert np.allclose(total, 1.0, atol=1e-12)


def test_importance_map_peaks_at_the_center():
    weights = gaussian_importance_map((9, 7, 5))
    assert weights[4, 3, 2] == 1.0
    assert weights.min() > 0


def test_constant_predictions_stay_constant(rng):
    for shape in [(20, 17, 9), (5, 8, 3)]:
        probs = sliding_window_predict(rng.normal(size=shape), _constant_predictor, (8, 8, 4), 4)
        assert probs.shape == (4,) + shape
        assert np.allclose(probs, CONSTANT[:, None, None, None], atol=1e-12)


def test_single_window_is_one_forward_pass(toy_plan, rng):
    spec = build_unet(toy_plan)
    checkpoint = Checkpoint(spec, init_parameters(spec, 3), toy_plan)
    predictor = network_predictor(checkpoint)
    image = rng.normal(size=toy_plan.patch_size).astype(np.float32)
    blended = sliding_window_predict(image, predictor, toy_plan.patch_size, 4)
    direct = predictor(image[None, None])[0]
    assert np.allclose(blended, direct, atol=1e-7)


def test_volume_prediction_on_the_native_grid(tiny_pair, tiny_fingerprint, tiny_plan):
    volume, _ = tiny_pair
    spec = build_unet(tiny_plan)
    params = init_parameters(spec, 0)
    with pytest.raises(PreconditionError):
        predict_volume(Checkpoint(spec, params, tiny_plan), volume, _constant_predictor)
    checkpoint = Checkpoint(spec, params, tiny_plan, fingerprint=tiny_fingerprint)
    probability_map = predict_volume(checkpoint, volume, _constant_predictor)
    assert probability_map.shape == volume.shape
    assert probability_map.spacing == volume.spacing
    assert probability_map.argmax().labels() == (3,)
    assert sorted(probability_map.class_volumes()) == ["IRF", "PED", "SRF"]
    coarse = predict_volume(checkpoint, volume, _constant_predictor, step_size=1.0)
    assert np.allclose(coarse.probs.sum(axis=0), 1.0, atol=1e-5)
