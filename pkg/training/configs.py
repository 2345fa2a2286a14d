from typing import Dict, Any, Tuple, Sequence
from errors import ConfigError
from loggable import Loggable


def _probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError("{0:s} must be in [0, 1], got {1}.".format(name, value))
    return value


def _range(name: str, values: Sequence[float]) -> Tuple[float, float]:
    low, high = (float(v) for v in values)
    if high < low:
        raise ConfigError("{0:s} is an empty range ({1}, {2}).".format(name, low, high))
    return low, high


class TrainConfig(Loggable):
    """
    The optimization recipe: Adam, polynomial learning rate decay, Dice + cross-entropy loss.
    """

    def __init__(self,
                 learning_rate: float = 0.01,
                 max_epochs: int = 1000,
                 batches_per_epoch: int = 250,
                 betas: Tuple[float, float] = (0.9, 0.999),
                 epsilon: float = 1e-8,
                 poly_exponent: float = 0.9,
                 foreground_fraction: float = 1.0 / 3.0,
                 dice_smooth: float = 1e-5,
                 seed: int = 0,
                 workers: int = 0):
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.batches_per_epoch = batches_per_epoch
        self.betas = betas
        self.epsilon = epsilon
        self.poly_exponent = poly_exponent
        self.foreground_fraction = foreground_fraction
        self.dice_smooth = dice_smooth
        self.seed = seed
        self.workers = workers

    @property
    def learning_rate(self) -> float:
        return self.__learning_rate

    @learning_rate.setter
    def learning_rate(self, value: float) -> None:
        # 0 is accepted: a step with a zero learning rate leaves the weights unchanged.
        if float(value) < 0:
            raise ConfigError("learning_rate must be >= 0, got {0}.".format(value))
        self.__learning_rate = float(value)

    @property
    def max_epochs(self) -> int:
        return self.__max_epochs

    @max_epochs.setter
    def max_epochs(self, value: int) -> None:
        if int(value) < 0:
            raise ConfigError("max_epochs must be >= 0, got {0}.".format(value))
        self.__max_epochs = int(value)

    @property
    def batches_per_epoch(self) -> int:
        return self.__batches_per_epoch

    @batches_per_epoch.setter
    def batches_per_epoch(self, value: int) -> None:
        if int(value) < 1:
            raise ConfigError("batches_per_epoch must be >= 1, got {0}.".format(value))
        self.__batches_per_epoch = int(value)

    @property
    def betas(self) -> Tuple[float, float]:
        return self.__betas

    @betas.setter
    def betas(self, value: Sequence[float]) -> None:
        b1, b2 = (float(v) for v in value)
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ConfigError("Adam decay rates must be in [0, 1), got {0}.".format(value))
        self.__betas = (b1, b2)

    @property
    def epsilon(self) -> float:
        return self.__epsilon

    @epsilon.setter
    def epsilon(self, value: float) -> None:
        if float(value) <= 0:
            raise ConfigError("epsilon must be positive, got {0}.".format(value))
        self.__epsilon = float(value)

    @property
    def poly_exponent(self) -> float:
        return self.__poly_exponent

    @poly_exponent.setter
    def poly_exponent(self, value: float) -> None:
        if float(value) <= 0:
            raise ConfigError("poly_exponent must be positive, got {0}.".format(value))
        self.__poly_exponent = float(value)

    @property
    def foreground_fraction(self) -> float:
        return self.__foreground_fraction

    @foreground_fraction.setter
    def foreground_fraction(self, value: float) -> None:
        self.__foreground_fraction = _probability("foreground_fraction", value)

    @property
    def dice_smooth(self) -> float:
        return self.__dice_smooth

    @dice_smooth.setter
    def dice_smooth(self, value: float) -> None:
        if float(value) <= 0:
            raise ConfigError("dice_smooth must be positive, got {0}.".format(value))
        self.__dice_smooth = float(value)

    @property
    def seed(self) -> int:
        return self.__seed

    @seed.setter
    def seed(self, value: int) -> None:
        self.__seed = int(value)

    @property
    def workers(self) -> int:
        return self.__workers

    @workers.setter
    def workers(self, value: int) -> None:
        if int(value) < 0:
            raise ConfigError("workers must be >= 0, got {0}.".format(value))
        self.__workers = int(value)

    def learning_rate_at(self, epoch: int) -> float:
        """
        Polynomial decay: lr0 × (1 - epoch / max_epochs) ^ 0.9 (0 at epoch = max_epochs).
        """
        if self.__max_epochs == 0:
            return self.__learning_rate
        remaining = max(0.0, 1.0 - float(epoch) / float(self.__max_epochs))
        return self.__learning_rate * remaining ** self.__poly_exponent

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'train_config',
            'learning_rate': self.__learning_rate,
            'max_epochs': self.__max_epochs,
            'batches_per_epoch': self.__batches_per_epoch,
            'betas': list(self.__betas),
            'epsilon': self.__epsilon,
            'poly_exponent': self.__poly_exponent,
            'foreground_fraction': self.__foreground_fraction,
            'dice_smooth': self.__dice_smooth,
            'seed': self.__seed,
            'workers': self.__workers
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "TrainConfig":
        config = TrainConfig()
        for key, value in d.items():
            if key == 'log-type':
                continue
            if key not in config.to_dict():
                raise ConfigError('Unknown training option "{0}".'.format(key))
            setattr(config, key, value)
        return config


class AugmentationConfig(Loggable):
    """
    On-the-fly augmentation: mirror flips, in-plane rotation, isotropic scaling, additive Gaussian
    noise and gamma. Each transform has an enable flag and an application probability.
    """

    def __init__(self,
                 mirror: bool = True,
                 mirror_probability: float = 0.5,
                 mirror_axes: Sequence[int] = (0, 1, 2),
                 rotation: bool = True,
                 rotation_probability: float = 0.2,
                 rotation_degrees: float = 15.0,
                 scaling: bool = True,
                 scaling_probability: float = 0.2,
                 scale_range: Sequence[float] = (0.85, 1.25),
                 noise: bool = True,
                 noise_probability: float = 0.1,
                 noise_sigma: float = 0.1,
                 gamma: bool = True,
                 gamma_probability: float = 0.3,
                 gamma_range: Sequence[float] = (0.7, 1.5),
                 seed: int = 0):
        self.mirror = mirror
        self.mirror_probability = mirror_probability
        self.mirror_axes = mirror_axes
        self.rotation = rotation
        self.rotation_probability = rotation_probability
        self.rotation_degrees = rotation_degrees
        self.scaling = scaling
        self.scaling_probability = scaling_probability
        self.scale_range = scale_range
        self.noise = noise
        self.noise_probability = noise_probability
        self.noise_sigma = noise_sigma
        self.gamma = gamma
        self.gamma_probability = gamma_probability
        self.gamma_range = gamma_range
        self.seed = seed

    @staticmethod
    def disabled(seed: int = 0) -> "AugmentationConfig":
        return AugmentationConfig(mirror=False, rotation=False, scaling=False, noise=False, gamma=False, seed=seed)

    @property
    def mirror(self) -> bool:
        return self.__mirror

    @mirror.setter
    def mirror(self, value: bool) -> None:
        self.__mirror = bool(value)

    @property
    def mirror_probability(self) -> float:
        return self.__mirror_probability

    @mirror_probability.setter
    def mirror_probability(self, value: float) -> None:
        self.__mirror_probability = _probability("mirror_probability", value)

    @property
    def mirror_axes(self) -> Tuple[int, ...]:
        return self.__mirror_axes

    @mirror_axes.setter
    def mirror_axes(self, value: Sequence[int]) -> None:
        axes = tuple(int(a) for a in value)
        if any(a not in (0, 1, 2) for a in axes):
            raise ConfigError("mirror_axes must be a subset of (0, 1, 2), got {0}.".format(value))
        self.__mirror_axes = axes

    @property
    def rotation(self) -> bool:
        return self.__rotation

    @rotation.setter
    def rotation(self, value: bool) -> None:
        self.__rotation = bool(value)

    @property
    def rotation_probability(self) -> float:
        return self.__rotation_probability

    @rotation_probability.setter
    def rotation_probability(self, value: float) -> None:
        self.__rotation_probability = _probability("rotation_probability", value)

    @property
    def rotation_degrees(self) -> float:
        return self.__rotation_degrees

    @rotation_degrees.setter
    def rotation_degrees(self, value: float) -> None:
        if float(value) < 0:
            raise ConfigError("rotation_degrees must be >= 0, got {0}.".format(value))
        self.__rotation_degrees = float(value)

    @property
    def scaling(self) -> bool:
        return self.__scaling

    @scaling.setter
    def scaling(self, value: bool) -> None:
        self.__scaling = bool(value)

    @property
    def scaling_probability(self) -> float:
        return self.__scaling_probability

    @scaling_probability.setter
    def scaling_probability(self, value: float) -> None:
        self.__scaling_probability = _probability("scaling_probability", value)

    @property
    def scale_range(self) -> Tuple[float, float]:
        return self.__scale_range

    @scale_range.setter
    def scale_range(self, value: Sequence[float]) -> None:
        low, high = _range("scale_range", value)
        if low <= 0:
            raise ConfigError("scale_range must be positive, got {0}.".format(value))
        self.__scale_range = (low, high)

    @property
    def noise(self) -> bool:
        return self.__noise

    @noise.setter
    def noise(self, value: bool) -> None:
        self.__noise = bool(value)

    @property
    def noise_probability(self) -> float:
        return self.__noise_probability

    @noise_probability.setter
    def noise_probability(self, value: float) -> None:
        self.__noise_probability = _probability("noise_probability", value)

    @property
    def noise_sigma(self) -> float:
        return self.__noise_sigma

    @noise_sigma.setter
    def noise_sigma(self, value: float) -> None:
        if float(value) < 0:
            raise ConfigError("noise_sigma must be >= 0, got {0}.".format(value))
        self.__noise_sigma = float(value)

    @property
    def gamma(self) -> bool:
        return self.__gamma

    @gamma.setter
    def gamma(self, value: bool) -> None:
        self.__gamma = bool(value)

    @property
    def gamma_probability(self) -> float:
        return self.__gamma_probability

    @gamma_probability.setter
    def gamma_probability(self, value: float) -> None:
        self.__gamma_probability = _probability("gamma_probability", value)

    @property
    def gamma_range(self) -> Tuple[float, float]:
        return self.__gamma_range

    @gamma_range.setter
    def gamma_range(self, value: Sequence[float]) -> None:
        low, high = _range("gamma_range", value)
        if low <= 0:
            raise ConfigError("gamma_range must be positive, got {0}.".format(value))
        self.__gamma_range = (low, high)

    @property
    def seed(self) -> int:
        return self.__seed

    @seed.setter
    def seed(self, value: int) -> None:
        self.__seed = int(value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'log-type': 'augmentation_config',
            'mirror': self.__mirror,
            'mirror_probability': self.__mirror_probability,
            'mirror_axes': list(self.__mirror_axes),
            'rotation': self.__rotation,
            'rotation_probability': self.__rotation_probability,
            'rotation_degrees': self.__rotation_degrees,
            'scaling': self.__scaling,
            'scaling_probability': self.__scaling_probability,
            'scale_range': list(self.__scale_range),
            'noise': self.__noise,
            'noise_probability': self.__noise_probability,
            'noise_sigma': self.__noise_sigma,
            'gamma': self.__gamma,
            'gamma_probability': self.__gamma_probability,
            'gamma_range': list(self.__gamma_range),
            'seed': self.__seed
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "AugmentationConfig":
        config = AugmentationConfig()
        for key, value in d.items():
            if key == 'log-type':
                continue
            if key not in config.to_dict():
                raise ConfigError('Unknown augmentation option "{0}".'.format(key))
            setattr(config, key, value)
        return config
