"""
Patch sampling for training.

A batch holds "plan.batch_size" patches. The last ceil(batch_size × foreground_fraction) patches are
forced to contain foreground: their window is centered (as far as the borders allow) on a random
foreground voxel of the drawn case. The other patches are drawn uniformly.
"""

from typing import List, Optional, Sequence, Tuple
from queue import Queue, Empty, Full
from threading import Thread
import math
import numpy as np
from errors import PreconditionError
from lock import ExtLock
from planner.plan_config import PlanConfig
from io_data.volume import Volume, LabelMask
from io_data.fingerprint import Fingerprint
from io_data.preprocessing import normalize, resample
from training.configs import TrainConfig, AugmentationConfig
from training.augmentation import augment

Batch = Tuple[np.ndarray, np.ndarray]


class TrainingCase:
    """
    A training pair in network space: normalized, resampled to the plan spacing and padded to at
    least the patch size.
    """

    def __init__(self, image: np.ndarray, labels: np.ndarray, name: str = ""):
        self.__image = image
        self.__labels = labels
        self.__name = name
        self.__foreground = np.argwhere(labels != 0)

    @property
    def image(self) -> np.ndarray:
        return self.__image

    @property
    def labels(self) -> np.ndarray:
        return self.__labels

    @property
    def name(self) -> str:
        return self.__name

    @property
    def foreground(self) -> np.ndarray:
        """
        :return: the (n, 3) coordinates of the foreground voxels.
        """
        return self.__foreground


def pad_to(array: np.ndarray, shape: Sequence[int], value: float = 0) -> Tuple[np.ndarray, Tuple[slice, ...]]:
    """
    Symmetric padding up to at least "shape".
    :return: the padded array and the slices that crop it back.
    """
    widths = []
    crops = []
    for n, p in zip(array.shape, shape):
        total = max(0, int(p) - n)
        before = total // 2
        widths.append((before, total - before))
        crops.append(slice(before, before + n))
    if not any(w[0] or w[1] for w in widths):
        return array, tuple(crops)
    return np.pad(array, widths, mode="constant", constant_values=value), tuple(crops)


def prepare_case(volume: Volume, mask: LabelMask, fingerprint: Fingerprint, plan: PlanConfig) -> TrainingCase:
    mask.check_pairs_with(volume)
    image = resample(normalize(volume, fingerprint), plan.target_spacing).array
    labels = resample(mask, plan.target_spacing).array
    image, _ = pad_to(image, plan.patch_size)
    labels, _ = pad_to(labels, plan.patch_size)
    return TrainingCase(image.astype(np.float32), labels.astype(np.uint8), volume.meta.get('patient', ""))


def prepare_cases(pairs: Sequence[Tuple[Volume, LabelMask]], fingerprint: Fingerprint, plan: PlanConfig) \
        -> List[TrainingCase]:
    if len(pairs) == 0:
        raise PreconditionError("The training set is empty.")
    return [prepare_case(v, m, fingerprint, plan) for v, m in pairs]


def sample_window(case: TrainingCase, patch: Sequence[int], force_foreground: bool,
                  rng: np.random.Generator) -> Tuple[slice, ...]:
    shape = case.image.shape
    if force_foreground and len(case.foreground):
        center = case.foreground[int(rng.integers(len(case.foreground)))]
        starts = [int(min(max(c - p // 2, 0), n - p)) for c, p, n in zip(center, patch, shape)]
    else:
        starts = [int(rng.integers(0, n - p + 1)) for p, n in zip(patch, shape)]
    return tuple(slice(s, s + p) for s, p in zip(starts, patch))


def sample_batch(cases: Sequence[TrainingCase],
                 plan: PlanConfig,
                 train_cfg: TrainConfig,
                 aug_cfg: AugmentationConfig,
                 rng: np.random.Generator) -> Batch:
    """
    Draw one augmented batch.

    :return: images (batch, 1, x, y, z) float32 and labels (batch, x, y, z) int64.
    """
    batch = plan.batch_size
    forced = int(math.ceil(batch * train_cfg.foreground_fraction))
    images = np.empty((batch, 1) + tuple(plan.patch_size), dtype=np.float32)
    labels = np.empty((batch,) + tuple(plan.patch_size), dtype=np.int64)
    for i in range(batch):
        case = cases[int(rng.integers(len(cases)))]
        window = sample_window(case, plan.patch_size, i >= batch - forced, rng)
        image, mask = augment(case.image[window], case.labels[window], aug_cfg, rng)
        images[i, 0] = image
        labels[i] = mask
    return images, labels


class BatchFeeder:
    """
    Produce training batches.

    With 0 workers, batches are drawn synchronously from one generator seeded with the training seed:
    the sequence of batches is reproducible. With n workers, n threads draw batches from their own
    generators and push them into a bounded queue; the batch order then depends on scheduling.
    """

    def __init__(self,
                 cases: Sequence[TrainingCase],
                 plan: PlanConfig,
                 train_cfg: TrainConfig,
                 aug_cfg: AugmentationConfig,
                 queue_size: int = 4):
        if len(cases) == 0:
            raise PreconditionError("The training set is empty.")
        self.__cases = list(cases)
        self.__plan = plan
        self.__train_cfg = train_cfg
        self.__aug_cfg = aug_cfg
        seeds = np.random.SeedSequence([train_cfg.seed, aug_cfg.seed]).spawn(max(1, train_cfg.workers))
        self.__generators = [np.random.default_rng(s) for s in seeds]
        self.__queue: Queue = Queue(maxsize=queue_size)
        self.__threads: List[Thread] = []

        # Locks and shared resources
        self.__lock_running = ExtLock("BatchFeeder.running")
        self.__shared_running: bool = False
        self.__shared_error: Optional[BaseException] = None

    @property
    def workers(self) -> int:
        return self.__train_cfg.workers

    def __enter__(self) -> "BatchFeeder":
        self.start()
        return self

    def __exit__(self, type, value, traceback) -> None:
        self.stop()

    def start(self) -> None:
        if self.workers == 0:
            return
        with self.__lock_running.set("training.sampler.BatchFeeder.start"):
            if self.__shared_running:
                return
            self.__shared_running = True
        self.__start_threads()

    def __start_threads(self) -> None:
        self.__threads = [Thread(target=self.__thread_worker, args=[i], daemon=True) for i in range(self.workers)]
        for thread in self.__threads:
            thread.start()

    def stop(self) -> None:
        with self.__lock_running.set("training.sampler.BatchFeeder.stop"):
            self.__shared_running = False
        for thread in self.__threads:
            thread.join()
        self.__threads = []

    def __is_running(self) -> bool:
        with self.__lock_running.set("training.sampler.BatchFeeder.__is_running"):
            return self.__shared_running

    def next_batch(self) -> Batch:
        if self.workers == 0:
            return sample_batch(self.__cases, self.__plan, self.__train_cfg, self.__aug_cfg, self.__generators[0])
        while True:
            try:
                return self.__queue.get(timeout=0.1)
            except Empty:
                with self.__lock_running.set("training.sampler.BatchFeeder.next_batch"):
                    if self.__shared_error is not None:
                        raise self.__shared_error
                    if not self.__shared_running:
                        raise PreconditionError("The batch feeder is not running.")

    ####################################################################################################################
    # Threads                                                                                                          #
    ####################################################################################################################

    def __thread_worker(self, worker: int) -> None:
        """
        Draw batches until the feeder is stopped.
        """
        rng = self.__generators[worker]
        try:
            while self.__is_running():
                batch = sample_batch(self.__cases, self.__plan, self.__train_cfg, self.__aug_cfg, rng)
                while self.__is_running():
                    try:
                        self.__queue.put(batch, timeout=0.1)
                        break
                    except Full:
                        continue
        except BaseException as error:
            with self.__lock_running.set("training.sampler.BatchFeeder.__thread_worker"):
                self.__shared_error = error
