import numpy as np
import pytest

from gamedepth.dataset import GenerationConfig, generate_dataset
from gamedepth.scenegen import WEATHER_KINDS
from gamedepth.training import TrainConfig, train

SMOKE_TIMES = (7.0, 10.0, 13.0, 16.0, 19.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def smoke_data(tmp_path_factory):
    """64 procedural 32x32 frames with mixed times and weathers."""
    out = tmp_path_factory.mktemp("smoke_data")
    cfg = GenerationConfig(count=64, width=32, height=32, times=SMOKE_TIMES,
                           weathers=WEATHER_KINDS, seed=2024, sampling="sampled")
    generate_dataset(cfg, out)
    return out


@pytest.fixture(scope="session")
def heldout_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("heldout_data")
    cfg = GenerationConfig(count=16, width=32, height=32, times=SMOKE_TIMES,
                           weathers=WEATHER_KINDS, seed=777, sampling="sampled")
    generate_dataset(cfg, out)
    return out


def smoke_config(data_dir, alpha=0.5):
    # 64 samples / batch 16 = 4 iterations per epoch -> 500 iterations
    return TrainConfig(str(data_dir), epochs=125, batch_size=16, base_lr=4e-4,
                       alpha=alpha, channels=8, blocks=2, ratio=4, seed=0)


@pytest.fixture(scope="session")
def smoke_runs(smoke_data):
    """The smoke-test training run twice at alpha=0.5 plus once at alpha=0, with timings."""
    import time

    runs = {}
    for key, alpha in (("a", 0.5), ("b", 0.5), ("no_tv", 0.0)):
        t0 = time.perf_counter()
        result = train(smoke_config(smoke_data, alpha))
        runs[key] = (result, time.perf_counter() - t0)
    return runs
