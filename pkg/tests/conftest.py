import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def small_synthetic():
    from helpers import small_dataset

    return small_dataset(size=96, resolution=32, seed=1)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, small_synthetic):
    """A briefly trained 32px model checkpoint for service/CLI tests."""
    from attredit.networks import compact_config
    from attredit.training import TrainConfig, save_model_checkpoint, train_loop

    out = tmp_path_factory.mktemp("tiny_model")
    config = TrainConfig(max_steps=12, batch_size=4, seed=0, checkpoint_every=0)
    state = train_loop(config, small_synthetic, compact_config(32, 4, base=8),
                       out_dir=out)
    return save_model_checkpoint(state, out / "model.ckpt")
