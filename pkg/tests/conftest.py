"""Session-scoped training fixtures shared by the acceptance suite.

Training the desk-scale model families dominates suite runtime, so every
family is trained exactly once per session and reused across criteria.
"""

from dataclasses import replace

import numpy as np
import pytest

from control_studio.corpus import generate_corpus
from control_studio.models import ModelConfig
from control_studio.training import TrainSchedule, train

DESK_SEED = 7


@pytest.fixture(scope="session")
def desk_corpus():
    return generate_corpus(DESK_SEED)


@pytest.fixture(scope="session")
def desk_config(desk_corpus):
    """Config for the control-quality checkpoints; per-dimension attention
    scores carry clearly more control information at desk scale."""
    cfg = ModelConfig.build("micvae", desk_corpus.phone_vocab(),
                            len(desk_corpus.speaker_ids()),
                            len(desk_corpus.style_ids()))
    return replace(cfg, per_dim_scores=True)


@pytest.fixture(scope="session")
def trained_micvae(desk_corpus, desk_config):
    """Subset-policy checkpoint used by the control-quality criteria."""
    return train(desk_corpus, desk_config,
                 TrainSchedule(epochs=90, seed=1, lr=2.5e-3, lr_end_factor=0.04,
                               beta=0.002))


@pytest.fixture(scope="session")
def trained_nocontrol(desk_corpus, desk_config):
    return train(desk_corpus, desk_config.with_family("nocontrol"),
                 TrainSchedule(epochs=30, seed=2, lr=2e-3, lr_end_factor=0.1))


@pytest.fixture(scope="session")
def trained_masked(desk_corpus, desk_config):
    """The three masking regimes, labelled by % of values DRIVEN in training."""
    out = {}
    for label, masked_out in (("masked-0", 100.0), ("masked-50", 50.0), ("masked-100", 0.0)):
        out[label] = train(
            desk_corpus, desk_config.with_family("masked"),
            TrainSchedule(epochs=45, seed=3, lr=2e-3, lr_end_factor=0.1, beta=0.003,
                          mask_percent=masked_out))
    return out
