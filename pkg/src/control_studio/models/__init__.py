from .config import (
    ModelConfig,
    ConfigError,
    FAMILIES,
    mi_encoder_param_count,
    masked_encoder_param_count,
    parity_rnn_width,
)
from .mi_encoder import LatentGaussian, MiEncoder, positional_encoding
from .content import ContentStack
from .decoder import PafDecoder
from .masked import MaskedEncoder, ParityError, build_masked_input, sample_training_mask
from .families import Micvae, MaskedCvae, NoControl, ProsodyModel, ModelError, build_model
