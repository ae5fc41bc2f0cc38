from .objective import (
    ElboTerms,
    reparameterize,
    kl_divergence,
    elbo_loss,
    reparameterize_nodes,
    kl_nodes,
    elbo_nodes,
)
from .loop import TrainSchedule, train
from .checkpoint import (
    TrainedBundle,
    CheckpointError,
    save_checkpoint,
    load_checkpoint,
    inspect_checkpoint,
    read_checkpoint_blobs,
)
