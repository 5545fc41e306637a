from .config import TrainConfig, lr_at_iteration, VARIANTS
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError, find_latest_checkpoint
from .loop import TrainState, TrainingAborted, init_state, train_step, fit, param_hash

__all__ = [
    "TrainConfig", "lr_at_iteration", "VARIANTS",
    "save_checkpoint", "load_checkpoint", "CheckpointError", "find_latest_checkpoint",
    "TrainState", "TrainingAborted", "init_state", "train_step", "fit", "param_hash",
]
