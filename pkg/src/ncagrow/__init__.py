"""Neural cellular automata that grow organisms from a seed and respond to
genome bits and one-timestep environment signals."""
import os as _os

# NCA_THREADS caps BLAS/OpenMP worker pools; must land before numpy loads
# its backing libraries, hence before any submodule import.
_cap = _os.environ.get("NCA_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        _os.environ.setdefault(_var, _cap)

from .autodiff import (
    GradCheckReport,
    NonFiniteGradientError,
    ParamGrads,
    Tape,
    backward,
    finite_diff_grads,
    forward_recorded,
    grad_check,
    replay_final,
)
from .checkpoint import (
    Checkpoint,
    CheckpointChecksumError,
    CheckpointError,
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointVersionError,
)
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .model import (
    ModelParams,
    RunResult,
    StepConfig,
    StepRecord,
    init_params,
    perceive,
    rollout,
    run,
    step,
)
from .presets import PRESET_NAMES, Preset, get_preset, run_preset, train_config_for
from .rng import SplitMix64, fire_mask_from_seed
from .state import (
    ENV_CHANNEL,
    STATE_CHANNELS,
    CellGrid,
    CircleDamage,
    DamageMask,
    GridConfig,
    RectDamage,
    SignalEvent,
    alive_mask,
    apply_damage,
    dump_channels,
    grid_to_rgba_u8,
    inject_signal,
    load_channel_dump,
    make_seed,
    save_png,
)
from .targets import (
    TargetFamily,
    TargetImage,
    family_from_table,
    glyph,
    load_image,
    single_target_family,
)
from .training import (
    AdamState,
    IterationStats,
    LossValue,
    TrainConfig,
    TrainingDivergedError,
    TrainResult,
    adam_update,
    loss,
    train_growing,
    train_pool,
    train_signal,
    write_loss_csv,
)

__version__ = "0.1.0"
