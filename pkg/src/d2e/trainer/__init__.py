"""Training loop, replay buffer, optimizer, checkpointing."""

from .buffer import ReplayBuffer, TrajectoryChunk
from .checkpoint import (
    config_hash,
    load_checkpoint,
    pack_rng_state,
    save_checkpoint,
    unpack_rng_state,
)
from .loop import (
    D2EAgent,
    MetricsWriter,
    TrainConfig,
    actor_critic_update,
    collect_episode,
    evaluate,
    init_inducing_from_buffer,
    load_agent,
    random_baseline,
    run_d2e,
    save_agent,
    world_model_update,
)
from .optim import Adam, clip_by_global_norm, global_norm
from .sysid import fit_sysid

__all__ = [
    "ReplayBuffer",
    "TrajectoryChunk",
    "TrainConfig",
    "D2EAgent",
    "MetricsWriter",
    "Adam",
    "clip_by_global_norm",
    "global_norm",
    "collect_episode",
    "world_model_update",
    "actor_critic_update",
    "init_inducing_from_buffer",
    "evaluate",
    "random_baseline",
    "run_d2e",
    "save_agent",
    "load_agent",
    "save_checkpoint",
    "load_checkpoint",
    "config_hash",
    "pack_rng_state",
    "unpack_rng_state",
    "fit_sysid",
]
