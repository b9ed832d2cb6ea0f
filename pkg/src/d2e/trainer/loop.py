"""End-to-end training: seed episodes, joint world-model optimization,
episode collection through the policy, imagination-driven critic updates.

One iteration runs, in order: R world-model gradient steps on sampled
chunks (encoder bound plus dynamics bound on the shared batch, global-norm
clipped, Adam with the configured step size and epsilon), one exploration
episode appended to the buffer, one imagination phase seeding rollouts from
replayed history, and a block of actor-critic steps (policy, Q, V, then the
target-V exponential update) on pooled imagined and replayed transitions.
Everything draws from named counter-based streams, so runs are reproducible
bit-for-bit and checkpoints resume exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .. import igmm as igmm_mod
from ..igmm import IgmmConfig, elbo_igmm, encode
from ..numerics import ops
from ..numerics.rng import RngStream
from ..numerics.tape import Tape
from ..planner import (
    CriticSpec,
    PlannerConfig,
    PolicySpec,
    init_critic_params,
    init_policy_params,
    j_pi,
    j_q,
    j_v,
    policy_sample,
    select_action,
    update_v_target,
)
from ..rgp import RgpConfig, init_rgp_params, rgp_elbo, seed_from_history, imagine_rollout
from ..rgp.structure import posterior_sweep, transition_in_dim, controller_in_dim, reward_in_dim
from .buffer import ReplayBuffer
from .checkpoint import (
    config_hash,
    load_checkpoint,
    pack_rng_state,
    save_checkpoint,
    unpack_rng_state,
)
from .optim import Adam, clip_by_global_norm


@dataclass(frozen=True)
class TrainConfig:
    seed_episodes: int = 100
    updates_per_iteration: int = 100  # R
    batch_chunks: int = 50  # B
    chunk_length: int = 10
    lr: float = 1e-3
    adam_eps: float = 1e-4
    grad_clip: float = 1000.0
    iterations: int = 50
    ac_steps: int = 100
    imagination_batch: int = 64
    ac_minibatch: int = 64
    replay_fraction: float = 0.5
    imagination_recent: int = 20  # seed dreams from the newest episodes
    imagination_start: int = 1  # first iteration that mixes imagined data in
    ac_start: int = 1  # first iteration that runs actor-critic updates
    critic_value_init: bool = True  # bias critics to the empirical return scale
    eval_every: int = 10
    eval_episodes: int = 10
    checkpoint_every: int = 10
    buffer_capacity: int = 100_000
    seed: int = 0

    def __post_init__(self):
        for name in ("seed_episodes", "updates_per_iteration", "batch_chunks",
                     "chunk_length", "iterations", "ac_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


class MetricsWriter:
    """One JSON object per line; deterministic apart from wall_ms."""

    def __init__(self, path: str | None, seed: int):
        self.path = path
        self.seed = seed
        self.rows: list[dict] = []
        if path:
            open(path, "w").close()

    def write(self, iteration: int, phase: str, **fields) -> dict:
        row = {"iteration": iteration, "phase": phase}
        row.update(fields)
        row.setdefault("wall_ms", 0.0)
        row["seed"] = self.seed
        self.rows.append(row)
        if self.path:
            with open(self.path, "a") as f:
                f.write(json.dumps(row, sort_keys=True) + "\n")
        return row


class D2EAgent:
    """Owns parameters, optimizers, streams, and the replay buffer."""

    def __init__(self, env, igmm_config: IgmmConfig, rgp_config: RgpConfig,
                 planner_config: PlannerConfig, train_config: TrainConfig):
        self.env = env
        self.igmm_config = igmm_config
        self.rgp_config = rgp_config
        self.planner_config = planner_config
        self.train_config = train_config

        self.policy_spec = PolicySpec(
            latent_dim=rgp_config.layer_dim,
            action_low=tuple(env.action_low),
            action_high=tuple(env.action_high),
            hidden=planner_config.hidden,
        )
        self.critic_spec = CriticSpec(
            latent_dim=rgp_config.layer_dim,
            action_dim=rgp_config.action_dim,
            hidden=planner_config.hidden,
        )

        root = RngStream(train_config.seed)
        self.streams = {
            name: root.split(name)
            for name in ("init", "env", "collect", "chunks", "world", "imagine", "ac")
        }
        init = self.streams["init"]
        self.params: dict[str, np.ndarray] = {}
        self.params.update(igmm_mod.init_igmm_params(igmm_config, init.split("igmm")))
        self.params.update(init_rgp_params(rgp_config, init.split("rgp")))
        self.params.update(init_policy_params(self.policy_spec, init.split("pi")))
        self.params.update(init_critic_params(self.critic_spec, init.split("critic")))

        self.opt_world = Adam(lr=train_config.lr, eps=train_config.adam_eps)
        self.opt_pi = Adam(lr=planner_config.lr_pi)
        self.opt_q = Adam(lr=planner_config.lr_q)
        self.opt_v = Adam(lr=planner_config.lr_v)

        self.buffer = ReplayBuffer(train_config.buffer_capacity)
        self.iteration = 0
        self.temperature_updates = 0
        self.inducing_initialized = False

    # ------------------------------------------------------------------
    def current_temperature(self) -> float:
        """Assignment-relaxation temperature under the annealing schedule."""
        return self.igmm_config.temperature.at(self.temperature_updates)

    def world_param_names(self) -> list[str]:
        return [k for k in self.params if k.startswith(("igmm/", "rgp/"))]

    def encode_values(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(
            ops.value_of(igmm_mod.encode_mean(self.params, self.igmm_config, obs))
        )

    def config_text(self) -> str:
        # structural identity only: run-length knobs (iterations, cadences)
        # may differ between the saving and the resuming run
        return "|".join(
            repr(c) for c in (self.igmm_config, self.rgp_config, self.planner_config)
        ) + f"|seed={self.train_config.seed}"


def collect_episode(agent: D2EAgent, action_source: str, rng: RngStream) -> dict:
    """Roll one full episode and append it to the buffer."""
    env = agent.env
    obs = env.reset(rng.split(f"reset{agent.buffer._next_id}"))
    observations = [obs]
    actions, rewards = [], []
    done = False
    while not done:
        if action_source == "random":
            a = rng.uniform(0.0, 1.0, (env.action_dim,))
            lo = np.asarray(env.action_low)
            hi = np.asarray(env.action_high)
            a = lo + (hi - lo) * a
        elif action_source == "planner":
            a = select_action(obs, agent.params, agent.igmm_config, agent.policy_spec,
                              agent.params, "explore", rng)
        else:
            raise ValueError(f"unknown action source {action_source!r}")
        out = env.step(a)
        obs = out["observation"]
        observations.append(obs)
        actions.append(np.asarray(a, dtype=np.float64).reshape(env.action_dim))
        rewards.append(out["reward"])
        done = out["done"]
    agent.buffer.add_episode(np.stack(observations), np.stack(actions), np.array(rewards))
    return {
        "length": len(rewards),
        "return": float(np.sum(rewards)),
        "observations": np.stack(observations),
    }


def init_inducing_from_buffer(agent: D2EAgent) -> None:
    """Move inducing inputs onto the scale of real assembled inputs."""
    tc = agent.train_config
    rc = agent.rgp_config
    rng = agent.streams["init"].split("inducing")
    chunks = agent.buffer.sample_chunks(
        min(8, max(1, len(agent.buffer))), tc.chunk_length, rng
    )
    obs = np.stack([c.observations for c in chunks])
    acts = np.stack([c.actions for c in chunks])
    b, n = obs.shape[:2]
    exo = agent.encode_values(obs.reshape(b * n, -1)).reshape(b, n, -1)
    exo_steps = [exo[:, i] for i in range(n)]
    act_steps = [acts[:, i] for i in range(n)]
    means, _ = posterior_sweep(agent.params, rc, exo_steps, act_steps)
    mean_vals = [[np.asarray(ops.value_of(m)) for m in layer] for layer in means]

    def rows_for(kind: str, h: int) -> np.ndarray:
        rows = []
        for i in range(rc.lag, n):
            if kind == "transition":
                parts = [mean_vals[h - 1][i - k] for k in range(1, rc.lag + 1)]
                if h == 1:
                    parts += [exo[:, i - k] for k in range(1, rc.exo_lag + 1)]
                else:
                    parts += [mean_vals[h - 2][i - k] for k in range(0, rc.lag)]
                    parts += [acts[:, i - k] for k in range(1, rc.action_lag + 1)]
            elif kind == "controller":
                parts = [mean_vals[h - 1][i - k] for k in range(1, rc.short_lag + 1)]
            else:
                parts = [mean_vals[rc.horizon - 1][i - k] for k in range(1, rc.short_lag + 1)]
                parts += [acts[:, i - k] for k in range(1, rc.action_lag + 1)]
            rows.append(np.concatenate(parts, axis=-1))
        return np.concatenate(rows, axis=0)

    def assign(prefix: str, rows: np.ndarray) -> None:
        idx = rng.integers(0, rows.shape[0], (rc.n_inducing,))
        base = rows[np.asarray(idx)]
        agent.params[f"{prefix}/z"] = base + 0.01 * rng.normal(base.shape)

    for h in range(1, rc.horizon + 1):
        assign(f"rgp/trans{h}", rows_for("transition", h))
        assign(f"rgp/ctrl{h}", rows_for("controller", h))
    assign("rgp/reward", rows_for("reward", 0))
    agent.inducing_initialized = True


def world_model_update(agent: D2EAgent, writer: MetricsWriter | None = None) -> dict:
    """R optimization steps of the joint encoder + dynamics bound."""
    tc = agent.train_config
    rng = agent.streams["world"]
    chunk_rng = agent.streams["chunks"]
    names = agent.world_param_names()
    last = {}
    for step in range(tc.updates_per_iteration):
        t0 = time.perf_counter()
        chunks = agent.buffer.sample_chunks(tc.batch_chunks, tc.chunk_length, chunk_rng)
        obs = np.stack([c.observations for c in chunks])
        acts = np.stack([c.actions for c in chunks])
        rews = np.stack([c.rewards for c in chunks])
        b, n = obs.shape[:2]
        flat_obs = obs.reshape(b * n, -1)
        scale = agent.buffer.total_steps / float(b * n)

        tape = Tape()
        pvars = dict(agent.params)
        pvars.update(tape.register({k: agent.params[k] for k in names}))
        heads = encode(pvars, agent.igmm_config, flat_obs)
        loss_igmm = elbo_igmm(flat_obs, pvars, agent.igmm_config, rng, heads=heads)
        exo = ops.reshape(heads["z_mean"], (b, n, -1))
        loss_rgp = rgp_elbo(pvars, agent.rgp_config, exo, acts, rews, scale=scale)
        loss = ops.add(loss_igmm, loss_rgp)
        grads = tape.grad(loss)
        grads, norm, clipped = clip_by_global_norm(grads, tc.grad_clip)
        agent.opt_world.step(agent.params, grads)
        agent.temperature_updates += 1
        last = {
            "loss": float(ops.value_of(loss)),
            "loss_igmm": float(ops.value_of(loss_igmm)),
            "loss_rgp": float(ops.value_of(loss_rgp)),
            "grad_norm": norm,
            "clipped": bool(clipped),
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        }
    if writer is not None:
        writer.write(agent.iteration, "world_model", **last)
    return last


def _imagination_pool(agent: D2EAgent) -> dict:
    """Imagined transitions from replayed seed histories, pooled flat."""
    tc = agent.train_config
    rc = agent.rgp_config
    rng = agent.streams["imagine"]
    window = max(rc.lag, rc.exo_lag, rc.action_lag) + 1
    seeds = agent.buffer.sample_history_windows(tc.imagination_batch, window, rng,
                                                recent=tc.imagination_recent)
    b, t = seeds["obs"].shape[:2]
    exo_hist = agent.encode_values(seeds["obs"].reshape(b * t, -1)).reshape(b, t, -1)
    seed_win = seed_from_history(agent.params, rc, exo_hist, seeds["actions"])

    def policy_source(state_mean, source_rng):
        a, _ = policy_sample(agent.policy_spec, agent.params, state_mean, source_rng)
        return np.asarray(ops.value_of(a))

    records = imagine_rollout(agent.params, rc, seed_win, policy_source,
                              rc.horizon, rng)
    pool = {
        "z": np.concatenate([r["z_mean"] for r in records]),
        "action": np.concatenate([r["action"] for r in records]),
        "reward": np.concatenate([r["r_mean"] for r in records]),
        "z_next_mean": np.concatenate([r["z_next_mean"] for r in records]),
        "z_next_var": np.concatenate([r["z_next_var"] for r in records]),
        "dyn_log_ratio": np.concatenate([r["dyn_log_ratio"] for r in records]),
    }
    return pool


def _replay_pool(agent: D2EAgent, n: int) -> dict:
    batch = agent.buffer.sample_transitions(n, agent.streams["ac"])
    z = agent.encode_values(batch["obs"])
    z_next = agent.encode_values(batch["obs_next"])
    return {
        "z": z,
        "action": batch["action"],
        "reward": batch["reward"],
        "z_next_mean": z_next,
        "z_next_var": np.zeros_like(z_next),
        "dyn_log_ratio": np.zeros(len(z)),
    }


def _take(pool: dict, idx: np.ndarray) -> dict:
    return {k: v[idx] for k, v in pool.items()}


def actor_critic_update(agent: D2EAgent, batch: dict) -> dict:
    """One gradient step each for the policy, Q, and V losses, then the
    target-V exponential update."""
    params = agent.params
    pc = agent.planner_config
    rng = agent.streams["ac"]
    metrics = {}

    tape = Tape()
    pvars = dict(params)
    pi_names = [k for k in params if k.startswith("planner/pi/")]
    pvars.update(tape.register({k: params[k] for k in pi_names}))
    loss_pi = j_pi(batch, agent.policy_spec, agent.critic_spec, pvars, rng)
    grads = tape.grad(loss_pi)
    agent.opt_pi.step(params, {k: grads[k] for k in pi_names})
    metrics["loss_pi"] = float(ops.value_of(loss_pi))

    tape = Tape()
    pvars = dict(params)
    q_names = [k for k in params if k.startswith("planner/q/")]
    pvars.update(tape.register({k: params[k] for k in q_names}))
    loss_q = j_q(batch, agent.critic_spec, pvars, pc, rng)
    grads = tape.grad(loss_q)
    agent.opt_q.step(params, {k: grads[k] for k in q_names})
    metrics["loss_q"] = float(ops.value_of(loss_q))

    tape = Tape()
    pvars = dict(params)
    v_names = [k for k in params if k.startswith("planner/v/")]
    pvars.update(tape.register({k: params[k] for k in v_names}))
    loss_v = j_v(batch, agent.policy_spec, agent.critic_spec, pvars, pc, rng)
    grads = tape.grad(loss_v)
    agent.opt_v.step(params, {k: grads[k] for k in v_names})
    metrics["loss_v"] = float(ops.value_of(loss_v))

    update_v_target(params, pc.target_rate)
    return metrics


def evaluate(agent: D2EAgent, n_episodes: int, label: str) -> dict:
    """Seeded exploit-mode rollouts; returns mean/sd of episode returns."""
    returns = []
    for k in range(n_episodes):
        rng = RngStream(agent.train_config.seed).split(f"eval/{label}/{k}")
        obs = agent.env.reset(rng)
        total, done = 0.0, False
        while not done:
            a = select_action(obs, agent.params, agent.igmm_config, agent.policy_spec,
                              agent.params, "exploit", rng)
            out = agent.env.step(a)
            obs = out["observation"]
            total += out["reward"]
            done = out["done"]
        returns.append(total)
    return {
        "eval_return": float(np.mean(returns)),
        "eval_sd": float(np.std(returns)),
        "episodes": n_episodes,
    }


def random_baseline(agent: D2EAgent, n_episodes: int) -> float:
    """Mean return of uniform-random actions on seeded episodes."""
    env = agent.env
    returns = []
    for k in range(n_episodes):
        rng = RngStream(agent.train_config.seed).split(f"baseline/{k}")
        env.reset(rng)
        total, done = 0.0, False
        while not done:
            u = rng.uniform(0.0, 1.0, (env.action_dim,))
            lo, hi = np.asarray(env.action_low), np.asarray(env.action_high)
            out = env.step(lo + (hi - lo) * u)
            total += out["reward"]
            done = out["done"]
        returns.append(total)
    return float(np.mean(returns))


def run_d2e(agent: D2EAgent, metrics_path: str | None = None,
            checkpoint_path: str | None = None) -> dict:
    """Full training: seed episodes, then iterate the three phases."""
    tc = agent.train_config
    writer = MetricsWriter(metrics_path, tc.seed)

    if agent.iteration == 0 and len(agent.buffer) == 0:
        for _ in range(tc.seed_episodes):
            ep = collect_episode(agent, "random", agent.streams["collect"])
            writer.write(0, "seed_episode", ep_return=ep["return"], length=ep["length"])
        if tc.critic_value_init:
            # start the value heads at the empirical return scale; Adam-sized
            # steps take thousands of updates to ramp a bias from zero
            mean_r = float(np.mean([e["rewards"].mean() for e in agent.buffer.episodes]))
            scale = agent.planner_config.temperature * mean_r / (1.0 - agent.planner_config.discount)
            n_out = len(agent.critic_spec.q_mlp.sizes) - 2
            for head in ("q", "v", "v_target"):
                agent.params[f"planner/{head}/b{n_out}"][:] = scale
    if not agent.inducing_initialized:
        init_inducing_from_buffer(agent)

    while agent.iteration < tc.iterations:
        agent.iteration += 1
        it = agent.iteration

        wm = world_model_update(agent, writer)

        t0 = time.perf_counter()
        ep = collect_episode(agent, "planner", agent.streams["collect"])
        writer.write(it, "collect", ep_return=ep["return"], length=ep["length"],
                     wall_ms=(time.perf_counter() - t0) * 1e3)

        t0 = time.perf_counter()
        if it < tc.ac_start:
            writer.write(it, "actor_critic", skipped=True,
                         wall_ms=(time.perf_counter() - t0) * 1e3)
            if tc.eval_every and it % tc.eval_every == 0:
                ev = evaluate(agent, tc.eval_episodes, label=str(it))
                writer.write(it, "eval", **ev)
            if checkpoint_path and tc.checkpoint_every and it % tc.checkpoint_every == 0:
                save_agent(agent, checkpoint_path)
            continue
        imagined = _imagination_pool(agent) if it >= tc.imagination_start else None
        n_replay = int(round(tc.replay_fraction * tc.ac_minibatch))
        n_imagined = tc.ac_minibatch - n_replay if imagined is not None else 0
        ac = {}
        for _ in range(tc.ac_steps):
            # each step sees a fresh replay slice plus imagined-pool rows
            parts = []
            if n_imagined > 0:
                idx = np.asarray(
                    agent.streams["ac"].integers(0, len(imagined["z"]), (n_imagined,))
                )
                parts.append(_take(imagined, idx))
            parts.append(_replay_pool(agent, tc.ac_minibatch - n_imagined))
            batch = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
            ac = actor_critic_update(agent, batch)
        ac["wall_ms"] = (time.perf_counter() - t0) * 1e3
        ac["imagined_rows"] = n_imagined
        writer.write(it, "actor_critic", **ac)

        if tc.eval_every and it % tc.eval_every == 0:
            ev = evaluate(agent, tc.eval_episodes, label=str(it))
            writer.write(it, "eval", **ev)
        if checkpoint_path and tc.checkpoint_every and it % tc.checkpoint_every == 0:
            save_agent(agent, checkpoint_path)

    final = evaluate(agent, tc.eval_episodes, label="final")
    writer.write(agent.iteration, "eval_final", **final)
    if checkpoint_path:
        save_agent(agent, checkpoint_path)
    return {
        "iterations": agent.iteration,
        "final_eval": final,
        "world_model_last": wm if tc.iterations else {},
        "metrics_rows": writer.rows,
    }


# ---------------------------------------------------------------------------
# checkpointing


def save_agent(agent: D2EAgent, path: str) -> None:
    arrays: dict[str, np.ndarray] = {}
    for k, v in agent.params.items():
        arrays[f"params/{k}"] = v
    for tag, opt in (("world", agent.opt_world), ("pi", agent.opt_pi),
                     ("q", agent.opt_q), ("v", agent.opt_v)):
        for k, v in opt.state_arrays().items():
            arrays[f"opt/{tag}/{k}"] = v
    for name, stream in agent.streams.items():
        arrays[f"rng/{name}"] = pack_rng_state(stream.get_state())
    for k, v in agent.buffer.state_arrays().items():
        arrays[f"buffer/{k}"] = v
    arrays["misc/counters"] = np.array(
        [float(agent.iteration), float(agent.temperature_updates),
         float(agent.inducing_initialized)]
    )
    save_checkpoint(path, arrays, config_hash(agent.config_text()))


def load_agent(agent: D2EAgent, path: str) -> D2EAgent:
    """Restore state into a freshly constructed agent (same configs)."""
    from ..errors import VersionMismatch

    arrays, cfg_hash = load_checkpoint(path)
    if cfg_hash != config_hash(agent.config_text()):
        raise VersionMismatch("checkpoint was written by a different configuration")
    return _restore(agent, arrays)


def _restore(agent: D2EAgent, arrays: dict[str, np.ndarray]) -> D2EAgent:
    for k in list(agent.params):
        agent.params[k] = np.array(arrays[f"params/{k}"])
    for tag, opt in (("world", agent.opt_world), ("pi", agent.opt_pi),
                     ("q", agent.opt_q), ("v", agent.opt_v)):
        state = {
            k[len(f"opt/{tag}/"):]: v
            for k, v in arrays.items()
            if k.startswith(f"opt/{tag}/")
        }
        opt.load_state_arrays(state)
    for name in agent.streams:
        agent.streams[name] = RngStream.from_state(
            unpack_rng_state(arrays[f"rng/{name}"])
        )
    buf_state = {
        k[len("buffer/"):]: v for k, v in arrays.items() if k.startswith("buffer/")
    }
    agent.buffer = ReplayBuffer.from_state_arrays(
        buf_state, agent.train_config.buffer_capacity
    )
    counters = arrays["misc/counters"]
    agent.iteration = int(counters[0])
    agent.temperature_updates = int(counters[1])
    agent.inducing_initialized = bool(counters[2])
    return agent
