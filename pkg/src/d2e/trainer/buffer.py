"""Episode replay buffer and chunk sampling.

Episodes are immutable once appended (arrays are copied in); eviction drops
whole episodes oldest-first when the step capacity is exceeded.  Chunks are
contiguous (observation, action, reward) windows that never span episode
boundaries; sampling is uniform over all valid (episode, offset) pairs,
realized as an episode draw weighted by its valid start count followed by a
uniform offset draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyBuffer, NoEligibleEpisode
from ..numerics.rng import RngStream


@dataclass(frozen=True)
class TrajectoryChunk:
    observations: np.ndarray  # (L, obs_dim)
    actions: np.ndarray  # (L, action_dim)
    rewards: np.ndarray  # (L,)
    episode_id: int
    offset: int


class ReplayBuffer:
    def __init__(self, capacity_steps: int = 100_000):
        self.capacity_steps = capacity_steps
        self.episodes: list[dict] = []
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def total_steps(self) -> int:
        return sum(len(e["rewards"]) for e in self.episodes)

    def add_episode(self, observations, actions, rewards) -> int:
        """Store one episode; observations has one trailing entry (T+1)."""
        obs = np.array(observations, dtype=np.float64)
        act = np.array(actions, dtype=np.float64)
        rew = np.array(rewards, dtype=np.float64)
        t = len(rew)
        if act.shape[0] != t or obs.shape[0] != t + 1:
            raise ValueError(
                f"episode arrays misaligned: obs {obs.shape}, act {act.shape}, rew {rew.shape}"
            )
        ep_id = self._next_id
        self._next_id += 1
        self.episodes.append(
            {"id": ep_id, "observations": obs, "actions": act, "rewards": rew}
        )
        while self.total_steps > self.capacity_steps and len(self.episodes) > 1:
            self.episodes.pop(0)
        return ep_id

    def eligible_counts(self, chunk_length: int) -> np.ndarray:
        return np.array(
            [max(len(e["rewards"]) - chunk_length + 1, 0) for e in self.episodes]
        )

    def sample_chunks(self, n: int, chunk_length: int, rng: RngStream) -> list[TrajectoryChunk]:
        if not self.episodes:
            raise EmptyBuffer("no episodes stored")
        counts = self.eligible_counts(chunk_length)
        total = counts.sum()
        if total == 0:
            raise NoEligibleEpisode(
                f"no episode is at least {chunk_length} steps long"
            )
        weights = counts / total
        chunks = []
        # episode choice weighted by valid start positions, then uniform offset
        u = rng.uniform(0.0, 1.0, (n,))
        cdf = np.cumsum(weights)
        chosen = np.searchsorted(cdf, u, side="right").clip(0, len(self.episodes) - 1)
        offsets = rng.integers(0, 10**9, (n,))
        for k in range(n):
            e = self.episodes[int(chosen[k])]
            start = int(offsets[k] % counts[int(chosen[k])])
            sl = slice(start, start + chunk_length)
            chunks.append(
                TrajectoryChunk(
                    observations=e["observations"][sl],
                    actions=e["actions"][sl],
                    rewards=e["rewards"][sl],
                    episode_id=e["id"],
                    offset=start,
                )
            )
        return chunks

    def sample_transitions(self, n: int, rng: RngStream) -> dict:
        """(o, a, r, o') batch across all stored steps, uniform."""
        if not self.episodes:
            raise EmptyBuffer("no episodes stored")
        lengths = np.array([len(e["rewards"]) for e in self.episodes])
        cdf = np.cumsum(lengths / lengths.sum())
        u = rng.uniform(0.0, 1.0, (n,))
        ep = np.searchsorted(cdf, u, side="right").clip(0, len(self.episodes) - 1)
        offs = rng.integers(0, 10**9, (n,))
        obs, act, rew, nxt = [], [], [], []
        for k in range(n):
            e = self.episodes[int(ep[k])]
            t = int(offs[k] % len(e["rewards"]))
            obs.append(e["observations"][t])
            act.append(e["actions"][t])
            rew.append(e["rewards"][t])
            nxt.append(e["observations"][t + 1])
        return {
            "obs": np.stack(obs),
            "action": np.stack(act),
            "reward": np.array(rew),
            "obs_next": np.stack(nxt),
        }

    def sample_history_windows(self, n: int, window: int, rng: RngStream,
                               recent: int | None = None) -> dict:
        """Random aligned (obs, action) histories for imagination seeds.

        ``recent`` restricts sampling to the newest episodes so dreams start
        where the current policy actually operates.
        """
        if not self.episodes:
            raise EmptyBuffer("no episodes stored")
        episodes = self.episodes if recent is None else self.episodes[-recent:]
        counts = np.array(
            [max(len(e["rewards"]) - window + 1, 0) for e in episodes]
        )
        if counts.sum() == 0:
            raise NoEligibleEpisode(f"no episode has {window} steps")
        cdf = np.cumsum(counts / counts.sum())
        u = rng.uniform(0.0, 1.0, (n,))
        ep = np.searchsorted(cdf, u, side="right").clip(0, len(episodes) - 1)
        offs = rng.integers(0, 10**9, (n,))
        obs, act = [], []
        for k in range(n):
            e = episodes[int(ep[k])]
            start = int(offs[k] % counts[int(ep[k])])
            obs.append(e["observations"][start : start + window])
            act.append(e["actions"][start : start + window])
        return {"obs": np.stack(obs), "actions": np.stack(act)}

    # checkpoint support -----------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"meta": np.array([float(len(self.episodes)), float(self._next_id)])}
        for i, e in enumerate(self.episodes):
            out[f"ep{i}/id"] = np.array([float(e["id"])])
            out[f"ep{i}/observations"] = e["observations"]
            out[f"ep{i}/actions"] = e["actions"]
            out[f"ep{i}/rewards"] = e["rewards"]
        return out

    @classmethod
    def from_state_arrays(cls, state: dict[str, np.ndarray], capacity_steps: int):
        buf = cls(capacity_steps)
        n = int(state["meta"][0])
        buf._next_id = int(state["meta"][1])
        for i in range(n):
            buf.episodes.append(
                {
                    "id": int(state[f"ep{i}/id"][0]),
                    "observations": np.array(state[f"ep{i}/observations"]),
                    "actions": np.array(state[f"ep{i}/actions"]),
                    "rewards": np.array(state[f"ep{i}/rewards"]),
                }
            )
        return buf
