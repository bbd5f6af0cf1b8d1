"""Reward assignment, discounted returns, baseline-subtracted rescaled
advantages, and the REINFORCE gradient terms for the termination policy.

All rewards are terminal: every non-final decision step earns exactly 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .heads import ANGRY, NEUTRAL, TERMINATE, WAIT  # noqa: F401 (re-exported)


@dataclass
class RewardConfig:
    # Accuracy reward grid keyed on (decision, truth). The names keep the
    # conventional grid labels: note (decision neutral, truth angry) is the
    # cell named r_fp and (decision angry, truth neutral) is r_fn here.
    r_tp: float = 1.0
    r_fp: float = -1.0
    r_tn: float = 1.0
    r_fn: float = -1.0
    r_no_decision: float = -1.0
    gamma: float = 0.99
    latency_on_forced: bool = True  # grant the latency bonus on forced cutoffs

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")


def accuracy_reward(decision, truth, terminated_by_policy, cfg):
    """Terminal accuracy component; r_no_decision when the policy never fired."""
    if not terminated_by_policy:
        return cfg.r_no_decision
    if truth == ANGRY:
        return cfg.r_tp if decision == ANGRY else cfg.r_fp
    return cfg.r_tn if decision == NEUTRAL else cfg.r_fn


def latency_reward(step_index):
    """1 / (t + 1) where t is the 0-based decision-step index of termination."""
    if step_index < 0:
        raise ConfigError("step index must be >= 0")
    return 1.0 / (step_index + 1.0)


def terminal_reward(decision, truth, terminated_by_policy, step_index, cfg):
    """Accuracy plus latency component of the episode's single nonzero reward."""
    r = accuracy_reward(decision, truth, terminated_by_policy, cfg)
    if terminated_by_policy or cfg.latency_on_forced:
        r += latency_reward(step_index)
    return r


def returns(rewards, gamma):
    """Discounted suffix sums R_t = sum_{t'>=t} gamma^(t'-t) r_t'."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


class AdvantageNormalizer:
    """Exponential moving mean/variance of baseline-subtracted returns.

    Each value first updates the statistics, then is rescaled with them;
    with decay d the output magnitude is bounded by 1/sqrt(1-d).
    """

    def __init__(self, decay=0.9, eps=1e-8):
        if not 0.0 <= decay < 1.0:
            raise ConfigError("decay must lie in [0, 1)")
        self.decay = float(decay)
        self.eps = float(eps)
        self.mean = 0.0
        self.var = 0.0

    def update_and_normalize(self, x):
        x = float(x)
        self.mean = self.decay * self.mean + (1.0 - self.decay) * x
        d = x - self.mean
        self.var = self.decay * self.var + (1.0 - self.decay) * d * d
        return d / np.sqrt(self.var + self.eps)

    def state(self):
        return {"decay": self.decay, "eps": self.eps,
                "mean": self.mean, "var": self.var}

    @classmethod
    def from_state(cls, state):
        n = cls(decay=state["decay"], eps=state["eps"])
        n.mean = float(state["mean"])
        n.var = float(state["var"])
        return n


def advantages(step_returns, baselines, normalizer):
    """Rescaled advantages (R_t - b_t - mean)/sqrt(var + eps), updating the
    running statistics value by value in step order."""
    step_returns = np.asarray(step_returns, dtype=np.float64)
    baselines = np.asarray(baselines, dtype=np.float64)
    if step_returns.shape != baselines.shape:
        raise ConfigError("returns and baselines differ in length")
    out = np.empty_like(step_returns)
    for t in range(step_returns.shape[0]):
        out[t] = normalizer.update_and_normalize(step_returns[t] - baselines[t])
    return out


@dataclass
class EpisodeStep:
    """One decision point: the state snapshot plus what happened there.

    action/log_prob are None on a forced terminal step (the policy was not
    queried); baseline values are plain floats, detached by construction.
    """
    frame: int
    state: np.ndarray
    action: int | None
    log_prob: float | None
    baseline: float
    reward: float = 0.0


@dataclass
class EpisodeTrace:
    steps: list
    terminated_by_policy: bool
    decision: int
    truth: int
    term_frame: int
    n_frames: int
    d_prob: float

    def __post_init__(self):
        terms = [i for i, st in enumerate(self.steps) if st.action == TERMINATE]
        if terms and (len(terms) > 1 or terms[0] != len(self.steps) - 1):
            raise ConfigError("terminate may only appear once, at the last step")

    def action_steps(self):
        return [st for st in self.steps if st.action is not None]

    def rewards(self):
        return np.array([st.reward for st in self.steps])

    def baselines(self):
        return np.array([st.baseline for st in self.steps])


@dataclass
class PolicyGradients:
    """Ascent-direction sums of grad log pi(a_t|S_t) * advantage_t."""
    gW: np.ndarray          # (2, H)
    gb: np.ndarray          # (2,)
    dS: np.ndarray          # (K, H), per action step


def policy_gradient_terms(S_rows, actions, advs, policy):
    """REINFORCE terms over the episode's action steps (ascent direction).

    The trainer subtracts these from the gradient buffers, realizing the
    -J_a part of the total loss.
    """
    S_rows = np.atleast_2d(np.asarray(S_rows, dtype=np.float64))
    K = S_rows.shape[0]
    actions = np.asarray(actions, dtype=np.int64)
    advs = np.asarray(advs, dtype=np.float64)
    if actions.shape[0] != K or advs.shape[0] != K:
        raise ConfigError("steps, actions and advantages differ in length")
    W, b = policy.W.value, policy.b.value
    logits = S_rows @ W.T + b
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    glogits = -probs
    glogits[np.arange(K), actions] += 1.0
    glogits *= advs[:, None]
    return PolicyGradients(gW=glogits.T @ S_rows,
                           gb=glogits.sum(axis=0),
                           dS=glogits @ W)


def policy_gradient_accumulate(S_rows, actions, advs, policy):
    """Accumulate the ascent terms into the policy head's gradient buffers;
    returns the per-step encoder-state gradients."""
    g = policy_gradient_terms(S_rows, actions, advs, policy)
    policy.W.add_grad(g.gW)
    policy.b.add_grad(g.gb)
    return g.dS


def baseline_loss(step_returns, baselines, S_rows, baseline):
    """Sum of squared regression errors and its gradients for the baseline
    head only; nothing flows toward the encoder or policy."""
    step_returns = np.asarray(step_returns, dtype=np.float64)
    baselines = np.asarray(baselines, dtype=np.float64)
    if step_returns.shape != baselines.shape:
        raise ConfigError("returns and baselines differ in length")
    S_rows = np.atleast_2d(np.asarray(S_rows, dtype=np.float64))
    resid = step_returns - baselines
    loss = float(resid @ resid)
    gb_per_step = -2.0 * resid
    baseline.W.add_grad(gb_per_step @ S_rows)
    baseline.b.add_grad(np.array([gb_per_step.sum()]))
    return loss
