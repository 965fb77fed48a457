"""End-to-end trajectory predictor.

Composes the track encoder, the social graph module, and the latent
predictor into a decoder initial state, then autoregressively rolls out
future relative displacements and integrates them from each pedestrian's
last observed position. Every component can be ablated; disabled parts
still exist as parameters (so checkpoints stay shape-compatible across
configurations) but contribute zeros / pure noise.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import torch
import torch.nn as nn

from .data import SceneWindow, kinematics
from .encoder import TrackEncoder, displacements
from .latent import CHANNELS, LatentPredictor, LatentSpec, sample_latent
from .social import SocialGraph

SOCIAL_MODES = ("none", "hard", "soft")


@dataclass(frozen=True)
class AblationConfig:
    """Component toggles: temporal attention, graph attention, social gate
    (none/hard/soft), and the latent predictor."""

    use_temporal_attention: bool = True
    use_graph_attention: bool = True
    social_mode: str = "soft"
    use_latent_predictor: bool = True

    def __post_init__(self):
        if self.social_mode not in SOCIAL_MODES:
            raise ValueError(f"social_mode must be one of {SOCIAL_MODES}, got {self.social_mode!r}")
        if self.social_mode != "none" and not self.use_graph_attention:
            raise ValueError("a social gate requires graph attention (it gates the graph aggregation)")

    def to_dict(self):
        return {
            "use_temporal_attention": self.use_temporal_attention,
            "use_graph_attention": self.use_graph_attention,
            "social_mode": self.social_mode,
            "use_latent_predictor": self.use_latent_predictor,
        }


@dataclass(frozen=True)
class ModelDims:
    hidden_dim: int = 32
    embed_dim: int = 16
    latent_hidden_dim: int = 32
    latent_embed_dim: int = 16
    latent_channel_dim: int = 4
    noise_dim: int = 4

    @property
    def latent_dim(self):
        return len(CHANNELS) * self.latent_channel_dim + self.noise_dim

    def to_dict(self):
        return {
            "hidden_dim": self.hidden_dim,
            "embed_dim": self.embed_dim,
            "latent_hidden_dim": self.latent_hidden_dim,
            "latent_embed_dim": self.latent_embed_dim,
            "latent_channel_dim": self.latent_channel_dim,
            "noise_dim": self.noise_dim,
        }


class ForwardResult(NamedTuple):
    pred_abs: torch.Tensor  # (samples, n, t_pred, 2) absolute positions
    latent_spec: Optional[LatentSpec]


class Decoder(nn.Module):
    """Vanilla LSTM decoder over embedded displacements.

    The initial hidden and cell states are a linear projection of
    [summary, social context, latent]; the first input is the last observed
    displacement, afterwards the previously predicted one.
    """

    def __init__(self, hidden_dim=32, embed_dim=16, latent_dim=16):
        super().__init__()
        self.init_proj = nn.Linear(2 * hidden_dim + latent_dim, hidden_dim)
        self.in_embed = nn.Linear(2, embed_dim)
        self.cell = nn.LSTMCell(embed_dim, hidden_dim)
        self.out_proj = nn.Linear(hidden_dim, 2)

    def init_state(self, summary, social, z):
        return self.init_proj(torch.cat([summary, social, z], dim=-1))

    def rollout(self, state, last_disp, t_pred):
        """Autoregressive displacements (n, t_pred, 2) from the initial state."""
        if t_pred < 1:
            raise ValueError(f"t_pred must be >= 1, got {t_pred}")
        h = state
        c = state
        inp = last_disp
        steps = []
        for _ in range(t_pred):
            h, c = self.cell(self.in_embed(inp), (h, c))
            inp = self.out_proj(h)
            steps.append(inp)
        return torch.stack(steps, dim=1)


class TrajectoryPredictor(nn.Module):
    def __init__(self, dims: ModelDims = ModelDims(), ablation: AblationConfig = AblationConfig(),
                 social_per_step=False):
        super().__init__()
        self.dims = dims
        self.ablation = ablation
        self.encoder = TrackEncoder(dims.embed_dim, dims.hidden_dim,
                                    use_attention=ablation.use_temporal_attention)
        self.social = SocialGraph(dims.hidden_dim, mode=ablation.social_mode, per_step=social_per_step)
        self.latent = LatentPredictor(dims.latent_embed_dim, dims.latent_hidden_dim,
                                      dims.latent_channel_dim, dims.noise_dim)
        self.decoder = Decoder(dims.hidden_dim, dims.embed_dim, dims.latent_dim)

    def parameter_groups(self):
        """(main, latent-predictor) parameter lists for the two-rate optimizer."""
        latent_params = list(self.latent.parameters())
        latent_ids = {id(p) for p in latent_params}
        main_params = [p for p in self.parameters() if id(p) not in latent_ids]
        return main_params, latent_params

    def latent_branches(self, obs_abs, fut_abs, dt):
        """(obs_branch, gt_branch) lists of (mu, sigma); None when unavailable.

        Channel sequences are the finite-difference kinematics with positions
        re-anchored at each pedestrian's last observed position, which keeps
        the whole model translation-equivariant.
        """
        if not self.ablation.use_latent_predictor:
            return None, None
        anchor = obs_abs[:, -1:]
        obs_channels = _channel_dict(obs_abs, anchor, dt)
        obs_branch = self.latent.branch(obs_channels, "obs")
        gt_branch = None
        if fut_abs is not None:
            gt_channels = _channel_dict(fut_abs, anchor, dt)
            gt_branch = self.latent.branch(gt_channels, "gt")
        return obs_branch, gt_branch

    def forward(self, obs_abs, dt, stage="test", generator=None, n_samples=1,
                fut_abs=None, t_pred=12) -> ForwardResult:
        """Predict absolute future positions for one scene.

        obs_abs: (n, t_obs, 2) absolute positions; fut_abs (n, t_pred, 2) is
        required in the training stage when the latent predictor is active.
        Draws all randomness from `generator`; sample j of a call is
        identical to sample j of any call with more samples (nested draws).
        """
        if generator is None:
            generator = torch.Generator()
        n = obs_abs.shape[0]
        disp = displacements(obs_abs)
        hidden_seq = self.encoder.encode(disp)
        if self.ablation.use_temporal_attention:
            _, summary = self.encoder.attend(hidden_seq)
        else:
            summary = hidden_seq[:, -1]

        if self.ablation.use_graph_attention:
            social = self.social(hidden_seq, obs_abs, dt).g_final
        else:
            social = torch.zeros(n, self.dims.hidden_dim, dtype=obs_abs.dtype)

        obs_branch, gt_branch = self.latent_branches(obs_abs, fut_abs, dt)
        spec = None
        if self.ablation.use_latent_predictor:
            spec = LatentSpec(obs_branch=obs_branch, gt_branch=gt_branch, noise_dim=self.dims.noise_dim)

        zs = []
        for _ in range(n_samples):
            if self.ablation.use_latent_predictor:
                zs.append(sample_latent(spec, stage, generator))
            else:
                zs.append(torch.randn((n, self.dims.latent_dim), generator=generator, dtype=obs_abs.dtype))
        z = torch.stack(zs)  # (v, n, latent)

        v = n_samples
        summary_v = summary.unsqueeze(0).expand(v, -1, -1).reshape(v * n, -1)
        social_v = social.unsqueeze(0).expand(v, -1, -1).reshape(v * n, -1)
        state = self.decoder.init_state(summary_v, social_v, z.reshape(v * n, -1))
        last_disp = disp[:, -1].unsqueeze(0).expand(v, -1, -1).reshape(v * n, 2)
        pred_disp = self.decoder.rollout(state, last_disp, t_pred).reshape(v, n, t_pred, 2)
        pred_abs = obs_abs[:, -1:].unsqueeze(0) + torch.cumsum(pred_disp, dim=2)
        return ForwardResult(pred_abs=pred_abs, latent_spec=spec)


def _channel_dict(positions, anchor, dt):
    vel = _diff_padded(positions, dt)
    acc = _diff_padded(vel, dt)
    return {"positions": positions - anchor, "velocities": vel, "accelerations": acc}


def _diff_padded(seq, dt):
    if seq.shape[1] < 2:
        return torch.zeros_like(seq)
    d = (seq[:, 1:] - seq[:, :-1]) / dt
    return torch.cat([d[:, :1], d], dim=1)


def reset_parameters_(model: nn.Module, generator: torch.Generator):
    """Re-initialize every parameter from an explicit generator.

    Vectors and matrices get uniform(-1/sqrt(fan), 1/sqrt(fan)) with fan the
    trailing dimension; scalars (the social 1x1 conv) keep their
    deterministic init. Removes any dependence on the global RNG state.
    """
    for param in model.parameters():
        if param.dim() == 0:
            continue
        fan = param.shape[-1] if param.dim() > 1 else param.shape[0]
        bound = 1.0 / math.sqrt(max(1, fan))
        with torch.no_grad():
            param.uniform_(-bound, bound, generator=generator)
    return model


def build_model(dims=ModelDims(), ablation=AblationConfig(), seed=0, social_per_step=False,
                dtype=torch.float32):
    model = TrajectoryPredictor(dims, ablation, social_per_step=social_per_step).to(dtype)
    gen = torch.Generator().manual_seed(seed)
    reset_parameters_(model, gen)
    return model


def window_tensors(window: SceneWindow, dtype=torch.float32):
    obs = torch.as_tensor(window.obs, dtype=dtype)
    fut = torch.as_tensor(window.fut, dtype=dtype)
    return obs, fut


def model_forward(window: SceneWindow, model: TrajectoryPredictor, stage="test",
                  seed=0, n_samples=1):
    """Convenience wrapper over a SceneWindow; returns numpy predictions.

    Deterministic given the seed. Training stage feeds the ground-truth
    future to the latent predictor's future bank.
    """
    dtype = next(model.parameters()).dtype
    obs, fut = window_tensors(window, dtype)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        result = model(obs, window.dt, stage=stage, generator=gen, n_samples=n_samples,
                       fut_abs=fut if stage == "train" else None, t_pred=window.t_pred)
    return result.pred_abs.numpy(), result.latent_spec


def channel_tensors(window: SceneWindow, span, dtype=torch.float32):
    """Kinematic channels of a window span as torch tensors (positions raw)."""
    ch = kinematics(window, span)
    return {
        "positions": torch.as_tensor(ch.positions, dtype=dtype),
        "velocities": torch.as_tensor(ch.velocities, dtype=dtype),
        "accelerations": torch.as_tensor(ch.accelerations, dtype=dtype),
    }
