"""Future-informed latent prediction.

Per kinematic channel (positions, velocities, accelerations) two
Gaussian-LSTMs map a sequence to a 4-dim diagonal Gaussian: one bank reads
the ground-truth future (training), one reads the observed history
(testing). A KL penalty drives the observed bank toward the future-informed
one, so at test time its samples approximate future-informed latents. The
16-dim latent is three channel samples plus a 4-dim standard-normal noise
block.
"""

from typing import NamedTuple, Optional

import torch
import torch.nn as nn

CHANNELS = ("positions", "velocities", "accelerations")


class LatentSpec(NamedTuple):
    """Per-pedestrian (mu, sigma) pairs per channel for both banks.

    Each entry is a list of (mu, sigma) tensors of shape (n, channel_dim),
    ordered as CHANNELS; a bank that was not evaluated is None.
    """

    obs_branch: Optional[list]
    gt_branch: Optional[list]
    noise_dim: int = 4


class GaussianLstm(nn.Module):
    """Sequence (n, T, 2) -> diagonal Gaussian (mu, sigma), each (n, out_dim).

    The head predicts log-variance; sigma = exp(logvar / 2) keeps the scale
    strictly positive.
    """

    def __init__(self, embed_dim=16, hidden_dim=32, out_dim=4):
        super().__init__()
        self.embed = nn.Linear(2, embed_dim)
        self.lstm = nn.LSTM(embed_dim, hidden_dim, batch_first=True)
        self.head_mu = nn.Linear(hidden_dim, out_dim)
        self.head_logvar = nn.Linear(hidden_dim, out_dim)

    def forward(self, seq):
        out, _ = self.lstm(self.embed(seq))
        last = out[:, -1]
        mu = self.head_mu(last)
        sigma = torch.exp(0.5 * self.head_logvar(last))
        return mu, sigma


class LatentPredictor(nn.Module):
    """The two Gaussian-LSTM banks over the three kinematic channels."""

    def __init__(self, embed_dim=16, hidden_dim=32, channel_dim=4, noise_dim=4):
        super().__init__()
        self.obs_bank = nn.ModuleDict({k: GaussianLstm(embed_dim, hidden_dim, channel_dim) for k in CHANNELS})
        self.gt_bank = nn.ModuleDict({k: GaussianLstm(embed_dim, hidden_dim, channel_dim) for k in CHANNELS})
        self.channel_dim = channel_dim
        self.noise_dim = noise_dim

    @property
    def latent_dim(self):
        return len(CHANNELS) * self.channel_dim + self.noise_dim

    def branch(self, channels, bank):
        """Evaluate one bank on a dict of channel sequences (n, T, 2)."""
        modules = self.obs_bank if bank == "obs" else self.gt_bank
        return [modules[k](channels[k]) for k in CHANNELS]


def kl_divergence(obs_branch, gt_branch):
    """Sum over channels of KL(N(mu, sigma^2) || N(mu_gt, sigma_gt^2)), (n,).

    Argument order is observed-first; diagonal closed form. Non-positive
    sigmas are rejected.
    """
    if len(obs_branch) != len(gt_branch):
        raise ValueError("branch channel counts differ")
    total = None
    for (mu, sigma), (mu_gt, sigma_gt) in zip(obs_branch, gt_branch):
        if (sigma <= 0).any() or (sigma_gt <= 0).any():
            raise ValueError("sigma must be strictly positive")
        term = (
            torch.log(sigma_gt / sigma)
            + (sigma**2 + (mu - mu_gt) ** 2) / (2.0 * sigma_gt**2)
            - 0.5
        ).sum(dim=-1)
        total = term if total is None else total + term
    return total


def sample_latent(spec: LatentSpec, stage, generator):
    """Assemble z (n, 16): one reparameterized draw per channel plus noise.

    Training samples the ground-truth bank, testing the observed bank; the
    4-dim noise block is drawn fresh. All draws come from `generator`.
    """
    if stage == "train":
        branch = spec.gt_branch
    elif stage == "test":
        branch = spec.obs_branch
    else:
        raise ValueError(f"stage must be 'train' or 'test', got {stage!r}")
    if branch is None:
        raise ValueError(f"latent spec is missing the branch required for stage '{stage}'")
    parts = []
    for mu, sigma in branch:
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
        parts.append(mu + sigma * eps)
    n = parts[0].shape[0]
    noise = torch.randn((n, spec.noise_dim), generator=generator, dtype=parts[0].dtype)
    parts.append(noise)
    return torch.cat(parts, dim=-1)
