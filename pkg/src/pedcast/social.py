"""Inter-pedestrian interaction via socially gated graph attention.

Per observed time step, two stacked graph-attention layers aggregate
neighbor states; the aggregation can be gated by a social attention built
from velocity orientations (who is in front of whom). The per-step
aggregates are summarized over time by a dedicated LSTM.
"""

import math
from typing import NamedTuple

import torch
import torch.nn as nn

VELOCITY_EPS = 1e-6


class SocialContext(NamedTuple):
    g_seq: torch.Tensor  # (n, T, h)
    g_final: torch.Tensor  # (n, h)


def cosine_matrix(positions, velocities):
    """cos of the angle between velocity_i and the vector from i to j, (n, n).

    Rows of pedestrians with near-zero speed are set to 1 (a still pedestrian
    has no facing direction, so it masks nothing); the diagonal and exactly
    coincident pairs are 1 for the same reason.
    """
    positions = torch.as_tensor(positions)
    velocities = torch.as_tensor(velocities)
    rel = positions.unsqueeze(0) - positions.unsqueeze(1)  # rel[i, j] = p_j - p_i
    dot = (velocities.unsqueeze(1) * rel).sum(-1)
    v_norm = velocities.norm(dim=-1).unsqueeze(1)
    r_norm = rel.norm(dim=-1)
    cos = dot / (v_norm * r_norm).clamp(min=VELOCITY_EPS**2)
    cos = torch.where(r_norm < VELOCITY_EPS, torch.ones_like(cos), cos)
    cos = torch.where(v_norm.expand_as(cos) < VELOCITY_EPS, torch.ones_like(cos), cos)
    return cos


def social_attention_weights(cos_b, mode, conv_weight=None, conv_bias=None):
    """Social gate A from the cosine map.

    hard: indicator(cos > 0), strict, with the diagonal forced to 1.
    soft: sigmoid(w * cos + b) elementwise, the 1x1 convolution of a
    one-channel map; values stay inside (0, 1).
    """
    if mode == "hard":
        a = (cos_b > 0).to(cos_b.dtype)
        n = a.shape[-1]
        eye = torch.eye(n, dtype=a.dtype, device=a.device)
        return torch.clamp(a + eye, max=1.0)
    if mode == "soft":
        if conv_weight is None or conv_bias is None:
            raise ValueError("soft social attention needs conv_weight and conv_bias")
        return torch.sigmoid(conv_weight * cos_b + conv_bias)
    raise ValueError(f"unknown social attention mode '{mode}'")


class GraphAttentionLayer(nn.Module):
    """Single graph-attention layer with additive scoring and sigmoid output."""

    def __init__(self, in_dim, out_dim, leaky_slope=0.2):
        super().__init__()
        self.proj = nn.Linear(in_dim, out_dim, bias=False)
        self.score = nn.Parameter(torch.zeros(2 * out_dim))
        self.leaky_slope = leaky_slope
        bound = 1.0 / math.sqrt(out_dim)
        nn.init.uniform_(self.score, -bound, bound)

    def coefficients(self, states, neighbor_mask=None):
        """Attention rows (softmax over neighbors j for each node i).

        states: (..., n, h). Masked-out entries are exactly zero; a row whose
        mask admits no neighbor is an error (nothing to normalize over).
        """
        z = self.proj(states)
        d = z.shape[-1]
        s_self = z @ self.score[:d]  # (..., n), contribution of node i
        s_neigh = z @ self.score[d:]  # (..., n), contribution of node j
        raw = s_self.unsqueeze(-1) + s_neigh.unsqueeze(-2)  # (..., i, j)
        raw = nn.functional.leaky_relu(raw, negative_slope=self.leaky_slope)
        if neighbor_mask is not None:
            mask = torch.as_tensor(neighbor_mask, dtype=torch.bool, device=raw.device)
            if not mask.any(dim=-1).all():
                raise ValueError("neighbor mask has a row with no neighbors; cannot normalize")
            raw = raw.masked_fill(~mask, float("-inf"))
        return torch.softmax(raw, dim=-1)

    def forward(self, states, neighbor_mask=None, social=None):
        """sigmoid(sum_j A_ij alpha_ij W m_j) for every node i."""
        z = self.proj(states)
        alpha = self.coefficients(states, neighbor_mask)
        if social is not None:
            alpha = alpha * social
        return torch.sigmoid(alpha @ z)


class SocialGraph(nn.Module):
    """Two stacked graph-attention layers gated by social attention, then an
    LSTM over time producing the social context vector per pedestrian.

    mode: 'none' (plain graph attention), 'hard', or 'soft'. With
    per_step=True the social gate is recomputed from each observed step's
    positions and velocities instead of once per window.
    """

    def __init__(self, hidden_dim=32, mode="none", per_step=False, leaky_slope=0.2):
        super().__init__()
        self.layer1 = GraphAttentionLayer(hidden_dim, hidden_dim, leaky_slope)
        self.layer2 = GraphAttentionLayer(hidden_dim, hidden_dim, leaky_slope)
        self.glstm = nn.LSTM(hidden_dim, hidden_dim, batch_first=True)
        self.conv_weight = nn.Parameter(torch.tensor(1.0))
        self.conv_bias = nn.Parameter(torch.tensor(0.0))
        self.mode = mode
        self.per_step = per_step

    def social_gate(self, obs_pos, dt):
        """A as (n, n), or (T, n, n) in per-step mode, or None when mode='none'.

        Velocities are finite differences of the observed positions with the
        first step padded, matching the kinematic-channel convention.
        """
        if self.mode == "none":
            return None
        vel = _padded_velocity(obs_pos, dt)
        if self.per_step:
            maps = [cosine_matrix(obs_pos[:, t], vel[:, t]) for t in range(obs_pos.shape[1])]
            cos_b = torch.stack(maps)
        else:
            cos_b = cosine_matrix(obs_pos[:, -1], vel[:, -1])
        return social_attention_weights(cos_b, self.mode, self.conv_weight, self.conv_bias)

    def forward(self, hidden_seq, obs_pos, dt) -> SocialContext:
        """hidden_seq: (n, T, h) pre-attention encoder states; obs_pos: (n, T, 2)."""
        social = self.social_gate(obs_pos, dt)
        states = hidden_seq.transpose(0, 1)  # (T, n, h)
        x = self.layer1(states, social=social)
        x = self.layer2(x, social=social)
        g_seq, _ = self.glstm(x.transpose(0, 1))
        return SocialContext(g_seq=g_seq, g_final=g_seq[:, -1])


def _padded_velocity(pos, dt):
    if pos.shape[1] < 2:
        return torch.zeros_like(pos)
    d = (pos[:, 1:] - pos[:, :-1]) / dt
    return torch.cat([d[:, :1], d], dim=1)
