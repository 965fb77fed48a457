"""Per-pedestrian motion encoder.

Relative displacements are embedded, run through a one-layer LSTM, and the
hidden-state sequence is compressed into a single summary vector by an
attention over time steps. With attention disabled the summary is the last
hidden state (equivalently, a one-hot attention on the final step).
"""

import math
from typing import NamedTuple

import torch
import torch.nn as nn


class EncodedTrack(NamedTuple):
    hidden_seq: torch.Tensor  # (n, T, h)
    attn_weights: torch.Tensor  # (n, T), rows sum to 1
    summary: torch.Tensor  # (n, h)


def displacements(positions):
    """Per-step relative displacements, (n, T, 2); the first step is (0, 0)."""
    d = positions[:, 1:] - positions[:, :-1]
    zero = torch.zeros_like(positions[:, :1])
    return torch.cat([zero, d], dim=1)


class TrackEncoder(nn.Module):
    """LSTM over embedded displacements plus attention over hidden states."""

    def __init__(self, embed_dim=16, hidden_dim=32, use_attention=True):
        super().__init__()
        self.embed = nn.Linear(2, embed_dim)
        self.lstm = nn.LSTM(embed_dim, hidden_dim, batch_first=True)
        self.attn_transform = nn.Linear(hidden_dim, hidden_dim)
        self.attn_score = nn.Parameter(torch.zeros(hidden_dim))
        self.use_attention = use_attention
        bound = 1.0 / math.sqrt(hidden_dim)
        nn.init.uniform_(self.attn_score, -bound, bound)

    def encode(self, disp):
        """Hidden-state sequence (n, T, h) from displacements (n, T, 2)."""
        out, _ = self.lstm(self.embed(disp))
        return out

    def attend(self, hidden_seq):
        """Attention weights (n, T) and weighted summary (n, h).

        Scores are tanh(W_w m_t + b_w) dotted with the scoring vector,
        softmaxed over time.
        """
        u = torch.tanh(self.attn_transform(hidden_seq))
        scores = u @ self.attn_score
        weights = torch.softmax(scores, dim=1)
        summary = (weights.unsqueeze(-1) * hidden_seq).sum(dim=1)
        return weights, summary

    def forward(self, disp) -> EncodedTrack:
        hidden_seq = self.encode(disp)
        if self.use_attention:
            weights, summary = self.attend(hidden_seq)
        else:
            n, t, _ = hidden_seq.shape
            weights = torch.zeros(n, t, dtype=hidden_seq.dtype, device=hidden_seq.device)
            weights[:, -1] = 1.0
            summary = hidden_seq[:, -1]
        return EncodedTrack(hidden_seq, weights, summary)
