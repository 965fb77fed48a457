"""Checkpoint files: JSON with a version field, the ablation config and
dimensions embedded (so evaluation cannot mis-pair weights and
architecture), and a flat map from parameter name to a shape-tagged float
array. float32 values round-trip exactly through repr, which keeps
identical training runs byte-identical on disk.
"""

import json

import numpy as np
import torch

from .model import AblationConfig, ModelDims, TrajectoryPredictor

FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Unreadable checkpoint or architecture mismatch."""


def checkpoint_payload(model: TrajectoryPredictor) -> dict:
    params = {}
    for name, tensor in model.state_dict().items():
        array = tensor.detach().cpu().numpy().astype(np.float64)
        params[name] = {"shape": list(tensor.shape), "data": [float(v) for v in array.reshape(-1)]}
    return {
        "version": FORMAT_VERSION,
        "ablation": model.ablation.to_dict(),
        "dims": model.dims.to_dict(),
        "social_per_step": model.social.per_step,
        "params": params,
    }


def save_checkpoint(path, model: TrajectoryPredictor):
    payload = checkpoint_payload(model)
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> TrajectoryPredictor:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from None
    version = payload.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version!r} (expected {FORMAT_VERSION})")
    ablation = AblationConfig(**payload["ablation"])
    dims = ModelDims(**payload["dims"])
    model = TrajectoryPredictor(dims, ablation, social_per_step=payload.get("social_per_step", False))
    state = {}
    for name, entry in payload["params"].items():
        array = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        state[name] = torch.as_tensor(array, dtype=torch.float32)
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint parameters do not match the architecture: {exc}") from None
    return model


def require_matching_ablation(model: TrajectoryPredictor, expected: AblationConfig):
    if model.ablation != expected:
        raise CheckpointError(
            "checkpoint ablation does not match the requested architecture: "
            f"checkpoint={model.ablation.to_dict()}, requested={expected.to_dict()}"
        )
