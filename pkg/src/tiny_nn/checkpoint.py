"""Versioned checkpoint files: one numpy .npz archive holding the parameter arrays plus a
JSON metadata record (layer sizes, activations, optimizer counters, RNG state, extras)."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.errors import ShapeError
from .adam import AdamState
from .mlp import Mlp

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(eq=False)
class Checkpoint:
    networks: dict = field(default_factory=dict)  # name -> Mlp
    optimizers: dict = field(default_factory=dict)  # name -> AdamState
    rng_state: dict | None = None  # numpy bit generator state
    metadata: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)  # extra named arrays (noise, replay buffer)


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
    """Writes checkpoint to path (a .npz suffix is added when missing).

    Parameters:
        - path - destination file
        - checkpoint - content to store

    Returns:
        the path actually written
    """
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)

    arrays = {}
    meta = {"version": CHECKPOINT_VERSION, "networks": {}, "optimizers": {}, "rng_state": checkpoint.rng_state,
            "metadata": checkpoint.metadata, "arrays": sorted(checkpoint.arrays)}
    for name, mlp in checkpoint.networks.items():
        meta["networks"][name] = {"layer_sizes": list(mlp.layer_sizes), "output_activation": mlp.output_activation}
        for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            arrays[f"net/{name}/W{k}"] = w
            arrays[f"net/{name}/b{k}"] = b
    for name, state in checkpoint.optimizers.items():
        meta["optimizers"][name] = {"t": state.t, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps}
        arrays[f"opt/{name}/m"] = state.m
        arrays[f"opt/{name}/v"] = state.v
    for name, value in checkpoint.arrays.items():
        arrays[f"extra/{name}"] = np.asarray(value)

    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as file:
        np.savez(file, **arrays)
    logger.debug("saved checkpoint %s (%d arrays)", path, len(arrays))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Reads a file written by save_checkpoint; the round trip is exact."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError("Checkpoint does not exist: " + str(path))
    try:
        return _read_checkpoint(path)
    except KeyError as err:
        raise ShapeError(f"{path} is not a checkpoint written by save_checkpoint: no entry {err}") from err


def _read_checkpoint(path: Path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ShapeError(f"unsupported checkpoint version {meta.get('version')!r} in {path}")
        networks = {}
        for name, info in meta["networks"].items():
            sizes = tuple(info["layer_sizes"])
            n_layers = len(sizes) - 1
            weights = [data[f"net/{name}/W{k}"].astype(float) for k in range(n_layers)]
            biases = [data[f"net/{name}/b{k}"].astype(float) for k in range(n_layers)]
            for k, w in enumerate(weights):
                if w.shape != (sizes[k + 1], sizes[k]):
                    raise ShapeError(f"network '{name}' layer {k} has shape {w.shape}, expected {(sizes[k + 1], sizes[k])}")
            networks[name] = Mlp(sizes, weights, biases, info["output_activation"])
        optimizers = {}
        for name, info in meta["optimizers"].items():
            optimizers[name] = AdamState(data[f"opt/{name}/m"].astype(float), data[f"opt/{name}/v"].astype(float),
                                         int(info["t"]), info["beta1"], info["beta2"], info["eps"])
        arrays = {name: data[f"extra/{name}"] for name in meta["arrays"]}
    return Checkpoint(networks, optimizers, meta["rng_state"], meta["metadata"], arrays)
