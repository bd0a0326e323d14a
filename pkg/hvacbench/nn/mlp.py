"""
Multilayer perceptron with hand-written reverse mode.

Hidden layers are affine + relu, the output layer is affine. Inputs are
normalised with a fixed per-feature offset/scale stored next to the weights.
A forward pass accepts one vector or a (batch, features) matrix; the tape
keeps whatever the backward pass needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hvacbench.errors import ConfigurationError

MLP_FORMAT_VERSION = 1
ACTIVATIONS = ("relu", "tanh")


@dataclass
class MlpParams:
    weights: list[np.ndarray]            # (out, in) per layer
    biases: list[np.ndarray]
    activation: str = "relu"
    input_offset: np.ndarray | None = None
    input_scale: np.ndarray | None = None
    log_std: np.ndarray | None = None    # Gaussian head, present for stochastic policies only

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if not self.weights or len(self.weights) != len(self.biases):
            raise ConfigurationError("an MLP needs matching weight and bias lists")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ConfigurationError(f"layer {i} has weight {W.shape} and bias {b.shape}")
            if i and W.shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigurationError(f"layer {i} input does not chain onto layer {i - 1}")
        for name in ("input_offset", "input_scale"):
            value = getattr(self, name)
            if value is not None and value.shape != (self.input_dim,):
                raise ConfigurationError(f"{name} must have one entry per input feature")
        if self.log_std is not None and self.log_std.shape != (self.output_dim,):
            raise ConfigurationError("log_std must have one entry per output")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> list[int]:
        return [W.shape[0] for W in self.weights[:-1]]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: W0, b0, W1, b1, ..., then log_std."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        if self.log_std is not None:
            out.append(self.log_std)
        return out

    def with_arrays(self, arrays: list[np.ndarray]) -> "MlpParams":
        n = self.n_layers
        if len(arrays) != len(self.arrays()):
            raise ConfigurationError("array list does not match the network layout")
        return replace(
            self,
            weights=[np.asarray(a, dtype=float) for a in arrays[0:2 * n:2]],
            biases=[np.asarray(a, dtype=float) for a in arrays[1:2 * n:2]],
            log_std=None if self.log_std is None else np.asarray(arrays[-1], dtype=float),
        )

    def zero_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(a) for a in self.arrays()]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class GradTape:
    inputs: list[np.ndarray] = field(default_factory=list)       # input to each layer
    pre_activations: list[np.ndarray] = field(default_factory=list)
    batched: bool = False


def init_mlp(input_dim: int, hidden: list[int] | tuple[int, ...], output_dim: int, seed: int,
             activation: str = "relu", output_scale: float = 0.01,
             log_std: float | None = None) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, a shrunk output layer."""
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *hidden, output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    weights[-1] *= output_scale
    return MlpParams(
        weights=weights,
        biases=biases,
        activation=activation,
        log_std=None if log_std is None else np.full(output_dim, float(log_std)),
    )


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(float)
    return 1.0 - np.tanh(z) ** 2


def normalize_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    if params.input_offset is not None:
        x = x - params.input_offset
    if params.input_scale is not None:
        x = x / params.input_scale
    return x


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, GradTape]:
    x = np.asarray(x, dtype=float)
    batched = x.ndim == 2
    if x.shape[-1] != params.input_dim:
        raise ConfigurationError(f"input has {x.shape[-1]} features, network expects {params.input_dim}")

    tape = GradTape(batched=batched)
    h = np.atleast_2d(normalize_input(params, x))
    last = params.n_layers - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        tape.inputs.append(h)
        z = h @ W.T + b
        tape.pre_activations.append(z)
        h = z if i == last else _activate(params.activation, z)
    return (h if batched else h[0]), tape


def mlp_backward(params: MlpParams, tape: GradTape,
                 d_output: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """
    Gradients of <d_output, output> with respect to every trainable array
    (same order as `MlpParams.arrays`, batch summed) and to the raw input.
    """
    if len(tape.inputs) != params.n_layers or any(
        h.shape[1] != W.shape[1] for h, W in zip(tape.inputs, params.weights)
    ):
        raise ConfigurationError("tape was recorded with a different network layout")
    delta = np.atleast_2d(np.asarray(d_output, dtype=float))
    if delta.shape != tape.pre_activations[-1].shape:
        raise ConfigurationError("d_output does not match the recorded output shape")

    grads: list[np.ndarray] = [None] * (2 * params.n_layers)  # type: ignore[list-item]
    for i in range(params.n_layers - 1, -1, -1):
        if i != params.n_layers - 1:
            delta = delta * _activate_grad(params.activation, tape.pre_activations[i])
        grads[2 * i] = delta.T @ tape.inputs[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        delta = delta @ params.weights[i]

    if params.input_scale is not None:
        delta = delta / params.input_scale
    if params.log_std is not None:
        grads.append(np.zeros_like(params.log_std))
    return grads, (delta if tape.batched else delta[0])


def fit_input_normalization(params: MlpParams, samples: np.ndarray,
                            min_scale: float = 1e-3) -> MlpParams:
    """Fix offset/scale from representative observations (rows)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[1] != params.input_dim:
        raise ConfigurationError("normalisation samples do not match the input layer")
    offset = samples.mean(axis=0)
    scale = np.maximum(samples.std(axis=0), min_scale)
    return replace(params, input_offset=offset, input_scale=scale)


def mlp_to_dict(params: MlpParams) -> dict:
    def _opt(a):
        return None if a is None else a.tolist()

    return {
        "version": MLP_FORMAT_VERSION,
        "activation": params.activation,
        "layers": [
            {"shape": list(W.shape), "weight": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in zip(params.weights, params.biases)
        ],
        "input_offset": _opt(params.input_offset),
        "input_scale": _opt(params.input_scale),
        "log_std": _opt(params.log_std),
    }


def mlp_from_dict(data: dict) -> MlpParams:
    if data.get("version") != MLP_FORMAT_VERSION:
        raise ConfigurationError(f"unsupported network file version {data.get('version')}")

    def _opt(key):
        return None if data.get(key) is None else np.asarray(data[key], dtype=float)

    layers = data["layers"]
    return MlpParams(
        weights=[np.asarray(layer["weight"], dtype=float).reshape(layer["shape"]) for layer in layers],
        biases=[np.asarray(layer["bias"], dtype=float) for layer in layers],
        activation=data.get("activation", "relu"),
        input_offset=_opt("input_offset"),
        input_scale=_opt("input_scale"),
        log_std=_opt("log_std"),
    )


def save_mlp(path: str | Path, params: MlpParams, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = mlp_to_dict(params)
    payload.update(extra)
    path.write_text(json.dumps(payload))
    return path


def load_mlp(path: str | Path) -> MlpParams:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"network artifact not found: {path}")
    return mlp_from_dict(json.loads(path.read_text()))
