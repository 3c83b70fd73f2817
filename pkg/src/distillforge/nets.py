"""Fully-connected trunk networks with a class head and a regression head.

A network standardizes its input per feature, applies ReLU layers whose
widths are the (optionally divided) hidden widths followed by the
embedding width, and reads two affine heads off the final embedding: class
logits and a keypoint regression. Compressed students divide only the
hidden widths (ceil division); the embedding width and both head widths
stay fixed so teacher and student embeddings and logits remain directly
comparable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import tensor as tc
from .tensor import Tensor

__all__ = [
    "NetworkSpec",
    "NetworkOutputs",
    "Network",
    "build",
    "copy_parameters",
    "clone",
    "save_network",
    "load_network",
    "num_parameters",
]

_CKPT_MAGIC = "distillforge-ckpt v1"


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; width_divisor compresses hidden widths only."""

    input_dim: int
    hidden_widths: tuple[int, ...]
    embedding_dim: int
    num_classes: int
    num_keypoint_coords: int = 0
    width_divisor: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        for name in ("input_dim", "embedding_dim", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden_widths must be positive integers, got {self.hidden_widths}")
        if self.num_keypoint_coords < 0:
            raise ValueError(f"num_keypoint_coords must be nonnegative, got {self.num_keypoint_coords}")
        if self.width_divisor < 1:
            raise ValueError(f"width_divisor must be >= 1, got {self.width_divisor}")

    def divided_widths(self) -> tuple[int, ...]:
        """Hidden widths after ceil division by width_divisor."""
        widths = tuple(-(-w // self.width_divisor) for w in self.hidden_widths)
        if any(w < 1 for w in widths):  # pragma: no cover - unreachable with ceil
            raise ValueError(f"division by {self.width_divisor} produced a zero width: {widths}")
        return widths

    def student(self, divisor: int) -> "NetworkSpec":
        """The same architecture with hidden widths divided by ``divisor``."""
        return replace(self, width_divisor=int(divisor))

    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.divided_widths(), self.embedding_dim)


class NetworkOutputs(NamedTuple):
    logits: Tensor
    embedding: Tensor
    regression: Tensor


class Network:
    """Parameters plus an input standardizer; forward yields (logits, K, R)."""

    def __init__(self, spec: NetworkSpec, parameters: list[Tensor],
                 norm_mean: np.ndarray, norm_std: np.ndarray):
        self.spec = spec
        self.parameters = parameters
        self.norm_mean = np.asarray(norm_mean, dtype=np.float64)
        self.norm_std = np.asarray(norm_std, dtype=np.float64)
        if self.norm_mean.shape != (spec.input_dim,) or self.norm_std.shape != (spec.input_dim,):
            raise ValueError("normalizer vectors must have shape (input_dim,)")
        if np.any(self.norm_std <= 0):
            raise ValueError("normalizer std entries must be positive")

    def set_normalizer(self, mean, std) -> None:
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64).copy()
        std[std <= 0] = 1.0  # constant features pass through unscaled
        if mean.shape != (self.spec.input_dim,) or std.shape != (self.spec.input_dim,):
            raise ValueError("normalizer vectors must have shape (input_dim,)")
        self.norm_mean = mean
        self.norm_std = std

    def forward(self, batch) -> NetworkOutputs:
        x = tc.as_tensor(batch)
        if x.data.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"forward: expected a batch of shape (B, {self.spec.input_dim}), got {x.shape}")
        h = tc.mul(tc.sub(x, Tensor(self.norm_mean)), Tensor(1.0 / self.norm_std))
        n_trunk = len(self.spec.layer_dims()) - 1
        for i in range(n_trunk):
            w, b = self.parameters[2 * i], self.parameters[2 * i + 1]
            h = tc.relu(tc.add(tc.matmul(h, w), b))
        k = h
        w_cls, b_cls = self.parameters[2 * n_trunk], self.parameters[2 * n_trunk + 1]
        w_reg, b_reg = self.parameters[2 * n_trunk + 2], self.parameters[2 * n_trunk + 3]
        logits = tc.add(tc.matmul(k, w_cls), b_cls)
        regression = tc.add(tc.matmul(k, w_reg), b_reg)
        return NetworkOutputs(logits, k, regression)


def _layer_shapes(spec: NetworkSpec) -> list[tuple[int, int]]:
    dims = spec.layer_dims()
    shapes = [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    shapes.append((spec.embedding_dim, spec.num_classes))
    shapes.append((spec.embedding_dim, spec.num_keypoint_coords))
    return shapes


def build(spec: NetworkSpec, seed: int) -> Network:
    """Deterministic fan-in-scaled uniform init; biases start at zero.

    The regression head starts at zero outright: unbounded squared-error
    targets through a random head otherwise produce an initial kick
    (several times the target variance) that, momentum-amplified, shuts
    down entire rectifier layers for good. A zero head reads the trunk
    first and feeds gradient into it only as its own weights grow.
    """
    rng = np.random.default_rng(seed)
    shapes = _layer_shapes(spec)
    params: list[Tensor] = []
    for i, (fan_in, fan_out) in enumerate(shapes):
        if i == len(shapes) - 1:
            w = np.zeros((fan_in, fan_out))
        else:
            limit = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params.append(Tensor(w, requires_grad=True))
        params.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return Network(spec, params, np.zeros(spec.input_dim), np.ones(spec.input_dim))


def copy_parameters(src: Network, dst: Network) -> None:
    """Value-copy src's parameters (and normalizer) into dst, in place.

    After the copy the two networks compute identical outputs but share no
    storage; training one leaves the other untouched.
    """
    if src.spec != dst.spec:
        raise ValueError(f"incompatible specs: {src.spec} vs {dst.spec}")
    for p_src, p_dst in zip(src.parameters, dst.parameters):
        p_dst.data[...] = p_src.data
    dst.norm_mean = src.norm_mean.copy()
    dst.norm_std = src.norm_std.copy()


def clone(src: Network) -> Network:
    params = [Tensor(p.data.copy(), requires_grad=True) for p in src.parameters]
    return Network(src.spec, params, src.norm_mean.copy(), src.norm_std.copy())


def num_parameters(net: Network) -> int:
    return sum(p.size for p in net.parameters)


def save_network(net: Network, path) -> None:
    """Write a versioned checkpoint that round-trips bit-exactly."""
    spec = net.spec
    header = {
        "spec": {
            "input_dim": spec.input_dim,
            "hidden_widths": list(spec.hidden_widths),
            "embedding_dim": spec.embedding_dim,
            "num_classes": spec.num_classes,
            "num_keypoint_coords": spec.num_keypoint_coords,
            "width_divisor": spec.width_divisor,
        },
        "param_shapes": [list(p.shape) for p in net.parameters],
    }
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC.encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(net.norm_mean.astype("<f8").tobytes())
        fh.write(net.norm_std.astype("<f8").tobytes())
        for p in net.parameters:
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_network(path) -> Network:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n").decode(errors="replace")
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a network checkpoint (header {magic!r}, expected {_CKPT_MAGIC!r})")
        try:
            header = json.loads(fh.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: corrupt checkpoint header: {exc}") from exc
        spec = NetworkSpec(
            input_dim=header["spec"]["input_dim"],
            hidden_widths=tuple(header["spec"]["hidden_widths"]),
            embedding_dim=header["spec"]["embedding_dim"],
            num_classes=header["spec"]["num_classes"],
            num_keypoint_coords=header["spec"]["num_keypoint_coords"],
            width_divisor=header["spec"]["width_divisor"],
        )
        shapes = [tuple(s) for s in header["param_shapes"]]
        expected: list[tuple[int, ...]] = []
        for fan_in, fan_out in _layer_shapes(spec):
            expected.append((fan_in, fan_out))
            expected.append((fan_out,))
        if shapes != expected:
            raise ValueError(f"{path}: parameter shapes do not match the declared spec")

        def read_array(shape):
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise ValueError(f"{path}: truncated checkpoint")
            return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

        mean = read_array((spec.input_dim,))
        std = read_array((spec.input_dim,))
        params = [Tensor(read_array(s), requires_grad=True) for s in shapes]
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after checkpoint payload")
    return Network(spec, params, mean, std)
