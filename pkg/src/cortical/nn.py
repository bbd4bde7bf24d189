"""MLPs, Adam, and the power-constraint normalization layer.

Networks are described by an ``MlpSpec`` (architecture) and ``NetParams``
(weights). Forward passes run on an autodiff ``Tape``; parameters enter a
tape either as plain ``NetParams`` (constants, no gradients) or as a list of
pre-watched tensors created by ``watch_params`` when the caller intends to
train them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cortical.autodiff import Tape, Tensor

HEADS = ("linear", "sigmoid", "softplus", "power_norm")


class NnError(Exception):
    """Base class for network construction/optimization failures."""


class NonFiniteGradient(NnError):
    """Adam received a NaN/Inf gradient; the step is aborted."""


class CheckpointError(NnError):
    """A checkpoint file is malformed or inconsistent."""


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    ``dropout`` lists one keep-out rate per hidden layer (empty means no
    dropout anywhere). The head is applied after the last affine layer;
    ``power_norm`` centers each output column over the batch and rescales to
    the power passed at forward time.
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int = 1
    head: str = "linear"
    dropout: tuple[float, ...] = ()

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise NnError(f"dimensions must be positive, got {self.input_dim}->{self.output_dim}")
        if any(w < 1 for w in self.hidden):
            raise NnError(f"hidden widths must be positive, got {self.hidden}")
        if self.head not in HEADS:
            raise NnError(f"unknown head '{self.head}', expected one of {HEADS}")
        if self.dropout and len(self.dropout) != len(self.hidden):
            raise NnError(
                f"dropout needs one rate per hidden layer "
                f"({len(self.hidden)}), got {len(self.dropout)}"
            )
        if any(not 0.0 <= r < 1.0 for r in self.dropout):
            raise NnError(f"dropout rates must lie in [0,1), got {self.dropout}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def dropout_rates(self) -> tuple[float, ...]:
        return self.dropout if self.dropout else (0.0,) * len(self.hidden)


def discriminator_spec(d: int, head: str, dropout: float = 0.3) -> MlpSpec:
    """Two hidden layers of width 100, dropout after the first only.

    The discriminator consumes concatenated (x, y) rows, hence input 2d.
    """
    return MlpSpec(2 * d, (100, 100), 1, head, (dropout, 0.0))


def generator_spec(latent_width: int, d: int) -> MlpSpec:
    """Three hidden layers of width 100 and a power-normalized linear output."""
    return MlpSpec(latent_width, (100, 100, 100), d, "power_norm")


class NetParams:
    """Per-layer (weight, bias) arrays for one network."""

    def __init__(self, layers):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for w, b in layers]

    def flat(self) -> list[np.ndarray]:
        """Arrays in a fixed order: W1, b1, W2, b2, ..."""
        out = []
        for w, b in self.layers:
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "NetParams":
        return NetParams([(w.copy(), b.copy()) for w, b in self.layers])

    def __eq__(self, other):
        return isinstance(other, NetParams) and len(self.layers) == len(other.layers) and all(
            np.array_equal(w1, w2) and np.array_equal(b1, b2)
            for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
        )


def mlp_init(spec: MlpSpec, seed: int) -> NetParams:
    """Uniform fan-based weights in +-sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in spec.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                       np.zeros(fan_out)))
    return NetParams(layers)


def watch_params(tape: Tape, params: NetParams) -> list[Tensor]:
    """Register every parameter array as a differentiable leaf on ``tape``."""
    return [tape.leaf(a) for a in params.flat()]


def mlp_forward(tape, params, spec: MlpSpec, x: Tensor, mode: str = "eval",
                rng=None, power: float = 1.0):
    """Run the network; returns (output, pre_activation).

    ``params`` is either a ``NetParams`` (treated as constants) or the tensor
    list from ``watch_params`` (gradients flow to them). ``pre_activation``
    is the last affine output before the head, which for a sigmoid head
    carries the log-density ratio as its negation.

    Dropout (inverted: kept units scaled by 1/(1-rate)) fires only in train
    mode and draws its masks from ``rng``.
    """
    if mode not in ("train", "eval"):
        raise NnError(f"mode must be 'train' or 'eval', got '{mode}'")
    if isinstance(params, NetParams):
        tensors = [tape.constant(a) for a in params.flat()]
    else:
        tensors = list(params)
    n_layers = len(spec.layer_dims)
    if len(tensors) != 2 * n_layers:
        raise NnError(f"expected {2*n_layers} parameter arrays, got {len(tensors)}")
    if x.data.ndim != 2 or x.shape[1] != spec.input_dim:
        raise NnError(f"input shape {x.shape} does not match input_dim {spec.input_dim}")

    rates = spec.dropout_rates
    z = x
    for i in range(n_layers - 1):
        z = tape.relu(tape.add_bias(tape.matmul(z, tensors[2 * i]), tensors[2 * i + 1]))
        if mode == "train" and rates[i] > 0.0:
            if rng is None:
                raise NnError("train-mode dropout needs an rng")
            keep = 1.0 - rates[i]
            mask = (rng.random(z.shape) < keep) / keep
            z = tape.mul(z, tape.constant(mask))
    pre = tape.add_bias(tape.matmul(z, tensors[-2]), tensors[-1])

    if spec.head == "linear":
        return pre, pre
    if spec.head == "sigmoid":
        return tape.sigmoid(pre), pre
    if spec.head == "softplus":
        return tape.softplus(pre), pre
    return tape.power_norm(pre, power), pre


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: NetParams) -> "AdamState":
        flat = params.flat()
        return cls(m=[np.zeros_like(a) for a in flat],
                   v=[np.zeros_like(a) for a in flat], t=0)

    def copy(self) -> "AdamState":
        return AdamState(m=[a.copy() for a in self.m],
                         v=[a.copy() for a in self.v], t=self.t)


def adam_step(params: NetParams, grads, state: AdamState, lr: float,
              beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam descent step, in place; returns (params, state).

    ``grads`` aligns with ``params.flat()``. To ascend an objective, pass the
    negated gradients.
    """
    flat = params.flat()
    if len(grads) != len(flat):
        raise NnError(f"expected {len(flat)} gradient arrays, got {len(grads)}")
    for g in grads:
        if not np.isfinite(g).all():
            raise NonFiniteGradient(
                f"non-finite gradient at Adam step {state.t + 1}; "
                "training has diverged"
            )
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(flat, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def power_normalize(batch: np.ndarray, power: float) -> np.ndarray:
    """Center columns over the batch and scale to mean-square ``power``.

    Plain-numpy counterpart of the tape primitive, for non-differentiated
    paths (evaluation, export).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] < 2:
        raise NnError(f"power_normalize needs an N x d batch with N >= 2, got {batch.shape}")
    if power <= 0:
        raise NnError(f"power must be positive, got {power}")
    u = batch - batch.mean(axis=0, keepdims=True)
    ms = np.mean(u * u)
    if ms <= 0.0:
        raise NnError("degenerate batch: constant per column, normalization undefined")
    return np.sqrt(power / ms) * u


def save_mlp(path, spec: MlpSpec, params: NetParams) -> None:
    """Write a plain-text checkpoint; round-trips bit-exactly.

    Dropout is a training-time setting and is not stored; a loaded spec has
    dropout disabled.
    """
    dims = [spec.input_dim, *spec.hidden, spec.output_dim]
    lines = ["mlp " + " ".join(str(d) for d in dims) + f" {spec.head}"]
    for w, b in params.layers:
        lines.append(" ".join(f"{v:.17g}" for v in w.reshape(-1)))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mlp(path):
    """Read a checkpoint written by ``save_mlp``; returns (spec, params)."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("mlp "):
        raise CheckpointError(f"{path}: missing 'mlp' header line")
    head_tokens = lines[0].split()
    if len(head_tokens) < 4:
        raise CheckpointError(f"{path}: header too short: {lines[0]!r}")
    head = head_tokens[-1]
    try:
        dims = [int(tok) for tok in head_tokens[1:-1]]
    except ValueError as exc:
        raise CheckpointError(f"{path}: non-integer dimension in header") from exc
    spec = MlpSpec(dims[0], tuple(dims[1:-1]), dims[-1], head)
    n_layers = len(spec.layer_dims)
    if len(lines) != 1 + 2 * n_layers:
        raise CheckpointError(
            f"{path}: expected {2*n_layers} parameter lines, got {len(lines)-1}"
        )
    layers = []
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        try:
            w = np.array(lines[1 + 2 * i].split(), dtype=np.float64)
            b = np.array(lines[2 + 2 * i].split(), dtype=np.float64)
        except ValueError as exc:
            raise CheckpointError(f"{path}: non-numeric value in layer {i}") from exc
        if w.size != fan_in * fan_out or b.size != fan_out:
            raise CheckpointError(
                f"{path}: layer {i} has {w.size} weights / {b.size} biases, "
                f"expected {fan_in * fan_out} / {fan_out}"
            )
        layers.append((w.reshape(fan_in, fan_out), b))
    return spec, NetParams(layers)
