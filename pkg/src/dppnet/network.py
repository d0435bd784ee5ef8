"""Feed-forward tower producing item embedding rows, with hand-rolled backprop.

The input for item ``i`` is its one-hot identity concatenated with optional
metadata features.  The one-hot block of the first layer is stored as an
``n x width`` lookup table, which is the same linear map without the wasted
multiply.  SELU sits between consecutive layers; the final layer is linear so
embeddings may be negative.  With no hidden layers and no metadata the tower
degenerates to a plain parameter lookup: the standard low-rank DPP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Standard self-normalizing constants (Klambauer et al.).
SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


def selu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, SELU_SCALE * x, SELU_SCALE * SELU_ALPHA * np.expm1(x))


def selu_derivative(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, SELU_SCALE, SELU_SCALE * SELU_ALPHA * np.exp(x))


@dataclass(frozen=True)
class Architecture:
    """Widths of the tower: identity + metadata in, embedding rows out."""

    catalog_size: int
    embedding_dim: int
    hidden_widths: tuple[int, ...] = ()
    meta_width: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.catalog_size < 1 or self.embedding_dim < 1:
            raise ConfigError("catalog size and embedding dimension must be positive")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError("hidden widths must be positive")
        if self.meta_width < 0:
            raise ConfigError("metadata width cannot be negative")

    @property
    def input_width(self) -> int:
        return self.catalog_size + self.meta_width

    @property
    def layer_widths(self) -> tuple[int, ...]:
        """Output width of each linear layer, first to last."""
        return (*self.hidden_widths, self.embedding_dim)


class NetworkParams:
    """Weights and biases conforming to an :class:`Architecture`.

    ``id_table`` is the identity block of the first layer; ``meta_weight``
    (present iff the architecture has metadata) maps feature vectors into the
    same layer.  ``hidden`` holds the remaining ``(W, b)`` pairs.
    """

    def __init__(self, arch: Architecture, id_table, meta_weight, first_bias, hidden):
        self.arch = arch
        self.id_table = id_table
        self.meta_weight = meta_weight
        self.first_bias = first_bias
        self.hidden = hidden
        self._check_shapes()

    def _check_shapes(self):
        arch = self.arch
        widths = arch.layer_widths
        if self.id_table.shape != (arch.catalog_size, widths[0]):
            raise ConfigError("id lookup table does not match architecture")
        if (self.meta_weight is None) != (arch.meta_width == 0):
            raise ConfigError("metadata weights must be present iff the architecture has metadata")
        if self.meta_weight is not None and self.meta_weight.shape != (arch.meta_width, widths[0]):
            raise ConfigError("metadata weights do not match architecture")
        if self.first_bias.shape != (widths[0],):
            raise ConfigError("first-layer bias does not match architecture")
        if len(self.hidden) != len(widths) - 1:
            raise ConfigError("wrong number of layers for architecture")
        for i, (w, b) in enumerate(self.hidden):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ConfigError(f"layer {i + 1} does not match architecture")

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (shared with gradients/Adam)."""
        out = [self.id_table]
        if self.meta_weight is not None:
            out.append(self.meta_weight)
        out.append(self.first_bias)
        for w, b in self.hidden:
            out.extend((w, b))
        return out

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams(
            self.arch,
            np.zeros_like(self.id_table),
            None if self.meta_weight is None else np.zeros_like(self.meta_weight),
            np.zeros_like(self.first_bias),
            [(np.zeros_like(w), np.zeros_like(b)) for w, b in self.hidden],
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.arch,
            self.id_table.copy(),
            None if self.meta_weight is None else self.meta_weight.copy(),
            self.first_bias.copy(),
            [(w.copy(), b.copy()) for w, b in self.hidden],
        )


def init_params(arch: Architecture, seed: int) -> NetworkParams:
    """LeCun-normal weights (variance 1/fan_in, the standard pairing for
    SELU), zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    widths = arch.layer_widths
    scale = 1.0 / np.sqrt(arch.input_width)
    id_table = rng.standard_normal((arch.catalog_size, widths[0])) * scale
    meta_weight = None
    if arch.meta_width > 0:
        meta_weight = rng.standard_normal((arch.meta_width, widths[0])) * scale
    first_bias = np.zeros(widths[0])
    hidden = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        hidden.append((w, np.zeros(fan_out)))
    return NetworkParams(arch, id_table, meta_weight, first_bias, hidden)


@dataclass
class ForwardCache:
    """Per-layer tensors remembered for the matching backward pass."""

    item_indices: np.ndarray
    feature_rows: np.ndarray | None
    preactivations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)


def forward(params: NetworkParams, item_indices, features=None):
    """Embedding rows for ``item_indices`` plus the cache for backprop.

    ``features`` is the full ``n x meta_width`` matrix (rows are selected
    here); it must be supplied exactly when the architecture has metadata.
    """
    arch = params.arch
    idx = np.asarray(item_indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= arch.catalog_size):
        raise ConfigError("item index outside catalog")
    if arch.meta_width > 0:
        if features is None:
            raise ConfigError("architecture expects metadata features")
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (arch.catalog_size, arch.meta_width):
            raise ConfigError(
                f"feature matrix must be {arch.catalog_size} x {arch.meta_width}"
            )
        feature_rows = features[idx]
    elif features is not None:
        raise ConfigError("architecture takes no metadata features")
    else:
        feature_rows = None

    z = params.id_table[idx] + params.first_bias
    if feature_rows is not None:
        z = z + feature_rows @ params.meta_weight
    cache = ForwardCache(item_indices=idx, feature_rows=feature_rows)
    cache.preactivations.append(z)
    for w, b in params.hidden:
        a = selu(z)
        cache.activations.append(a)
        z = a @ w + b
        cache.preactivations.append(z)
    return z, cache


def backward(params: NetworkParams, cache: ForwardCache, grad_output) -> NetworkParams:
    """Gradients of a scalar loss with respect to every parameter.

    ``grad_output`` is the loss gradient with respect to the rows produced by
    the matching :func:`forward` call.
    """
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if len(cache.preactivations) != len(params.hidden) + 1:
        raise ConfigError("cache does not match network depth")
    if grad_output.shape != cache.preactivations[-1].shape:
        raise ConfigError("grad_output does not match the cached forward pass")
    grads = params.zeros_like()
    delta = grad_output
    for i in range(len(params.hidden) - 1, -1, -1):
        w, _ = params.hidden[i]
        grads.hidden[i] = (cache.activations[i].T @ delta, delta.sum(axis=0))
        delta = (delta @ w.T) * selu_derivative(cache.preactivations[i])
    np.add.at(grads.id_table, cache.item_indices, delta)
    if params.meta_weight is not None:
        grads.meta_weight[...] = cache.feature_rows.T @ delta
    grads.first_bias[...] = delta.sum(axis=0)
    return grads


def materialize_embeddings(params: NetworkParams, features=None):
    """Run the tower over the whole catalog; returns ``(V, cache)``."""
    return forward(params, np.arange(params.arch.catalog_size), features)


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    def __init__(self, params: NetworkParams):
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.step = 0


def adam_step(
    params: NetworkParams,
    grads: NetworkParams,
    state: AdamState,
    hyper: AdamConfig = AdamConfig(),
):
    """One bias-corrected Adam update, applied to ``params`` in place.

    In-place mutation is deliberate: lock-free training workers share the
    parameter and state arrays and tolerate interleaved updates.
    """
    state.step += 1
    t = state.step
    lr = hyper.learning_rate
    correction1 = 1.0 - hyper.beta1**t
    correction2 = 1.0 - hyper.beta2**t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * np.square(g)
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + hyper.epsilon)
    return params, state
