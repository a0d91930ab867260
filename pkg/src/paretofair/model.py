"""From-scratch differentiable softmax classifiers with weighted minibatch SGD.

Linear models are the degenerate case layer_dims = [d, C]. Everything is
float64 numpy, single threaded and deterministic per seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from paretofair.data import GroupedDataset
from paretofair.risk import CLAMP, InputError, RiskVector, group_risks, sample_losses

ACTIVATIONS = ("relu", "tanh")
_CKPT_MAGIC = b"PFCKPT1\n"


@dataclass
class TrainConfig:
    """Inner SGD settings."""

    lr: float = 0.1
    batch_size: int = 128
    max_epochs: int = 60
    patience: int = 5
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise InputError("lr must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InputError("batch_size and max_epochs must be positive")
        if not 0 <= self.patience <= self.max_epochs:
            raise InputError("patience must be in [0, max_epochs]")


class MLPClassifier:
    """Fully connected softmax classifier, zero or more hidden layers."""

    def __init__(self, layer_dims, activation: str = "relu", seed: int = 0, zero_init: bool = False):
        layer_dims = list(int(d) for d in layer_dims)
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise InputError("layer_dims needs at least [input_dim, num_classes]")
        if activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}")
        self.layer_dims = layer_dims
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            if zero_init:
                W = np.zeros((fan_in, fan_out))
            else:
                W = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
            self.weights.append(W)
            self.biases.append(np.zeros(fan_out))

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    # -- parameter snapshots (bit-exact copies) --------------------------------

    def get_params(self):
        return [W.copy() for W in self.weights], [b.copy() for b in self.biases]

    def set_params(self, params):
        weights, biases = params
        for W, src in zip(self.weights, weights):
            W[...] = src
        for b, src in zip(self.biases, biases):
            b[...] = src

    # -- forward ---------------------------------------------------------------

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _act_grad(self, z, h):
        if self.activation == "relu":
            return (z > 0).astype(float)
        return 1.0 - h * h

    def _forward_cached(self, X):
        hs = [X]
        zs = []
        h = X
        L = len(self.weights)
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            zs.append(z)
            if i < L - 1:
                h = self._act(z)
                hs.append(h)
        logits = zs[-1]
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        return hs, zs, probs

    def forward(self, X) -> np.ndarray:
        """Class probabilities, one simplex row per input row."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.layer_dims[0]:
            raise InputError(f"expected input of width {self.layer_dims[0]}, got shape {X.shape}")
        return self._forward_cached(X)[2]

    def decisions(self, X) -> np.ndarray:
        return np.argmax(self.forward(X), axis=1)


def _loss_grad_probs(probs, targets, loss):
    """Per-sample loss values and dloss/dprobs."""
    n, C = probs.shape
    onehot = np.zeros((n, C))
    onehot[np.arange(n), targets] = 1.0
    if loss == "brier":
        vals = np.sum((probs - onehot) ** 2, axis=1)
        grads = 2.0 * (probs - onehot)
        return vals, grads
    if loss == "cross_entropy":
        p = probs[np.arange(n), targets]
        pc = np.clip(p, CLAMP, 1.0 - CLAMP)
        vals = -np.log(pc)
        grads = np.zeros((n, C))
        active = (p > CLAMP) & (p < 1.0 - CLAMP)
        grads[np.arange(n), targets] = np.where(active, -1.0 / pc, 0.0)
        return vals, grads
    raise InputError(f"unknown loss '{loss}'")


def weighted_grad(model: MLPClassifier, X, targets, sample_weights, loss: str = "brier"):
    """Exact gradient of sum_i w_i l_i / sum_i w_i with respect to all parameters.

    Returns (grad_weights, grad_biases) matching model parameter shapes.
    """
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=int)
    w = np.asarray(sample_weights, dtype=float)
    if np.any(w < 0):
        raise InputError("sample weights must be nonnegative")
    wsum = float(w.sum())
    if wsum <= 0:
        raise InputError("sample weights must not all be zero")
    hs, zs, probs = model._forward_cached(X)
    _vals, dl_dp = _loss_grad_probs(probs, targets, loss)
    # softmax Jacobian: dl/dz_k = p_k (g_k - sum_j g_j p_j)
    inner = np.sum(dl_dp * probs, axis=1, keepdims=True)
    delta = probs * (dl_dp - inner)
    delta *= (w / wsum)[:, None]
    grad_W = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_W[i] = hs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * model._act_grad(zs[i - 1], hs[i])
    return grad_W, grad_b


def _stratified_batch(rng, group_indices, batch_size):
    G = len(group_indices)
    per = -(-batch_size // G)  # ceil
    parts = [idx[rng.integers(0, len(idx), size=per)] for idx in group_indices]
    return np.concatenate(parts)


def sgd_early_stop(
    model: MLPClassifier,
    train: GroupedDataset,
    val: GroupedDataset,
    objective,
    weight_rule,
    config: TrainConfig,
    loss: str = "brier",
):
    """Minibatch SGD with group-dependent sample weights and early stopping.

    Each minibatch estimates per-group risks from its own forward pass, maps
    them through ``weight_rule`` to G weights, and applies those as sample
    weights in the gradient. After each epoch the ``objective`` (a function of
    the validation RiskVector) is evaluated; the best parameters seen are
    restored at the end. Training stops once ``patience`` consecutive epochs
    bring no improvement, or at ``max_epochs``.

    Returns (model, best_val_objective, epochs_run). The model is updated in
    place and also returned.
    """
    rng = np.random.default_rng(config.seed)
    G = train.num_groups
    group_indices = [np.flatnonzero(train.groups == a) for a in range(G)]
    n = train.n
    n_batches = -(-n // config.batch_size)

    best_obj = np.inf
    best_params = model.get_params()
    bad_epochs = 0
    epochs_run = 0

    for _epoch in range(config.max_epochs):
        if config.stratified:
            batches = [_stratified_batch(rng, group_indices, config.batch_size) for _ in range(n_batches)]
        else:
            order = rng.permutation(n)
            batches = [order[j : j + config.batch_size] for j in range(0, n, config.batch_size)]
        for idx in batches:
            X = train.features[idx]
            y = train.targets[idx]
            a = train.groups[idx]
            probs = model.forward(X)
            losses = sample_losses(probs, y, loss)
            r_hat = np.zeros(G)
            present = np.zeros(G, dtype=bool)
            for g in range(G):
                mask = a == g
                if mask.any():
                    present[g] = True
                    r_hat[g] = losses[mask].mean()
            counts = np.array([int((a == g).sum()) for g in range(G)])
            w_groups = np.asarray(weight_rule(RiskVector(risks=r_hat, counts=counts)), dtype=float)
            w_groups = np.where(present, w_groups, 1.0)
            sw = w_groups[a]
            gW, gb = weighted_grad(model, X, y, sw, loss)
            for W, g_ in zip(model.weights, gW):
                W -= config.lr * g_
            for b, g_ in zip(model.biases, gb):
                b -= config.lr * g_
        epochs_run += 1

        val_probs = model.forward(val.features)
        r_val = group_risks(val_probs, val.targets, val.groups, loss)
        obj = float(objective(r_val))
        if obj < best_obj:
            best_obj = obj
            best_params = model.get_params()
            bad_epochs = 0
        else:
            bad_epochs += 1
        if bad_epochs >= config.patience:
            break

    model.set_params(best_params)
    return model, best_obj, epochs_run


# -- checkpoint format ---------------------------------------------------------
#
# Flat binary layout:
#   8 bytes   magic "PFCKPT1\n"
#   1 byte    activation tag (0 = relu, 1 = tanh)
#   4 bytes   uint32 little-endian: number of layer dims
#   4 bytes   uint32 per layer dim
#   8 bytes   int64 seed
#   then for each layer: W (fan_in*fan_out float64, row-major), b (fan_out float64)


def save_checkpoint(model: MLPClassifier, path):
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<B", ACTIVATIONS.index(model.activation)))
        fh.write(struct.pack("<I", len(model.layer_dims)))
        for d in model.layer_dims:
            fh.write(struct.pack("<I", d))
        fh.write(struct.pack("<q", model.seed))
        for W, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(W, dtype=float).tobytes())
            fh.write(np.ascontiguousarray(b, dtype=float).tobytes())


def load_checkpoint(path) -> MLPClassifier:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise InputError(f"{path}: not a model checkpoint (bad magic)")
        act = ACTIVATIONS[struct.unpack("<B", fh.read(1))[0]]
        (ndims,) = struct.unpack("<I", fh.read(4))
        dims = [struct.unpack("<I", fh.read(4))[0] for _ in range(ndims)]
        (seed,) = struct.unpack("<q", fh.read(8))
        model = MLPClassifier(dims, activation=act, seed=seed, zero_init=True)
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            W = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype=float).reshape(fan_in, fan_out)
            b = np.frombuffer(fh.read(8 * fan_out), dtype=float)
            model.weights[i] = W.copy()
            model.biases[i] = b.copy()
        return model
