"""Residual MLP velocity model: forward/backward passes, training, checkpoints.

The network predicts the forward-time velocity u(x, t) for 2D flow matching.
Architecture is pinned project-wide: sinusoidal time embedding (dim 32)
concatenated to the point, a linear input layer, three residual blocks
h <- h + W2 tanh(W1 h + b1) + b2, and a linear readout.  tanh is the one
smooth nonlinearity used everywhere.

Gradients are reverse-mode, written out by hand for this fixed topology;
gradient_check compares them against central finite differences.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericError, TrainingDiverged
from .fields import VelocityField

IN_DIM = 2
OUT_DIM = 2
DEFAULT_WIDTH = 128
DEFAULT_DEPTH = 3
DEFAULT_TEMB_DIM = 32


@dataclass
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    steps: int = 20_000
    seed: int = 0
    ema_decay: float = 0.999

    def __post_init__(self):
        if self.batch_size <= 0 or self.steps < 0 or self.learning_rate <= 0:
            raise ContractViolation("batch size, steps and learning rate must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ContractViolation("ema_decay must lie in [0, 1)")


@dataclass
class MlpParams:
    """Live and EMA weight dictionaries plus the pinned architecture meta."""

    live: dict
    ema: dict
    width: int = DEFAULT_WIDTH
    depth: int = DEFAULT_DEPTH
    temb_dim: int = DEFAULT_TEMB_DIM
    ema_decay: float = 0.999
    loss_history: np.ndarray | None = field(default=None, repr=False)

    def validate(self):
        for name, arr in self.live.items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in parameter {name}")
            if self.ema[name].shape != arr.shape:
                raise ContractViolation(f"EMA shape mismatch for {name}")


def time_embedding(t, dim=DEFAULT_TEMB_DIM):
    """Sinusoidal features [sin(w_j t), cos(w_j t)], w_j = 2 pi (j + 1)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    freqs = 2.0 * np.pi * np.arange(1, dim // 2 + 1)
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def init_params(width=DEFAULT_WIDTH, depth=DEFAULT_DEPTH, temb_dim=DEFAULT_TEMB_DIM,
                seed=0, ema_decay=0.999):
    """Glorot-normal weights, zero biases; EMA starts as a copy of live."""
    rng = np.random.default_rng(seed)
    live = {}

    def glorot(fan_in, fan_out):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        return rng.normal(0.0, std, size=(fan_in, fan_out))

    z_dim = IN_DIM + temb_dim
    live["w_in"] = glorot(z_dim, width)
    live["b_in"] = np.zeros(width)
    for k in range(depth):
        live[f"blk{k}_w1"] = glorot(width, width)
        live[f"blk{k}_b1"] = np.zeros(width)
        live[f"blk{k}_w2"] = glorot(width, width)
        live[f"blk{k}_b2"] = np.zeros(width)
    live["w_out"] = glorot(width, OUT_DIM)
    live["b_out"] = np.zeros(OUT_DIM)

    ema = {k: v.copy() for k, v in live.items()}
    return MlpParams(live=live, ema=ema, width=width, depth=depth,
                     temb_dim=temb_dim, ema_decay=ema_decay)


def mlp_forward(weights, x, t, depth=DEFAULT_DEPTH, temb_dim=DEFAULT_TEMB_DIM,
                want_cache=False):
    """Evaluate the network on points x (n, 2) at times t (scalar or (n,))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
    z = np.concatenate([x, time_embedding(t, temb_dim)], axis=1)

    h = np.tanh(z @ weights["w_in"] + weights["b_in"])
    h0 = h
    acts = []
    for k in range(depth):
        pre = h @ weights[f"blk{k}_w1"] + weights[f"blk{k}_b1"]
        a = np.tanh(pre)
        h = h + a @ weights[f"blk{k}_w2"] + weights[f"blk{k}_b2"]
        acts.append((a, h))
    out = h @ weights["w_out"] + weights["b_out"]

    if not want_cache:
        return out
    return out, {"z": z, "h0": h0, "acts": acts, "depth": depth}


def mlp_backward(weights, cache, dout):
    """Gradients of a scalar loss wrt every weight, given dL/dout."""
    depth = cache["depth"]
    grads = {}
    h_final = cache["acts"][-1][1] if depth > 0 else cache["h0"]
    grads["w_out"] = h_final.T @ dout
    grads["b_out"] = dout.sum(axis=0)
    dh = dout @ weights["w_out"].T

    for k in reversed(range(depth)):
        a, _ = cache["acts"][k]
        h_prev = cache["acts"][k - 1][1] if k > 0 else cache["h0"]
        grads[f"blk{k}_w2"] = a.T @ dh
        grads[f"blk{k}_b2"] = dh.sum(axis=0)
        dpre = (dh @ weights[f"blk{k}_w2"].T) * (1.0 - a * a)
        grads[f"blk{k}_w1"] = h_prev.T @ dpre
        grads[f"blk{k}_b1"] = dpre.sum(axis=0)
        dh = dh + dpre @ weights[f"blk{k}_w1"].T

    dpre_in = dh * (1.0 - cache["h0"] ** 2)
    grads["w_in"] = cache["z"].T @ dpre_in
    grads["b_in"] = dpre_in.sum(axis=0)
    return grads


def fm_loss(params, noise_batch, data_batch, times, *, weights=None,
            want_grads=False):
    """Flow-matching regression loss on the linear path.

    The model is evaluated at x_t = (1 - t) x0 + t x1 and regressed onto the
    straight-line velocity x1 - x0; the loss is the batch mean of the squared
    error norm (summed over coordinates).
    """
    x0 = np.asarray(noise_batch, dtype=float)
    x1 = np.asarray(data_batch, dtype=float)
    t = np.asarray(times, dtype=float)
    if x0.shape != x1.shape:
        raise ContractViolation(f"batch shapes differ: {x0.shape} vs {x1.shape}")
    if t.shape != (x0.shape[0],):
        raise ContractViolation("times must be one scalar per batch row")
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ContractViolation("times must lie in [0, 1]")

    w = params.live if weights is None else weights
    xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    target = x1 - x0
    out, cache = mlp_forward(w, xt, t, depth=params.depth,
                             temb_dim=params.temb_dim, want_cache=True)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite activations in fm_loss forward pass")
    err = out - target
    loss = float(np.sum(err * err) / x0.shape[0])
    if not want_grads:
        return loss
    grads = mlp_backward(w, cache, 2.0 * err / x0.shape[0])
    return loss, grads


def gradient_check(params, batch, fd_step=1e-4):
    """Max relative error between backprop and central finite differences.

    Meant for small networks (width <= 16); every scalar parameter is
    perturbed twice.  The relative error for one entry uses the denominator
    max(1, |analytic|, |numeric|).
    """
    x0, x1, t = batch
    _, grads = fm_loss(params, x0, x1, t, want_grads=True)
    worst = 0.0
    for name, arr in params.live.items():
        flat = arr.ravel()
        g_flat = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            lp = fm_loss(params, x0, x1, t)
            flat[i] = orig - fd_step
            lm = fm_loss(params, x0, x1, t)
            flat[i] = orig
            g_fd = (lp - lm) / (2.0 * fd_step)
            denom = max(1.0, abs(g_flat[i]), abs(g_fd))
            worst = max(worst, abs(g_flat[i] - g_fd) / denom)
    return worst


def adam_step(weights, grads, moments, step, lr, beta1=0.9, beta2=0.999,
              eps=1e-8):
    m, v = moments
    for name, g in grads.items():
        m[name] = beta1 * m[name] + (1.0 - beta1) * g
        v[name] = beta2 * v[name] + (1.0 - beta2) * g * g
        mhat = m[name] / (1.0 - beta1**step)
        vhat = v[name] / (1.0 - beta2**step)
        weights[name] -= lr * mhat / (np.sqrt(vhat) + eps)


def train(config, dataset, *, params=None, width=DEFAULT_WIDTH,
          depth=DEFAULT_DEPTH):
    """Train the flow-matching MLP on a dataset spec; returns EMA-carrying params.

    Noise, data and time batches are drawn from streams seeded by
    config.seed, so identical configs reproduce identical weights.  Raises
    TrainingDiverged (with the step index) if the loss leaves the reals.
    """
    from . import datasets  # local import to avoid a cycle at module load

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    if params is None:
        params = init_params(width=width, depth=depth, seed=config.seed,
                             ema_decay=config.ema_decay)
    live, ema = params.live, params.ema
    moments = ({k: np.zeros_like(v) for k, v in live.items()},
               {k: np.zeros_like(v) for k, v in live.items()})

    def draw_batch(n):
        x1 = dataset.sample(n, rng=rng)
        x0 = rng.standard_normal((n, IN_DIM))
        t = rng.uniform(0.0, 1.0, size=n)
        return x0, x1, t

    held_out = draw_batch(config.batch_size)
    history = np.empty(config.steps)
    for step in range(config.steps):
        x0, x1, t = draw_batch(config.batch_size)
        loss, grads = fm_loss(params, x0, x1, t, want_grads=True)
        if not np.isfinite(loss):
            raise TrainingDiverged(step)
        history[step] = loss
        adam_step(live, grads, moments, step + 1, config.learning_rate)
        for name in live:
            ema[name] = config.ema_decay * ema[name] + (1.0 - config.ema_decay) * live[name]

    params.loss_history = history
    params.validate()
    return params


class LearnedField(VelocityField):
    """VelocityField view of trained MLP parameters (EMA weights by default)."""

    kind = "learned"

    def __init__(self, params, use_ema=True):
        self.params = params
        self.weights = params.ema if use_ema else params.live

    def forward(self, x, t):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        out = mlp_forward(self.weights, x, t, depth=self.params.depth,
                          temb_dim=self.params.temb_dim)
        return out[0] if squeeze else out


CHECKPOINT_FORMAT = "sharpflow-mlp-v1"


def save_checkpoint(params, path):
    """Bit-exact binary checkpoint: live + EMA arrays plus architecture meta."""
    import json

    meta = {
        "format": CHECKPOINT_FORMAT,
        "width": params.width,
        "depth": params.depth,
        "temb_dim": params.temb_dim,
        "ema_decay": params.ema_decay,
        "names": sorted(params.live),
    }
    arrays = {f"live.{k}": v for k, v in params.live.items()}
    arrays.update({f"ema.{k}": v for k, v in params.ema.items()})
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path):
    import json

    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ContractViolation(
                f"unrecognised checkpoint format {meta.get('format')!r}")
        live = {k: data[f"live.{k}"].copy() for k in meta["names"]}
        ema = {k: data[f"ema.{k}"].copy() for k in meta["names"]}
    return MlpParams(live=live, ema=ema, width=meta["width"], depth=meta["depth"],
                     temb_dim=meta["temb_dim"], ema_decay=meta["ema_decay"])
