"""Optimisation loop for the motion network.

Training samples random windows, encodes them with a :class:`PoseCodec`,
runs the network on the attended inputs and minimises one of four losses
with Adam, a step learning-rate schedule and global-norm gradient clipping.
Everything is driven by one seeded generator, so equal seeds give bitwise
equal runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ahmr, checkpoint
from . import autodiff as ad
from .codec import PoseCodec
from .data import MotionDataset, window_starts
from .errors import EmptyDataset, NonFiniteLoss
from .losses import fk_terms, geodesic_terms
from .skeleton import PoseSequence

LOSSES = ("l2", "smooth_l1", "geodesic", "fk")
COORD_LOSSES = ("l2", "smooth_l1")


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    decay: float = 0.95
    decay_every: int = 5000
    batch: int = 16
    clip_norm: float = 5.0
    max_iters: int = 1000
    seed: int = 0
    loss: str = "geodesic"
    log_every: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("lr0", "decay", "decay_every", "batch", "clip_norm", "max_iters", "log_every", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {LOSSES}")

    def to_dict(self):
        return asdict(self)


def check_compatible(representation, loss):
    if representation == "coords" and loss not in COORD_LOSSES:
        raise ValueError(f"loss {loss!r} needs rotations; the coords representation admits {COORD_LOSSES}")


def lr_at(iteration, config: TrainConfig):
    """Step schedule: ``lr0 * decay ** (iteration // decay_every)``."""
    return config.lr0 * config.decay ** (int(iteration) // config.decay_every)


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_gradients(grads, threshold):
    """Rescale all gradients together when their joint norm exceeds ``threshold``."""
    norm = global_norm(grads)
    if norm <= threshold or norm == 0.0:
        return dict(grads), norm
    scale = threshold / norm
    return {k: g * scale for k, g in grads.items()}, norm


@dataclass
class AdamState:
    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, moments: AdamState, iteration, config: TrainConfig):
    """Bias-corrected Adam at ``lr_at(iteration)``; ``iteration`` counts from 1.

    Returns ``(params, moments)`` as new dictionaries.
    """
    lr = lr_at(iteration, config)
    b1, b2 = config.beta1, config.beta2
    c1, c2 = 1.0 - b1**iteration, 1.0 - b2**iteration
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * moments.m[k] + (1.0 - b1) * g
        v = b2 * moments.v[k] + (1.0 - b2) * g * g
        new_p[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[k], new_v[k] = m, v
    return new_p, AdamState(new_m, new_v)


# --------------------------------------------------------------------------
# batches


class Prepared:
    """Per-sequence arrays the training loop slices windows from."""

    def __init__(self, dataset: MotionDataset, codec: PoseCodec, t, T, stride=1):
        self.codec, self.t, self.T = codec, t, T
        self.vectors = [codec.encode(s.rotations) for s in dataset.sequences]
        self.rotations = [s.rotations for s in dataset.sequences]
        self.positions = [codec.positions(s.rotations) for s in dataset.sequences]
        self.starts = window_starts(dataset, t, T, stride)
        if not self.starts:
            raise EmptyDataset(f"no sequence has the {t + T} frames a window needs")

    def __len__(self):
        return len(self.starts)

    def batch(self, indices):
        t, T = self.t, self.T
        picks = [self.starts[i] for i in indices]
        vec = np.stack([self.vectors[s][o : o + t + T] for s, o in picks])
        rot = np.stack([self.rotations[s][o + t : o + t + T] for s, o in picks])
        pos = np.stack([self.positions[s][o : o + t + T] for s, o in picks])
        return Batch(vec[:, :t], attended_inputs(self.codec, vec[:, :t], pos[:, :t]), vec[:, t:], rot, pos[:, t:])


@dataclass
class Batch:
    inputs: np.ndarray  # (B, t, D)
    attended: np.ndarray
    target_vectors: np.ndarray  # (B, T, D)
    target_rotations: np.ndarray  # (B, T, bones, 3, 3)
    target_positions: np.ndarray  # (B, T, bones, 3)


def attended_inputs(codec: PoseCodec, vectors, positions):
    """Spatially attended copy of packed ``vectors`` given root-relative joint ``positions``."""
    weights = ahmr.spatial_attention(positions[..., codec.active, :])
    return ahmr.attend(vectors, weights, codec.block_of())


def loss_graph(pred, batch: Batch, codec: PoseCodec, loss):
    """Scalar loss tensor of network output ``pred`` (B, T, D)."""
    if loss == "l2":
        d = pred - batch.target_vectors
        return (d * d).mean()
    if loss == "smooth_l1":
        return ad.huber(pred - batch.target_vectors).mean()
    if loss == "geodesic":
        rot = codec.active_rotations_graph(pred)
        return geodesic_terms(rot, batch.target_rotations[..., codec.active, :, :]).mean()
    if loss == "fk":
        return fk_terms(codec.positions_graph(pred), batch.target_positions).sum(axis=-1).mean()
    raise ValueError(f"unknown loss {loss!r}")


def loss_and_grads(params, batch: Batch, codec: PoseCodec, hyper: ahmr.HyperParams, loss):
    leaves = ahmr.as_leaves(params)
    pred = ahmr.forward(batch.inputs, batch.attended, leaves, hyper, steps=batch.target_vectors.shape[1])
    value = loss_graph(pred, batch, codec, loss)
    value.backward()
    grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.data)) for k, v in leaves.items()}
    return float(value.data), grads


def loss_value(params, batch: Batch, codec: PoseCodec, hyper: ahmr.HyperParams, loss):
    pred = ahmr.forward(batch.inputs, batch.attended, params, hyper, steps=batch.target_vectors.shape[1])
    return float(loss_graph(pred, batch, codec, loss).data)


def evaluate_loss(params, prepared: Prepared, hyper, loss, batch=64):
    """Mean loss over every window, weighted by window count."""
    total, n = 0.0, len(prepared)
    for lo in range(0, n, batch):
        idx = list(range(lo, min(n, lo + batch)))
        total += loss_value(params, prepared.batch(idx), prepared.codec, hyper, loss) * len(idx)
    return total / n


# --------------------------------------------------------------------------
# loop


@dataclass
class ProbeInfo:
    iteration: int
    loss: float
    lr: float
    grad_norm: float
    clipped_norm: float
    params: dict | None = None  # after the update


@dataclass
class TrainResult:
    params: dict
    best_params: dict
    best_loss: float
    curve: list = field(default_factory=list)  # (iter, loss, lr)
    files: dict = field(default_factory=dict)


def write_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "loss", "lr"])
        for it, loss, lr in curve:
            w.writerow([it, repr(loss), repr(lr)])


def train(dataset: MotionDataset, hyper: ahmr.HyperParams, config: TrainConfig, out_dir=None, probe=None, params=None, mask=None):
    """Fit the network to ``dataset`` and optionally write checkpoints and the loss curve.

    ``probe`` is called after every update with a :class:`ProbeInfo` and may
    return ``True`` to stop early. Raises :class:`NonFiniteLoss` on the first NaN or infinite loss.
    """
    check_compatible(hyper.representation, config.loss)
    codec = PoseCodec(dataset.skeleton, hyper.representation, mask)
    prepared = Prepared(dataset, codec, hyper.input_frames, hyper.output_frames)
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = ahmr.init_params(hyper, codec.dim, seed=config.seed)
    moments = AdamState.zeros_like(params)
    best, best_loss, curve = params, math.inf, []
    for it in range(1, config.max_iters + 1):
        idx = rng.integers(0, len(prepared), size=config.batch)
        loss, grads = loss_and_grads(params, prepared.batch(idx), codec, hyper, config.loss)
        if not math.isfinite(loss):
            raise NonFiniteLoss(it, loss)
        clipped, norm = clip_gradients(grads, config.clip_norm)
        lr = lr_at(it, config)
        if loss < best_loss:
            best, best_loss = params, loss  # params before this update produced the loss
        params, moments = adam_step(params, clipped, moments, it, config)
        stop = probe is not None and probe(ProbeInfo(it, loss, lr, norm, global_norm(clipped), params))
        if stop or it % config.log_every == 0 or it == config.max_iters:
            curve.append((it, loss, lr))
        if stop:
            break
    result = TrainResult(params, best, best_loss, curve)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        extra = {"skeleton": dataset.skeleton.to_dict(), "mask": codec.mask.astype(int).tolist(), "train": config.to_dict()}
        result.files = {"final": out / "final.ckpt", "best": out / "best.ckpt", "curve": out / "loss.csv"}
        checkpoint.save(result.files["final"], hyper, params, **extra)
        checkpoint.save(result.files["best"], hyper, best, best_loss=best_loss, **extra)
        write_curve(result.files["curve"], curve)
    return result


# --------------------------------------------------------------------------
# inference


def predict_vectors(params, hyper: ahmr.HyperParams, codec: PoseCodec, rotations, T, batch=64):
    """Packed predictions ``(N, T, D)`` after the last ``input_frames`` of ``(N, frames, bones, 3, 3)`` windows."""
    if T < 1:
        raise ValueError("T must be >= 1")
    rotations = np.asarray(rotations, dtype=np.float64)
    out = []
    for lo in range(0, len(rotations), batch):
        rot = rotations[lo : lo + batch, -hyper.input_frames :]
        vec = codec.encode(rot)
        att = attended_inputs(codec, vec, codec.positions(rot))
        out.append(ahmr.forward(vec, att, params, hyper, steps=T).data)
    return np.concatenate(out)


def predict(params, hyper: ahmr.HyperParams, codec: PoseCodec, observed: PoseSequence, T):
    """Rotational prediction as a :class:`PoseSequence` holding the last root translation."""
    rot = codec.decode(predict_vectors(params, hyper, codec, observed.rotations[None], T)[0])
    trans = np.repeat(observed.translations[-1:], T, axis=0)
    return PoseSequence(trans, rot, {"predicted": True})


# --------------------------------------------------------------------------
# verification


def fd_gradient_oracle(fn, params, step=1e-5):
    """Central finite differences of scalar ``fn`` for an array or a dict of arrays."""
    if isinstance(params, dict):
        work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        out = {}
        for k in work:
            out[k] = _fd_array(lambda a, k=k: fn({**work, k: a}), work[k], step)
        return out
    return _fd_array(fn, np.array(params, dtype=np.float64), step)


def _fd_array(fn, x, step):
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, g = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn(x.copy()))
        flat[i] = orig - step
        lo = float(fn(x.copy()))
        flat[i] = orig
        g[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor=1e-8):
    """``|a - n| / max(|n|, floor)`` over flattened arrays or dicts of arrays."""
    if isinstance(analytic, dict):
        a = np.concatenate([np.ravel(analytic[k]) for k in sorted(analytic)])
        n = np.concatenate([np.ravel(numeric[k]) for k in sorted(analytic)])
    else:
        a, n = np.ravel(analytic), np.ravel(numeric)
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(n), floor))
