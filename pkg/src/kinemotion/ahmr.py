"""Attentive hierarchical motion recurrent network.

The encoder keeps one state per observed frame plus a global state for the
whole window and refines all of them together for a fixed number of
recurrent steps; every step reads only the previous step's values, so frame
updates within a step are independent of each other. A two-layer GRU decoder
then rolls the prediction forward, feeding each output back as input.

Arrays are batched: poses are ``(batch, frames, dim)``, frame states
``(batch, frames, hidden)`` and the global state ``(batch, hidden)``.
Parameters live in a flat ``dict`` of NumPy arrays keyed by name; matrices
are stored ``(fan_in, fan_out)`` and applied as ``x @ W``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .codec import REPRESENTATIONS
from .errors import ShapeMismatch, TooFewFrames

GLOBAL_GATES = ("f", "g", "o")
GRU_GATES = ("z", "r", "c")


@dataclass(frozen=True)
class HyperParams:
    hidden_size: int = 32
    recurrent_steps: int = 5
    context_window: int = 3
    input_frames: int = 50
    output_frames: int = 10
    representation: str = "stiefel"

    def __post_init__(self):
        if self.recurrent_steps < 1:
            raise ValueError("recurrent_steps must be >= 1")
        if self.context_window not in (1, 3, 5, 7):
            raise ValueError("context_window must be one of 1, 3, 5, 7")
        if self.hidden_size <= 0:
            raise ValueError("hidden_size must be positive")
        if self.input_frames < 1 or self.output_frames < 1:
            raise ValueError("input_frames and output_frames must be >= 1")
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class EncoderState:
    h: ad.Tensor  # frame states (B, t, H)
    c: ad.Tensor  # frame cells
    g: ad.Tensor  # global state (B, H)
    cg: ad.Tensor  # global cell


@dataclass
class AttentionWeights:
    beta: np.ndarray  # velocity weights (..., t, joints)
    gamma: np.ndarray  # acceleration weights
    alpha: np.ndarray | None = None  # temporal weights (..., t)


def neighbor_offsets(context_window):
    half = (context_window - 1) // 2
    return [d for d in range(-half, half + 1) if d != 0]


def _neighbor_gate(d):
    side = "l" if d < 0 else "r"
    return side if abs(d) == 1 else f"{side}{abs(d)}"


def frame_gates(context_window=3):
    """Gate names in fused order: ``f``, neighbor forget gates, ``q, i, o`` and candidate ``c``."""
    return ["f"] + [_neighbor_gate(d) for d in neighbor_offsets(context_window)] + ["q", "i", "o", "c"]


def forget_gates(context_window=3):
    return ["f"] + [_neighbor_gate(d) for d in neighbor_offsets(context_window)] + ["q"]


def param_shapes(hyper: HyperParams, input_dim: int):
    hsz, dim, w = hyper.hidden_size, input_dim, hyper.context_window
    shapes = {"in.W": (dim, hsz), "in.b": (hsz,)}
    for k in frame_gates(w):
        shapes[f"frame.U_{k}"] = (dim, hsz)
        shapes[f"frame.W_{k}"] = (w * hsz, hsz)
        shapes[f"frame.Z_{k}"] = (hsz, hsz)
        shapes[f"frame.b_{k}"] = (hsz,)
    for k in GLOBAL_GATES:
        shapes[f"global.W_{k}"] = (hsz, hsz)
        shapes[f"global.Z_{k}"] = (hsz, hsz)
        shapes[f"global.b_{k}"] = (hsz,)
    for layer, fan_in in ((1, dim), (2, hsz)):
        for k in GRU_GATES:
            shapes[f"dec{layer}.W_{k}"] = (fan_in, hsz)
            shapes[f"dec{layer}.U_{k}"] = (hsz, hsz)
            shapes[f"dec{layer}.b_{k}"] = (hsz,)
    shapes["out.W"] = (hsz, dim)
    shapes["out.b"] = (dim,)
    return shapes


def init_params(hyper: HyperParams, input_dim: int, seed=0):
    """Uniform init in ``+-1/sqrt(fan_in)``; forget-gate biases start at +1."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(hyper, input_dim).items():
        fan_in = shape[0] if len(shape) == 2 else hyper.hidden_size
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    for k in forget_gates(hyper.context_window):
        params[f"frame.b_{k}"] = np.ones(hyper.hidden_size)
    params["global.b_f"] = np.ones(hyper.hidden_size)
    params["global.b_g"] = np.ones(hyper.hidden_size)
    return params


def zero_params(hyper: HyperParams, input_dim: int):
    return {k: np.zeros(s) for k, s in param_shapes(hyper, input_dim).items()}


def _p(params, name):
    return ad.as_tensor(params[name])


# --------------------------------------------------------------------------
# spatial attention


def _softmax_np(x, axis=-1):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def spatial_attention(positions):
    """Velocity and acceleration softmax weights over joints.

    ``positions`` is ``(..., frames, joints, 3)``. The first frames reuse the
    first pose for the missing history, i.e. they see zero velocity and
    zero acceleration.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[-3] < 3:
        raise TooFewFrames("spatial attention needs at least 3 frames")
    first = positions[..., :1, :, :]
    prev = np.concatenate([first, positions[..., :-1, :, :]], axis=-3)
    prev2 = np.concatenate([first, prev[..., :-1, :, :]], axis=-3)
    vel = np.linalg.norm(positions - prev, axis=-1)
    acc = np.linalg.norm(positions - 2.0 * prev + prev2, axis=-1)
    return AttentionWeights(_softmax_np(vel), _softmax_np(acc))


def attend(inputs, weights: AttentionWeights, blocks=None):
    """Scale each joint's block of ``inputs`` by ``beta + gamma``.

    ``blocks`` maps every input coordinate to its joint (see
    :meth:`PoseCodec.block_of`); ``None`` means one coordinate per joint.
    """
    scale = weights.beta + weights.gamma
    if blocks is not None:
        scale = scale[..., blocks]
    return np.asarray(inputs, dtype=np.float64) * scale


# --------------------------------------------------------------------------
# encoder


def init_states(attended, params):
    attended = ad.as_tensor(attended)
    h = attended @ _p(params, "in.W") + _p(params, "in.b")
    g = h.mean(axis=-2)
    ones = np.ones(h.shape)
    return EncoderState(h, ad.Tensor(ones), g, ad.Tensor(np.ones(g.shape)))


def _shift(x, d):
    """Value at frame ``j`` is ``x[j + d]``; out-of-range frames are zero."""
    if d == 0:
        return x
    batch, t, hsz = x.shape
    pad = np.zeros((batch, min(abs(d), t), hsz))
    if abs(d) >= t:
        return ad.Tensor(np.zeros(x.shape))
    if d < 0:
        return ad.concat([pad, x[:, : t + d, :]], axis=1)
    return ad.concat([x[:, d:, :], pad], axis=1)


class _Fused:
    """Per-gate matrices concatenated once per forward pass."""

    def __init__(self, params, context_window):
        self.gates = frame_gates(context_window)
        self.offsets = neighbor_offsets(context_window)
        self.window = context_window
        self.U = ad.concat([_p(params, f"frame.U_{k}") for k in self.gates], axis=1)
        self.W = ad.concat([_p(params, f"frame.W_{k}") for k in self.gates], axis=1)
        self.Z = ad.concat([_p(params, f"frame.Z_{k}") for k in self.gates], axis=1)
        self.b = ad.concat([_p(params, f"frame.b_{k}") for k in self.gates], axis=0)
        self.hidden = params["frame.b_f"].shape[0]


def _frame_update(state, p_u, fused: _Fused):
    half = (fused.window - 1) // 2
    window = [_shift(state.h, d) for d in range(-half, half + 1)]
    stacked = ad.concat(window, axis=-1) if len(window) > 1 else window[0]
    pre = p_u + stacked @ fused.W + ad.expand_dims(state.g @ fused.Z, 1) + fused.b
    hsz = fused.hidden
    gate = {k: pre[..., i * hsz : (i + 1) * hsz] for i, k in enumerate(fused.gates)}
    c = ad.sigmoid(gate["f"]) * state.c
    for d in fused.offsets:
        c = c + ad.sigmoid(gate[_neighbor_gate(d)]) * _shift(state.c, d)
    c = c + ad.sigmoid(gate["q"]) * ad.expand_dims(state.cg, 1)
    c = c + ad.sigmoid(gate["i"]) * ad.tanh(gate["c"])
    h = ad.sigmoid(gate["o"]) * ad.tanh(c)
    return h, c


def update_frame_states(state: EncoderState, poses, params, context_window=3):
    """One recurrent step for all frame states at once; returns ``(h, c)``."""
    poses = ad.as_tensor(poses)
    if poses.shape[:2] != state.h.shape[:2]:
        raise ShapeMismatch(f"poses {poses.shape} do not match states {state.h.shape}")
    fused = _Fused(params, context_window)
    return _frame_update(state, poses @ fused.U, fused)


def update_frame_state(j, state: EncoderState, poses, params, context_window=3):
    """Frame ``j`` (0-based) of :func:`update_frame_states`."""
    h, c = update_frame_states(state, poses, params, context_window)
    return h[:, j, :], c[:, j, :]


def temporal_attention(h):
    """Softmax weights of each frame state's dot product with the last one."""
    h = ad.as_tensor(h)
    scores = (h * h[:, -1:, :]).sum(axis=-1)
    alpha = ad.softmax(scores, axis=-1)
    context = (ad.expand_dims(alpha, -1) * h).sum(axis=1)
    return alpha, context


def update_global_state(state: EncoderState, params):
    """One recurrent step of the global state; returns ``(g, cg, alpha)``."""
    if state.c.shape != state.h.shape or state.g.shape != state.cg.shape:
        raise ShapeMismatch("inconsistent encoder state")
    alpha, context = temporal_attention(state.h)
    W = {k: _p(params, f"global.W_{k}") for k in GLOBAL_GATES}
    Z = {k: _p(params, f"global.Z_{k}") for k in GLOBAL_GATES}
    b = {k: _p(params, f"global.b_{k}") for k in GLOBAL_GATES}
    f_frames = ad.sigmoid(state.h @ W["f"] + ad.expand_dims(state.g @ Z["f"], 1) + b["f"])
    f_global = ad.sigmoid(context @ W["g"] + state.g @ Z["g"] + b["g"])
    o_global = ad.sigmoid(context @ W["o"] + state.g @ Z["o"] + b["o"])
    cg = (f_frames * state.c).sum(axis=1) + f_global * state.cg
    g = o_global * ad.tanh(cg)
    return g, cg, alpha


def encode(poses, attended, params, hyper: HyperParams):
    """Run ``hyper.recurrent_steps`` synchronous rounds from the attended init."""
    if hyper.recurrent_steps < 1:
        raise ValueError("recurrent_steps must be >= 1")
    poses = ad.as_tensor(poses)
    state = init_states(attended, params)
    fused = _Fused(params, hyper.context_window)
    p_u = poses @ fused.U  # constant across steps
    for _ in range(hyper.recurrent_steps):
        h, c = _frame_update(state, p_u, fused)
        g, cg, _ = update_global_state(state, params)
        state = EncoderState(h, c, g, cg)
    return state


# --------------------------------------------------------------------------
# decoder


def gru_cell(x, h, params, prefix):
    """``h' = (1 - z) * c + z * h`` with reset gate applied to ``h`` inside the candidate."""
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    W = {k: _p(params, f"{prefix}.W_{k}") for k in GRU_GATES}
    U = {k: _p(params, f"{prefix}.U_{k}") for k in GRU_GATES}
    b = {k: _p(params, f"{prefix}.b_{k}") for k in GRU_GATES}
    z = ad.sigmoid(x @ W["z"] + h @ U["z"] + b["z"])
    r = ad.sigmoid(x @ W["r"] + h @ U["r"] + b["r"])
    cand = ad.tanh(x @ W["c"] + (r * h) @ U["c"] + b["c"])
    return (1.0 - z) * cand + z * h


class _GRU:
    """:func:`gru_cell` with input and recurrent matrices fused once."""

    def __init__(self, params, prefix):
        self.Wx = ad.concat([_p(params, f"{prefix}.W_{k}") for k in GRU_GATES], axis=1)
        self.bx = ad.concat([_p(params, f"{prefix}.b_{k}") for k in GRU_GATES], axis=0)
        self.Uzr = ad.concat([_p(params, f"{prefix}.U_z"), _p(params, f"{prefix}.U_r")], axis=1)
        self.Uc = _p(params, f"{prefix}.U_c")
        self.hidden = self.Uc.shape[0]

    def __call__(self, x, h):
        n = self.hidden
        xw = x @ self.Wx + self.bx
        hu = h @ self.Uzr
        z = ad.sigmoid(xw[..., :n] + hu[..., :n])
        r = ad.sigmoid(xw[..., n : 2 * n] + hu[..., n:])
        cand = ad.tanh(xw[..., 2 * n :] + (r * h) @ self.Uc)
        return (1.0 - z) * cand + z * h


def decode(state: EncoderState, last_pose, params, steps):
    """Autoregressive rollout for ``steps`` frames; returns ``(batch, steps, dim)``."""
    if steps < 1:
        raise ValueError("decoder needs steps >= 1")
    layer1, layer2 = _GRU(params, "dec1"), _GRU(params, "dec2")
    w_out, b_out = _p(params, "out.W"), _p(params, "out.b")
    h1 = state.g
    h2 = state.h[:, -1, :] + state.g
    x = ad.as_tensor(last_pose)
    outputs = []
    for _ in range(steps):
        h1 = layer1(x, h1)
        h2 = layer2(h1, h2)
        x = h2 @ w_out + b_out
        outputs.append(x)
    return ad.stack(outputs, axis=1)


def forward(poses, attended, params, hyper: HyperParams, steps=None):
    """Encode the observed window and decode ``steps`` (default ``output_frames``) frames."""
    poses = ad.as_tensor(poses)
    state = encode(poses, attended, params, hyper)
    return decode(state, poses[:, -1, :], params, hyper.output_frames if steps is None else steps)


def as_leaves(params):
    """Wrap arrays as gradient-tracking tensors."""
    return {k: ad.Tensor(v, requires_grad=True) for k, v in params.items()}
