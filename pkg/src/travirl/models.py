"""Differentiable reward models with hand-written reverse-mode gradients.

Both models map per-cell terrain features plus a fixed-length inertial
window to a path-reward map and a goal-reward map:

* ``LinearReward`` scores each cell with an affine function of a 15-dim
  feature vector: the 5 terrain channels at the cell, 8 summary statistics
  of the inertial window (per-channel means plus one accelerometer and one
  gyroscope standard deviation), and 2 positional ramp values.
* ``FusionNet`` is a small two-branch convolutional network: a 1D-conv
  inertial branch (two conv/conv/max-pool blocks, then a fully connected
  layer to a 16-dim embedding) and a 2D-conv terrain branch (three 3x3
  convolutions with one additive skip), fused with 2 positional ramp
  channels through a 3x3 and a 1x1 convolution into the two output maps.

Every layer keeps the activations needed for an exact backward pass;
gradients accumulate into a flat ``ParamVector`` so the training loop can
treat both models identically.  All math runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelStateError, NumericError, ShapeError

N_ENV_CHANNELS = 5
N_IMU_CHANNELS = 6
LINEAR_FEATURES = 15
EMBED_DIM = 16


@dataclass
class FeatureStack:
    """Per-cell terrain channels, shape (5, rows, cols): elevation [m],
    elevation variance [m^2], red, green, blue in [0, 1]."""

    planes: np.ndarray

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3 or self.planes.shape[0] != N_ENV_CHANNELS:
            raise ShapeError(f"feature stack must be (5, rows, cols), got {self.planes.shape}")
        if not np.isfinite(self.planes).all():
            raise NumericError("feature stack contains non-finite values")
        if (self.planes[1] < 0).any():
            raise NumericError("variance channel must be nonnegative")

    @property
    def rows(self) -> int:
        return self.planes.shape[1]

    @property
    def cols(self) -> int:
        return self.planes.shape[2]

    @property
    def elevation(self) -> np.ndarray:
        return self.planes[0]

    @property
    def variance(self) -> np.ndarray:
        return self.planes[1]

    @property
    def color(self) -> np.ndarray:
        return self.planes[2:5]


@dataclass
class ImuWindow:
    """Fixed-length inertial window, shape (T, 6): three accelerometer axes
    [m/s^2] then three gyroscope axes [rad/s].  T >= 8 so the two pooling
    stages of the inertial branch keep a nonzero length."""

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != N_IMU_CHANNELS:
            raise ShapeError(f"imu window must be (T, 6), got {self.samples.shape}")
        if self.samples.shape[0] < 8:
            raise ShapeError(f"imu window needs T >= 8, got T={self.samples.shape[0]}")
        if not np.isfinite(self.samples).all():
            raise NumericError("imu window contains non-finite values")

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass
class RewardMaps:
    """Per-cell path and goal reward fields, each (rows, cols).  The
    traversability cost map is ``-path``."""

    path: np.ndarray
    goal: np.ndarray

    def __post_init__(self):
        self.path = np.asarray(self.path, dtype=np.float64)
        self.goal = np.asarray(self.goal, dtype=np.float64)
        if self.path.shape != self.goal.shape or self.path.ndim != 2:
            raise ShapeError(
                f"reward maps must share a 2D shape, got {self.path.shape}/{self.goal.shape}"
            )
        if not (np.isfinite(self.path).all() and np.isfinite(self.goal).all()):
            raise NumericError("reward maps contain non-finite values")


class ParamVector:
    """Flat parameter storage with a parallel gradient accumulator.

    ``manifest`` is an ordered list of (name, shape); named views into the
    flat arrays stay valid across in-place updates, so an SGD step on
    ``values`` is immediately visible to the layers.
    """

    def __init__(self, manifest):
        self.manifest = [(name, tuple(shape)) for name, shape in manifest]
        self._offsets = {}
        total = 0
        for name, shape in self.manifest:
            size = int(np.prod(shape)) if shape else 1
            self._offsets[name] = (total, size, shape)
            total += size
        self.values = np.zeros(total, dtype=np.float64)
        self.grad = np.zeros(total, dtype=np.float64)

    @property
    def size(self) -> int:
        return self.values.size

    def view(self, name: str) -> np.ndarray:
        off, size, shape = self._offsets[name]
        return self.values[off : off + size].reshape(shape)

    def grad_view(self, name: str) -> np.ndarray:
        off, size, shape = self._offsets[name]
        return self.grad[off : off + size].reshape(shape)

    def zero_grad(self) -> None:
        self.grad[:] = 0.0

    def copy(self) -> "ParamVector":
        out = ParamVector(self.manifest)
        out.values[:] = self.values
        out.grad[:] = self.grad
        return out

    def check_finite(self) -> None:
        if not np.isfinite(self.values).all():
            raise NumericError("parameters contain non-finite values")
        if not np.isfinite(self.grad).all():
            raise NumericError("gradient contains non-finite values")


def position_ramps(rows: int, cols: int):
    """Two positional planes: row and column indices mapped linearly onto
    [-1, 1] (a single row or column maps to 0)."""
    rr = np.linspace(-1.0, 1.0, rows) if rows > 1 else np.zeros(1)
    cc = np.linspace(-1.0, 1.0, cols) if cols > 1 else np.zeros(1)
    return np.broadcast_to(rr[:, None], (rows, cols)).copy(), np.broadcast_to(
        cc[None, :], (rows, cols)
    ).copy()


def _glorot_fill(rng, param: np.ndarray, fan_in: int, fan_out: int) -> None:
    scale = np.sqrt(6.0 / (fan_in + fan_out))
    param[:] = rng.uniform(-scale, scale, size=param.shape)


def _fans(shape) -> tuple[int, int]:
    if len(shape) == 1:  # weight vector of a scalar head
        return shape[0], 1
    if len(shape) == 2:  # fully connected (out, in)
        return shape[1], shape[0]
    receptive = int(np.prod(shape[2:]))
    return shape[1] * receptive, shape[0] * receptive


def param_init(model, seed: int) -> ParamVector:
    """Deterministically (re)initialize a model in place: Glorot-uniform
    weights, zero biases.  Returns the model's ParamVector."""
    rng = np.random.default_rng(seed)
    for name, shape in model.params.manifest:
        view = model.params.view(name)
        if name.endswith("_b"):
            view[:] = 0.0
        else:
            fan_in, fan_out = _fans(shape)
            _glorot_fill(rng, view, fan_in, fan_out)
    model.params.zero_grad()
    return model.params


# ---------------------------------------------------------------------------
# layer primitives (forward returns what backward needs)
# ---------------------------------------------------------------------------


def _conv1d_same(x, w, b):
    """x (C_in, L), w (C_out, C_in, K) with K odd -> ((C_out, L), ctx).

    Zero ('same') padding; the flattened patch matrix is kept in ctx so the
    backward pass is a single matmul.
    """
    c_in, length = x.shape
    c_out, _, k = w.shape
    pad = k // 2
    xp = np.zeros((c_in, length + 2 * pad))
    xp[:, pad : pad + length] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (C, L, K)
    patches = win.transpose(0, 2, 1).reshape(c_in * k, length)
    out = w.reshape(c_out, -1) @ patches
    out += b[:, None]
    return out, (xp.shape, patches)


def _conv1d_same_backward(g, w, ctx, length):
    xp_shape, patches = ctx
    c_out, c_in, k = w.shape
    pad = k // 2
    db = g.sum(axis=1)
    dw = (g @ patches.T).reshape(c_out, c_in, k)
    wt = (w.reshape(c_out, -1).T @ g).reshape(c_in, k, length)
    dxp = np.zeros(xp_shape)
    for i in range(k):
        dxp[:, i : i + length] += wt[:, i]
    return dw, db, dxp[:, pad : pad + length]


def _conv2d_same(x, w, b):
    """x (C_in, H, W), w (C_out, C_in, K, K) with K odd -> ((C_out, H, W), ctx)."""
    c_in, h, wd = x.shape
    c_out, _, k, _ = w.shape
    pad = k // 2
    if pad:
        xp = np.zeros((c_in, h + 2 * pad, wd + 2 * pad))
        xp[:, pad : pad + h, pad : pad + wd] = x
        win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
        patches = win.transpose(0, 3, 4, 1, 2).reshape(c_in * k * k, h * wd)
    else:  # 1x1 kernel
        xp = x
        patches = xp.reshape(c_in, h * wd)
    out = w.reshape(c_out, -1) @ patches
    out += b[:, None]
    return out.reshape(c_out, h, wd), (xp.shape, patches)


def _conv2d_same_backward(g, w, ctx, h, wd):
    xp_shape, patches = ctx
    c_out, c_in, k, _ = w.shape
    pad = k // 2
    gf = g.reshape(c_out, h * wd)
    db = gf.sum(axis=1)
    dw = (gf @ patches.T).reshape(c_out, c_in, k, k)
    wt = (w.reshape(c_out, -1).T @ gf).reshape(c_in, k, k, h, wd)
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + h, j : j + wd] += wt[:, i, j]
    if pad:
        return dw, db, dxp[:, pad : pad + h, pad : pad + wd]
    return dw, db, dxp


def _maxpool2(x):
    """Pairwise 1D max pool, kernel 2 stride 2; odd trailing sample dropped.
    Ties keep the earlier index."""
    c, length = x.shape
    half = length // 2
    pairs = x[:, : 2 * half].reshape(c, half, 2)
    idx = pairs.argmax(axis=2)
    out = np.take_along_axis(pairs, idx[..., None], axis=2)[..., 0]
    return out, idx


def _maxpool2_backward(g, idx, length):
    c, half = g.shape
    dx = np.zeros((c, length))
    view = dx[:, : 2 * half].reshape(c, half, 2)
    np.put_along_axis(view, idx[..., None], g[..., None], axis=2)
    return dx


def _dropout_scale(n: int, rate: float, rng) -> np.ndarray:
    """Inverted-dropout channel multiplier: kept channels scaled by
    1/(1-rate), dropped ones zero."""
    if rate <= 0.0:
        return np.ones(n)
    if rng is None:
        raise ShapeError("dropout requires a random generator")
    keep = rng.random(n) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class LinearReward:
    """Affine per-cell reward heads over a 15-dim feature vector."""

    kind = "linear"

    def __init__(self, rows: int, cols: int, imu_len: int):
        if imu_len < 8:
            raise ShapeError(f"imu_len must be >= 8, got {imu_len}")
        self.rows, self.cols, self.imu_len = rows, cols, imu_len
        self.params = ParamVector(
            [
                ("path_w", (LINEAR_FEATURES,)),
                ("path_b", (1,)),
                ("goal_w", (LINEAR_FEATURES,)),
                ("goal_b", (1,)),
            ]
        )
        pr, pc = position_ramps(rows, cols)
        self._pos = np.stack([pr.ravel(), pc.ravel()], axis=1)
        self._cache = None

    def _features(self, features: FeatureStack, imu: ImuWindow) -> np.ndarray:
        n = self.rows * self.cols
        phi = np.empty((n, LINEAR_FEATURES))
        phi[:, 0:5] = features.planes.reshape(N_ENV_CHANNELS, n).T
        phi[:, 5:11] = imu.samples.mean(axis=0)
        # block spreads with per-axis means removed, so a constant offset
        # (gravity) does not masquerade as vibration
        phi[:, 11] = np.sqrt(imu.samples[:, :3].var(axis=0).mean())
        phi[:, 12] = np.sqrt(imu.samples[:, 3:].var(axis=0).mean())
        phi[:, 13:15] = self._pos
        return phi

    def _check_inputs(self, features: FeatureStack, imu: ImuWindow) -> None:
        if features.rows != self.rows or features.cols != self.cols:
            raise ShapeError(
                f"features are {features.rows}x{features.cols}, model expects "
                f"{self.rows}x{self.cols}"
            )
        if len(imu) != self.imu_len:
            raise ShapeError(f"imu window has T={len(imu)}, model expects {self.imu_len}")

    def forward(self, features: FeatureStack, imu: ImuWindow, dropout_rate=0.0, rng=None):
        self._check_inputs(features, imu)
        phi = self._features(features, imu)
        if dropout_rate > 0:
            phi = phi * _dropout_scale(LINEAR_FEATURES, dropout_rate, rng)[None, :]
        p = self.params
        path = phi @ p.view("path_w") + p.view("path_b")[0]
        goal = phi @ p.view("goal_w") + p.view("goal_b")[0]
        self._cache = {"phi": phi}
        return RewardMaps(path.reshape(self.rows, self.cols), goal.reshape(self.rows, self.cols))

    def pop_cache(self):
        cache, self._cache = self._cache, None
        if cache is None:
            raise ModelStateError("no retained activations; call forward first")
        return cache

    def backward(self, d_path, d_goal, cache=None) -> None:
        """Accumulate d(loss)/d(theta) into the gradient buffer given the
        loss gradient with respect to both reward maps."""
        if cache is None:
            cache = self.pop_cache()
        phi = cache["phi"]
        up = np.asarray(d_path, dtype=np.float64).reshape(-1)
        ug = np.asarray(d_goal, dtype=np.float64).reshape(-1)
        if up.size != phi.shape[0] or ug.size != phi.shape[0]:
            raise ShapeError("upstream gradient does not match the reward map shape")
        p = self.params
        p.grad_view("path_w")[:] += phi.T @ up
        p.grad_view("path_b")[:] += up.sum()
        p.grad_view("goal_w")[:] += phi.T @ ug
        p.grad_view("goal_b")[:] += ug.sum()


class FusionNet:
    """Two-branch convolutional reward network (see module docstring)."""

    kind = "fusion"

    def __init__(self, rows: int, cols: int, imu_len: int, use_position: bool = True):
        if imu_len < 8:
            raise ShapeError(f"imu_len must be >= 8, got {imu_len}")
        self.rows, self.cols, self.imu_len = rows, cols, imu_len
        self.use_position = use_position
        self._l1 = imu_len // 2
        self._l2 = self._l1 // 2
        fc_in = 32 * self._l2
        self.params = ParamVector(
            [
                ("imu_conv1_w", (16, 6, 5)),
                ("imu_conv1_b", (16,)),
                ("imu_conv2_w", (16, 16, 5)),
                ("imu_conv2_b", (16,)),
                ("imu_conv3_w", (32, 16, 5)),
                ("imu_conv3_b", (32,)),
                ("imu_conv4_w", (32, 32, 5)),
                ("imu_conv4_b", (32,)),
                ("imu_fc_w", (EMBED_DIM, fc_in)),
                ("imu_fc_b", (EMBED_DIM,)),
                ("env_conv1_w", (16, 5, 3, 3)),
                ("env_conv1_b", (16,)),
                ("env_conv2_w", (16, 16, 3, 3)),
                ("env_conv2_b", (16,)),
                ("env_conv3_w", (16, 16, 3, 3)),
                ("env_conv3_b", (16,)),
                ("fuse_conv_w", (16, 34, 3, 3)),
                ("fuse_conv_b", (16,)),
                ("head_w", (2, 16, 1, 1)),
                ("head_b", (2,)),
            ]
        )
        pr, pc = position_ramps(rows, cols)
        if use_position:
            self._pos = np.stack([pr, pc])
        else:
            self._pos = np.zeros((2, rows, cols))
        self._cache = None

    def _check_inputs(self, features: FeatureStack, imu: ImuWindow) -> None:
        if features.rows != self.rows or features.cols != self.cols:
            raise ShapeError(
                f"features are {features.rows}x{features.cols}, model expects "
                f"{self.rows}x{self.cols}"
            )
        if len(imu) != self.imu_len:
            raise ShapeError(f"imu window has T={len(imu)}, model expects {self.imu_len}")

    def forward(self, features: FeatureStack, imu: ImuWindow, dropout_rate=0.0, rng=None):
        self._check_inputs(features, imu)
        p = self.params
        cache = {}

        # inertial branch: (6, T) -> 16-dim embedding
        x = imu.samples.T
        z1, xp1 = _conv1d_same(x, p.view("imu_conv1_w"), p.view("imu_conv1_b"))
        a1 = np.maximum(z1, 0.0)
        z2, xp2 = _conv1d_same(a1, p.view("imu_conv2_w"), p.view("imu_conv2_b"))
        a2 = np.maximum(z2, 0.0)
        pool1, idx1 = _maxpool2(a2)
        z3, xp3 = _conv1d_same(pool1, p.view("imu_conv3_w"), p.view("imu_conv3_b"))
        a3 = np.maximum(z3, 0.0)
        z4, xp4 = _conv1d_same(a3, p.view("imu_conv4_w"), p.view("imu_conv4_b"))
        a4 = np.maximum(z4, 0.0)
        pool2, idx2 = _maxpool2(a4)
        flat = pool2.reshape(-1)
        emb = p.view("imu_fc_w") @ flat + p.view("imu_fc_b")

        # terrain branch: three 3x3 convs, additive skip from the first
        # activation into the third pre-activation
        y1, ep1 = _conv2d_same(features.planes, p.view("env_conv1_w"), p.view("env_conv1_b"))
        e1 = np.maximum(y1, 0.0)
        y2, ep2 = _conv2d_same(e1, p.view("env_conv2_w"), p.view("env_conv2_b"))
        e2 = np.maximum(y2, 0.0)
        y3, ep3 = _conv2d_same(e2, p.view("env_conv3_w"), p.view("env_conv3_b"))
        y3s = y3 + e1
        e3 = np.maximum(y3s, 0.0)

        # fusion: terrain channels + broadcast embedding + position ramps
        emb_maps = np.broadcast_to(emb[:, None, None], (EMBED_DIM, self.rows, self.cols))
        fused_in = np.concatenate([e3, emb_maps, self._pos], axis=0)
        zf, fp = _conv2d_same(fused_in, p.view("fuse_conv_w"), p.view("fuse_conv_b"))
        af = np.maximum(zf, 0.0)
        if dropout_rate > 0:
            drop = _dropout_scale(16, dropout_rate, rng)
            afd = af * drop[:, None, None]
        else:
            drop = None
            afd = af
        out, hp = _conv2d_same(afd, p.view("head_w"), p.view("head_b"))

        cache.update(
            x_len=x.shape[1], xp1=xp1, z1=z1, xp2=xp2, z2=z2, idx1=idx1, a2_len=a2.shape[1],
            xp3=xp3, z3=z3, xp4=xp4, z4=z4, idx2=idx2, a4_len=a4.shape[1], flat=flat,
            ep1=ep1, y1=y1, ep2=ep2, y2=y2, ep3=ep3, y3s=y3s, fp=fp, zf=zf, drop=drop, hp=hp,
        )
        self._cache = cache
        return RewardMaps(out[0], out[1])

    def pop_cache(self):
        cache, self._cache = self._cache, None
        if cache is None:
            raise ModelStateError("no retained activations; call forward first")
        return cache

    def backward(self, d_path, d_goal, cache=None) -> None:
        if cache is None:
            cache = self.pop_cache()
        p = self.params
        h, wd = self.rows, self.cols
        d_path = np.asarray(d_path, dtype=np.float64)
        d_goal = np.asarray(d_goal, dtype=np.float64)
        if d_path.shape != (h, wd) or d_goal.shape != (h, wd):
            raise ShapeError("upstream gradient does not match the reward map shape")
        g_out = np.stack([d_path, d_goal])

        dw, db, d_afd = _conv2d_same_backward(g_out, p.view("head_w"), cache["hp"], h, wd)
        p.grad_view("head_w")[:] += dw
        p.grad_view("head_b")[:] += db

        drop = cache["drop"]
        d_af = d_afd if drop is None else d_afd * drop[:, None, None]
        d_zf = d_af * (cache["zf"] > 0.0)
        dw, db, d_fused = _conv2d_same_backward(d_zf, p.view("fuse_conv_w"), cache["fp"], h, wd)
        p.grad_view("fuse_conv_w")[:] += dw
        p.grad_view("fuse_conv_b")[:] += db

        d_e3 = d_fused[:16]
        d_emb = d_fused[16 : 16 + EMBED_DIM].sum(axis=(1, 2))
        # position ramps carry no parameters

        d_y3s = d_e3 * (cache["y3s"] > 0.0)
        dw, db, d_e2 = _conv2d_same_backward(d_y3s, p.view("env_conv3_w"), cache["ep3"], h, wd)
        p.grad_view("env_conv3_w")[:] += dw
        p.grad_view("env_conv3_b")[:] += db
        d_e1 = d_y3s.copy()  # skip connection
        d_y2 = d_e2 * (cache["y2"] > 0.0)
        dw, db, d_e1b = _conv2d_same_backward(d_y2, p.view("env_conv2_w"), cache["ep2"], h, wd)
        p.grad_view("env_conv2_w")[:] += dw
        p.grad_view("env_conv2_b")[:] += db
        d_e1 += d_e1b
        d_y1 = d_e1 * (cache["y1"] > 0.0)
        dw, db, _ = _conv2d_same_backward(d_y1, p.view("env_conv1_w"), cache["ep1"], h, wd)
        p.grad_view("env_conv1_w")[:] += dw
        p.grad_view("env_conv1_b")[:] += db

        p.grad_view("imu_fc_w")[:] += np.outer(d_emb, cache["flat"])
        p.grad_view("imu_fc_b")[:] += d_emb
        d_flat = p.view("imu_fc_w").T @ d_emb
        d_pool2 = d_flat.reshape(32, self._l2)
        d_a4 = _maxpool2_backward(d_pool2, cache["idx2"], cache["a4_len"])
        d_z4 = d_a4 * (cache["z4"] > 0.0)
        dw, db, d_a3 = _conv1d_same_backward(d_z4, p.view("imu_conv4_w"), cache["xp4"], cache["a4_len"])
        p.grad_view("imu_conv4_w")[:] += dw
        p.grad_view("imu_conv4_b")[:] += db
        d_z3 = d_a3 * (cache["z3"] > 0.0)
        dw, db, d_pool1 = _conv1d_same_backward(d_z3, p.view("imu_conv3_w"), cache["xp3"], cache["a4_len"])
        p.grad_view("imu_conv3_w")[:] += dw
        p.grad_view("imu_conv3_b")[:] += db
        d_a2 = _maxpool2_backward(d_pool1, cache["idx1"], cache["a2_len"])
        d_z2 = d_a2 * (cache["z2"] > 0.0)
        dw, db, d_a1 = _conv1d_same_backward(d_z2, p.view("imu_conv2_w"), cache["xp2"], cache["a2_len"])
        p.grad_view("imu_conv2_w")[:] += dw
        p.grad_view("imu_conv2_b")[:] += db
        d_z1 = d_a1 * (cache["z1"] > 0.0)
        dw, db, _ = _conv1d_same_backward(d_z1, p.view("imu_conv1_w"), cache["xp1"], cache["x_len"])
        p.grad_view("imu_conv1_w")[:] += dw
        p.grad_view("imu_conv1_b")[:] += db


def make_model(kind: str, rows: int, cols: int, imu_len: int):
    if kind == "linear":
        return LinearReward(rows, cols, imu_len)
    if kind == "fusion":
        return FusionNet(rows, cols, imu_len)
    raise ShapeError(f"unknown model kind {kind!r}")
