"""Dilated causal CNN encoder with a hand-written reverse pass.

Each of the ``num_layers`` hidden layers is

    h_{l+1} = leaky_relu(causal_conv_{2^l}(h_l)) + residual(h_l)

where ``residual`` is the identity, or a 1x1 convolution when the channel
count changes. A final causal convolution lifts to ``reduced_size``
channels, global max pooling over time gives a fixed vector, and a linear
layer maps it to ``out_dim``. All arithmetic is float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rogue_sensors.data import Dataset
from rogue_sensors.errors import ConfigError, DataError

CHECKPOINT_MAGIC = b"RSENC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int = 1
    hidden_channels: int = 40
    num_layers: int = 10
    kernel_size: int = 3
    reduced_size: int = 60
    out_dim: int = 2
    leaky_slope: float = 0.01

    def __post_init__(self):
        for name in ("in_channels", "hidden_channels", "num_layers", "kernel_size", "reduced_size", "out_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"encoder {name} must be a positive integer")
        if self.leaky_slope < 0:
            raise ConfigError("leaky_slope must be non-negative")

    def receptive_field(self) -> int:
        """Receptive field of the hidden stack (final conv excluded)."""
        return 1 + (self.kernel_size - 1) * (2**self.num_layers - 1)


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = cfg.in_channels
    for layer in range(cfg.num_layers):
        c_out = cfg.hidden_channels
        shapes[f"layer{layer}.conv.weight"] = (c_out, c_in, cfg.kernel_size)
        shapes[f"layer{layer}.conv.bias"] = (c_out,)
        if c_in != c_out:
            shapes[f"layer{layer}.res.weight"] = (c_out, c_in)
            shapes[f"layer{layer}.res.bias"] = (c_out,)
        c_in = c_out
    shapes["final.weight"] = (cfg.reduced_size, c_in, cfg.kernel_size)
    shapes["final.bias"] = (cfg.reduced_size,)
    shapes["fc.weight"] = (cfg.out_dim, cfg.reduced_size)
    shapes["fc.bias"] = (cfg.out_dim,)
    return shapes


@dataclass
class EncoderParams:
    cfg: EncoderConfig
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        expected = param_shapes(self.cfg)
        if list(self.tensors) != list(expected):
            raise ConfigError("parameter names do not match encoder config")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ConfigError(f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> EncoderParams:
        return EncoderParams(self.cfg, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors.values()])


def init_params(cfg: EncoderConfig, rng: np.random.Generator) -> EncoderParams:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return EncoderParams(cfg, tensors)


def _im2col(h: np.ndarray, kernel: int, dilation: int) -> np.ndarray:
    c, t = h.shape
    pad = (kernel - 1) * dilation
    hp = np.concatenate([np.zeros((c, pad)), h], axis=1) if pad else h
    cols = np.stack([hp[:, k * dilation : k * dilation + t] for k in range(kernel)], axis=1)
    return cols.reshape(c * kernel, t)


def _col2im(dcols: np.ndarray, c: int, t: int, kernel: int, dilation: int) -> np.ndarray:
    pad = (kernel - 1) * dilation
    dcols = dcols.reshape(c, kernel, t)
    dhp = np.zeros((c, t + pad))
    for k in range(kernel):
        dhp[:, k * dilation : k * dilation + t] += dcols[:, k]
    return dhp[:, pad:]


def _check_input(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("encoder input must be a 1-D sequence")
    if x.size == 0:
        raise DataError("encoder input is empty")
    if not np.all(np.isfinite(x)):
        raise DataError("encoder input contains non-finite values")
    return x


def forward_cached(p: EncoderParams, x) -> tuple[np.ndarray, dict]:
    """Forward pass that also returns the activations needed by :func:`backward`."""
    cfg = p.cfg
    w = p.tensors
    h = _check_input(x)[None, :]
    t = h.shape[1]
    slope = cfg.leaky_slope
    layers = []
    hidden = [h]
    for layer in range(cfg.num_layers):
        dil = 2**layer
        W = w[f"layer{layer}.conv.weight"]
        cols = _im2col(h, cfg.kernel_size, dil)
        pre = W.reshape(W.shape[0], -1) @ cols + w[f"layer{layer}.conv.bias"][:, None]
        act = np.where(pre > 0, pre, slope * pre)
        res_name = f"layer{layer}.res.weight"
        if res_name in w:
            res = w[res_name] @ h + w[f"layer{layer}.res.bias"][:, None]
        else:
            res = h
        layers.append({"h": h, "cols": cols, "pre": pre})
        h = act + res
        hidden.append(h)
    W = w["final.weight"]
    cols = _im2col(h, cfg.kernel_size, 1)
    feat = W.reshape(W.shape[0], -1) @ cols + w["final.bias"][:, None]
    arg = np.argmax(feat, axis=1)  # first maximal index on ties
    pooled = feat[np.arange(feat.shape[0]), arg]
    z = w["fc.weight"] @ pooled + w["fc.bias"]
    cache = {"T": t, "layers": layers, "hidden": hidden, "final_cols": cols,
             "final_feat": feat, "argmax": arg, "pooled": pooled}
    return z, cache


def forward(p: EncoderParams, x) -> np.ndarray:
    return forward_cached(p, x)[0]


def backward(p: EncoderParams, cache: dict, dz, grads: dict[str, np.ndarray] | None = None):
    """Accumulate d(loss)/d(theta) into ``grads`` given d(loss)/dz for one sequence."""
    cfg = p.cfg
    w = p.tensors
    dz = np.asarray(dz, dtype=np.float64)
    if dz.shape != (cfg.out_dim,):
        raise DataError(f"upstream gradient has shape {dz.shape}, expected ({cfg.out_dim},)")
    if grads is None:
        grads = p.zeros_like()
    t = cache["T"]

    grads["fc.weight"] += np.outer(dz, cache["pooled"])
    grads["fc.bias"] += dz
    dpooled = w["fc.weight"].T @ dz
    dfeat = np.zeros_like(cache["final_feat"])
    dfeat[np.arange(dfeat.shape[0]), cache["argmax"]] = dpooled

    W = w["final.weight"]
    grads["final.weight"] += (dfeat @ cache["final_cols"].T).reshape(W.shape)
    grads["final.bias"] += dfeat.sum(axis=1)
    dh = _col2im(W.reshape(W.shape[0], -1).T @ dfeat, W.shape[1], t, cfg.kernel_size, 1)

    for layer in reversed(range(cfg.num_layers)):
        rec = cache["layers"][layer]
        W = w[f"layer{layer}.conv.weight"]
        dpre = np.where(rec["pre"] > 0, dh, cfg.leaky_slope * dh)
        grads[f"layer{layer}.conv.weight"] += (dpre @ rec["cols"].T).reshape(W.shape)
        grads[f"layer{layer}.conv.bias"] += dpre.sum(axis=1)
        dh_in = _col2im(W.reshape(W.shape[0], -1).T @ dpre, W.shape[1], t, cfg.kernel_size, 2**layer)
        res_name = f"layer{layer}.res.weight"
        if res_name in w:
            grads[res_name] += dh @ rec["h"].T
            grads[f"layer{layer}.res.bias"] += dh.sum(axis=1)
            dh_in += w[res_name].T @ dh
        else:
            dh_in += dh
        dh = dh_in
    return grads


def embed_all(p: EncoderParams, d: Dataset) -> np.ndarray:
    """One embedding row per series, in dataset order."""
    return np.stack([forward(p, v) for v in d.values])


def save_checkpoint(p: EncoderParams, path: str | Path) -> None:
    """Binary layout: magic, version, JSON header length, JSON header, raw <f8 tensors."""
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(p.cfg),
        "tensors": [[name, list(t.shape)] for name, t in p.tensors.items()],
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(raw)))
        fh.write(raw)
        for t in p.tensors.values():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> EncoderParams:
    blob = Path(path).read_bytes()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise DataError(f"{path}: not an encoder checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    version, hlen = struct.unpack_from("<II", blob, pos)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    cfg = EncoderConfig(**header["config"])
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).astype(np.float64)
        tensors[name] = arr.reshape(shape)
        pos += 8 * count
    if pos != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return EncoderParams(cfg, tensors)
