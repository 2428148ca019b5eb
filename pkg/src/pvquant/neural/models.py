"""MLP, LSTM and the two encoder-decoder networks.

Every network maps a flat weather block (per horizon step: irradiance then
temperature) and, optionally, a past-PV window to ``n_output = T * Q``
normalized quantile values, reshaped row-major to (T, Q).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import QuantileLevels, QuantileMatrix, enforce_monotonicity
from ..errors import ShapeMismatch
from .layers import dense_backward, dense_forward_cached, lstm_backward, lstm_forward

WEATHER_CHANNELS = 2


class Architecture(str, enum.Enum):
    MLP = "MLP"
    LSTM = "LSTM"
    ED1 = "ED1"
    ED2 = "ED2"

    @classmethod
    def parse(cls, name: str) -> "Architecture":
        key = name.strip().upper().replace("-", "").replace("_", "")
        return cls(key)


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "dense" | "lstm"
    input_width: int
    output_width: int
    activation: str = "identity"

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ValueError(f"layer widths must be >= 1: {self}")
        if self.kind not in ("dense", "lstm"):
            raise ValueError(f"unknown layer kind {self.kind!r}")


def _tdiv(a: int, b: int) -> int:
    """Integer division truncating toward zero."""
    q = abs(a) // b
    return q if a >= 0 else -q


@dataclass(frozen=True)
class ModelSpec:
    architecture: Architecture
    n_input: int  # width of the first layer's flat input (weather, plus past PV for an intraday MLP)
    n_output: int
    n_steps: int
    n_quantiles: int
    past_input_width: int = 0
    layers: tuple[LayerSpec, ...] = ()

    @property
    def n_weather(self) -> int:
        return self.n_steps * WEATHER_CHANNELS

    @property
    def mlp_uses_past(self) -> bool:
        return self.architecture is Architecture.MLP and self.past_input_width > 0

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture.value,
            "n_input": self.n_input,
            "n_output": self.n_output,
            "n_steps": self.n_steps,
            "n_quantiles": self.n_quantiles,
            "past_input_width": self.past_input_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return build_spec(
            Architecture(d["architecture"]), d["n_steps"], d["n_quantiles"], d.get("past_input_width", 0)
        )


def build_spec(architecture, n_steps: int, n_quantiles: int, past_input_width: int = 0) -> ModelSpec:
    """Size every layer from the input/output widths.

    MLP hidden width ``n_in + (n_out - n_in)/2``; LSTM units
    ``n_in + (n_out - n_in)/3`` then a dense layer of ``n_in + 2(n_out - n_in)/3``;
    encoder units ``2 * past_input_width``; ED-1 decoder width ``n_out/2``; ED-2
    decoder LSTM as wide as the encoder, then a dense layer of ``n_out/2``.
    Every network ends with a linear layer of width ``n_out``.
    """
    arch = Architecture(architecture) if not isinstance(architecture, Architecture) else architecture
    n_weather = n_steps * WEATHER_CHANNELS
    n_out = n_steps * n_quantiles
    if arch is Architecture.MLP:
        n_in = n_weather + past_input_width
        hidden = n_in + _tdiv(n_out - n_in, 2)
        layers = (LayerSpec("dense", n_in, hidden, "relu"), LayerSpec("dense", hidden, n_out))
        return ModelSpec(arch, n_in, n_out, n_steps, n_quantiles, past_input_width, layers)
    if arch is Architecture.LSTM:
        n_in = n_weather
        units = n_in + _tdiv(n_out - n_in, 3)
        ff = n_in + _tdiv(2 * (n_out - n_in), 3)
        layers = (
            LayerSpec("lstm", WEATHER_CHANNELS, units),
            LayerSpec("dense", units, ff, "relu"),
            LayerSpec("dense", ff, n_out),
        )
        return ModelSpec(arch, n_in, n_out, n_steps, n_quantiles, 0, layers)
    if past_input_width < 1:
        raise ValueError("encoder-decoder models need a past input window")
    enc = 2 * past_input_width
    head = max(n_out // 2, 1)
    if arch is Architecture.ED1:
        layers = (
            LayerSpec("lstm", 1, enc),
            LayerSpec("dense", enc + n_weather, head, "relu"),
            LayerSpec("dense", head, n_out),
        )
    else:
        layers = (
            LayerSpec("lstm", 1, enc),
            LayerSpec("lstm", enc + WEATHER_CHANNELS, enc),
            LayerSpec("dense", enc, head, "relu"),
            LayerSpec("dense", head, n_out),
        )
    return ModelSpec(arch, n_weather, n_out, n_steps, n_quantiles, past_input_width, layers)


def _param_shapes(spec: ModelSpec) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every parameter, in a fixed order."""
    out = []
    dense_i = lstm_i = 0
    for layer in spec.layers:
        if layer.kind == "dense":
            p = f"dense{dense_i}"
            out.append((f"{p}.W", (layer.input_width, layer.output_width), layer.input_width))
            out.append((f"{p}.b", (layer.output_width,), layer.input_width))
            dense_i += 1
        else:
            p = f"lstm{lstm_i}"
            u = layer.output_width
            out.append((f"{p}.Wx", (layer.input_width, 4 * u), u))
            out.append((f"{p}.Wh", (u, 4 * u), u))
            out.append((f"{p}.b", (4 * u,), u))
            lstm_i += 1
    return out


class Network:
    """A sized network with a parameter dictionary and explicit forward/backward."""

    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=np.float64, params: Optional[dict] = None):
        self.spec = spec
        self.seed = seed
        if params is None:
            params = self._init_params(np.random.default_rng(seed))
        self.params = {k: np.asarray(v, dtype=dtype) for k, v in params.items()}

    def _init_params(self, rng) -> dict:
        params = {}
        for name, shape, fan_in in _param_shapes(self.spec):
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
            if name.startswith("lstm") and name.endswith(".b"):
                u = shape[0] // 4
                params[name][u : 2 * u] = 1.0
        return params

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def astype(self, dtype) -> "Network":
        return Network(self.spec, self.seed, dtype, self.params)

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    # -- input handling --------------------------------------------------
    def _prepare(self, weather, past):
        spec = self.spec
        w = np.asarray(weather, dtype=self.dtype)
        if w.ndim == 1:
            w = w[None]
        if w.shape[1] != spec.n_weather:
            raise ShapeMismatch(f"expected {spec.n_weather} weather features, got {w.shape[1]}")
        if spec.past_input_width:
            if past is None:
                p = np.zeros((w.shape[0], spec.past_input_width), self.dtype)
            else:
                p = np.asarray(past, dtype=self.dtype)
                if p.ndim == 1:
                    p = p[None]
                if p.shape != (w.shape[0], spec.past_input_width):
                    raise ShapeMismatch(
                        f"expected past window ({w.shape[0]}, {spec.past_input_width}), got {p.shape}"
                    )
        else:
            p = None
        return w, p

    # -- forward / backward ----------------------------------------------
    def forward(self, weather, past=None):
        """Flat output (B, n_output) and the cache needed by :meth:`backward`."""
        w, p = self._prepare(weather, past)
        arch = self.spec.architecture
        P = self.params
        if arch is Architecture.MLP:
            x = np.concatenate([w, p], axis=1) if p is not None else w
            a1, c1 = dense_forward_cached(P["dense0.W"], P["dense0.b"], x, "relu")
            out, c2 = dense_forward_cached(P["dense1.W"], P["dense1.b"], a1)
            return out, (c1, c2)
        if arch is Architecture.LSTM:
            seq = w.reshape(w.shape[0], self.spec.n_steps, 2)
            _, (h, _), lc = lstm_forward(P["lstm0.Wx"], P["lstm0.Wh"], P["lstm0.b"], seq)
            a1, c1 = dense_forward_cached(P["dense0.W"], P["dense0.b"], h, "relu")
            out, c2 = dense_forward_cached(P["dense1.W"], P["dense1.b"], a1)
            return out, (lc, c1, c2)
        enc_seq = p[:, :, None]
        _, (h_enc, c_enc), ec = lstm_forward(P["lstm0.Wx"], P["lstm0.Wh"], P["lstm0.b"], enc_seq)
        if arch is Architecture.ED1:
            x = np.concatenate([h_enc, w], axis=1)
            a1, c1 = dense_forward_cached(P["dense0.W"], P["dense0.b"], x, "relu")
            out, c2 = dense_forward_cached(P["dense1.W"], P["dense1.b"], a1)
            return out, (ec, c1, c2)
        B, T = w.shape[0], self.spec.n_steps
        ctx = np.broadcast_to(h_enc[:, None, :], (B, T, h_enc.shape[1]))
        dec_seq = np.concatenate([ctx, w.reshape(B, T, 2)], axis=2)
        _, (h_dec, _), dc = lstm_forward(
            P["lstm1.Wx"], P["lstm1.Wh"], P["lstm1.b"], dec_seq, h_enc, c_enc
        )
        a1, c1 = dense_forward_cached(P["dense0.W"], P["dense0.b"], h_dec, "relu")
        out, c2 = dense_forward_cached(P["dense1.W"], P["dense1.b"], a1)
        return out, (ec, dc, c1, c2)

    def backward(self, cache, dout) -> dict:
        """Gradients of ``sum(dout * out)`` with respect to every parameter."""
        arch = self.spec.architecture
        P = self.params
        g = {}

        def head(c1, c2):
            da1, g["dense1.W"], g["dense1.b"] = dense_backward(P["dense1.W"], c2, dout)
            dx, g["dense0.W"], g["dense0.b"] = dense_backward(P["dense0.W"], c1, da1, "relu")
            return dx

        if arch is Architecture.MLP:
            head(*cache)
        elif arch is Architecture.LSTM:
            lc, c1, c2 = cache
            dh = head(c1, c2)
            _, _, _, g["lstm0.Wx"], g["lstm0.Wh"], g["lstm0.b"] = lstm_backward(
                P["lstm0.Wx"], P["lstm0.Wh"], lc, dh_last=dh
            )
        elif arch is Architecture.ED1:
            ec, c1, c2 = cache
            dx = head(c1, c2)
            U = P["lstm0.Wh"].shape[0]
            _, _, _, g["lstm0.Wx"], g["lstm0.Wh"], g["lstm0.b"] = lstm_backward(
                P["lstm0.Wx"], P["lstm0.Wh"], ec, dh_last=np.ascontiguousarray(dx[:, :U])
            )
        else:
            ec, dc, c1, c2 = cache
            dh_dec = head(c1, c2)
            dseq, dh0, dc0, g["lstm1.Wx"], g["lstm1.Wh"], g["lstm1.b"] = lstm_backward(
                P["lstm1.Wx"], P["lstm1.Wh"], dc, dh_last=dh_dec
            )
            U = P["lstm0.Wh"].shape[0]
            dh_enc = dh0 + dseq[:, :, :U].sum(axis=1)
            _, _, _, g["lstm0.Wx"], g["lstm0.Wh"], g["lstm0.b"] = lstm_backward(
                P["lstm0.Wx"], P["lstm0.Wh"], ec, dh_last=dh_enc, dc_last=dc0
            )
        return {k: g[k] for k in P}

    # -- inference -------------------------------------------------------
    def predict(self, weather, past=None, batch_size: int = 256) -> np.ndarray:
        """Raw normalized output reshaped to (N, T, Q)."""
        w, p = self._prepare(weather, past)
        outs = []
        for s in range(0, w.shape[0], batch_size):
            out, _ = self.forward(w[s : s + batch_size], None if p is None else p[s : s + batch_size])
            outs.append(out)
        flat = np.concatenate(outs, axis=0) if outs else np.zeros((0, self.spec.n_output), self.dtype)
        return flat.reshape(-1, self.spec.n_steps, self.spec.n_quantiles)

    def quantiles(self, weather, past=None, capacity: float = 1.0) -> np.ndarray:
        """Forecasts in kW: scaled by capacity, clipped to [0, capacity], rows sorted."""
        z = self.predict(weather, past).astype(np.float64) * capacity
        return np.sort(np.clip(z, 0.0, capacity), axis=-1)

    def forward_matrix(self, weather, past, steps, levels: QuantileLevels, capacity=None) -> QuantileMatrix:
        """One sample's forecast as a monotone :class:`QuantileMatrix`."""
        z = self.predict(weather, past)[0].astype(np.float64)
        if capacity is not None:
            z = z * capacity
        return enforce_monotonicity(QuantileMatrix(tuple(steps), z, levels, capacity=capacity))
