"""From-scratch stacked LSTM: forward pass, backpropagation through time, Adam.

Everything is float64 and seeded; identical seeds give bit-identical results.
The cell uses the update

    i = sigmoid(W_xi x + W_hi h_prev + b_i)
    f = sigmoid(W_xf x + W_hf h_prev + b_f)
    o = sigmoid(W_xo x + W_ho h_prev + b_o)
    g = tanh(W_xc x + W_hc h_prev + b_c)
    c = f * c_prev + i * g
    h = tanh(o * c)

Note the output equation: ``h = tanh(o * c)`` rather than the conventional
``o * tanh(c)``. Both variants are supported; ``standard_output_gate=True``
selects the conventional one. The default is the former, which is what the
rest of this package trains with.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import ConfigError, DataError, ShapeError, TrainingError

# Gate row order used whenever the four gates are stacked into one matrix.
GATE_ORDER = ("i", "f", "o", "c")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic sigmoid."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmLayerParams:
    """Weights of one LSTM layer. W_x* are (H, D), W_h* are (H, H), b_* are (H,)."""

    W_xi: np.ndarray
    W_hi: np.ndarray
    b_i: np.ndarray
    W_xf: np.ndarray
    W_hf: np.ndarray
    b_f: np.ndarray
    W_xo: np.ndarray
    W_ho: np.ndarray
    b_o: np.ndarray
    W_xc: np.ndarray
    W_hc: np.ndarray
    b_c: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_xi.shape[1]

    def validate(self) -> None:
        h, d = self.hidden_size, self.input_size
        for name, arr in self.named_arrays():
            expected = (h, d) if name.startswith("W_x") else (h, h) if name.startswith("W_h") else (h,)
            if arr.shape != expected:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {expected}")
            if not np.isfinite(arr).all():
                raise TrainingError(f"non-finite values in {name}")

    def named_arrays(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(**{n: a.copy() for n, a in self.named_arrays()})


@dataclass
class LstmLayerState:
    """Recurrent state (h, c) of one layer; zeros at sequence start."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmLayerState":
        return cls(h=np.zeros(hidden_size), c=np.zeros(hidden_size))


@dataclass
class CellCache:
    """Activations of one forward timestep, kept for the backward pass."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    c_tilde: np.ndarray
    c: np.ndarray
    h: np.ndarray


@dataclass
class StackedNetwork:
    """A stack of LSTM layers plus a linear projection from the top h to outputs."""

    layers: list[LstmLayerParams]
    W_out: np.ndarray  # (n_outputs, H_top)
    b_out: np.ndarray  # (n_outputs,)
    standard_output_gate: bool = False

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def output_size(self) -> int:
        return self.b_out.shape[0]

    def named_arrays(self):
        out = []
        for li, layer in enumerate(self.layers):
            out.extend((f"layers.{li}.{n}", a) for n, a in layer.named_arrays())
        out.append(("proj.W", self.W_out))
        out.append(("proj.b", self.b_out))
        return out

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.named_arrays()}

    def validate(self) -> None:
        for li, layer in enumerate(self.layers):
            layer.validate()
            if li > 0 and layer.input_size != self.layers[li - 1].hidden_size:
                raise ShapeError(
                    f"layer {li} input size {layer.input_size} != "
                    f"layer {li - 1} hidden size {self.layers[li - 1].hidden_size}"
                )
        if self.W_out.shape != (self.output_size, self.layers[-1].hidden_size):
            raise ShapeError(
                f"projection shape {self.W_out.shape} does not match "
                f"top hidden size {self.layers[-1].hidden_size}"
            )
        if not (np.isfinite(self.W_out).all() and np.isfinite(self.b_out).all()):
            raise TrainingError("non-finite values in projection")

    def copy(self) -> "StackedNetwork":
        return StackedNetwork(
            layers=[layer.copy() for layer in self.layers],
            W_out=self.W_out.copy(),
            b_out=self.b_out.copy(),
            standard_output_gate=self.standard_output_gate,
        )


def init_params(
    layer_dims: list[tuple[int, int]],
    output_dim: int,
    seed: int,
    forget_bias: float = 1.0,
    standard_output_gate: bool = False,
) -> StackedNetwork:
    """Build a network with uniform(-s, s) weights, s = 1/sqrt(fan_in).

    Biases start at zero except the forget-gate bias, which starts at
    ``forget_bias`` so early training keeps the memory cell open.
    """
    if output_dim < 1 or any(d < 1 or h < 1 for d, h in layer_dims):
        raise ConfigError("all layer and output dimensions must be >= 1")
    for li in range(1, len(layer_dims)):
        if layer_dims[li][0] != layer_dims[li - 1][1]:
            raise ConfigError(
                f"layer {li} input {layer_dims[li][0]} != layer {li - 1} hidden {layer_dims[li - 1][1]}"
            )
    rng = np.random.default_rng(seed)

    def uniform(rows: int, cols: int) -> np.ndarray:
        s = 1.0 / np.sqrt(cols)
        return rng.uniform(-s, s, size=(rows, cols))

    layers = []
    for d, h in layer_dims:
        layers.append(
            LstmLayerParams(
                W_xi=uniform(h, d), W_hi=uniform(h, h), b_i=np.zeros(h),
                W_xf=uniform(h, d), W_hf=uniform(h, h), b_f=np.full(h, float(forget_bias)),
                W_xo=uniform(h, d), W_ho=uniform(h, h), b_o=np.zeros(h),
                W_xc=uniform(h, d), W_hc=uniform(h, h), b_c=np.zeros(h),
            )
        )
    top_h = layer_dims[-1][1]
    net = StackedNetwork(
        layers=layers,
        W_out=uniform(output_dim, top_h),
        b_out=np.zeros(output_dim),
        standard_output_gate=standard_output_gate,
    )
    net.validate()
    return net


# ---------------------------------------------------------------------------
# Fused step kernels. The four gate matrices are stacked row-wise in GATE_ORDER
# so one matvec per weight family covers all gates.
# ---------------------------------------------------------------------------

def _stack_weights(p: LstmLayerParams):
    Wx = np.concatenate([p.W_xi, p.W_xf, p.W_xo, p.W_xc], axis=0)
    Wh = np.concatenate([p.W_hi, p.W_hf, p.W_ho, p.W_hc], axis=0)
    b = np.concatenate([p.b_i, p.b_f, p.b_o, p.b_c])
    return Wx, Wh, b


def _step_forward(Wx, Wh, b, x, h_prev, c_prev, standard_output_gate):
    hdim = h_prev.shape[0]
    a = Wx @ x + Wh @ h_prev + b
    gate = sigmoid(a[: 3 * hdim])
    i, f, o = gate[:hdim], gate[hdim : 2 * hdim], gate[2 * hdim :]
    g = np.tanh(a[3 * hdim :])
    c = f * c_prev + i * g
    if standard_output_gate:
        h = o * np.tanh(c)
    else:
        h = np.tanh(o * c)
    return CellCache(x=x, h_prev=h_prev, c_prev=c_prev, i=i, f=f, o=o, c_tilde=g, c=c, h=h)


def _step_backward(Wx, Wh, cache, grad_h, grad_c, standard_output_gate):
    """Return (d_gates, grad_x, grad_h_prev, grad_c_prev) for one timestep."""
    i, f, o, g = cache.i, cache.f, cache.o, cache.c_tilde
    if standard_output_gate:
        tc = np.tanh(cache.c)
        d_o = grad_h * tc
        d_c = grad_c + grad_h * o * (1.0 - tc * tc)
    else:
        # h = tanh(o * c): route grad_h through the outer tanh first.
        du = grad_h * (1.0 - cache.h * cache.h)
        d_o = du * cache.c
        d_c = grad_c + du * o
    d_f = d_c * cache.c_prev
    grad_c_prev = d_c * f
    d_i = d_c * g
    d_g = d_c * i
    d_gates = np.concatenate(
        [d_i * i * (1.0 - i), d_f * f * (1.0 - f), d_o * o * (1.0 - o), d_g * (1.0 - g * g)]
    )
    grad_x = Wx.T @ d_gates
    grad_h_prev = Wh.T @ d_gates
    return d_gates, grad_x, grad_h_prev, grad_c_prev


def _split_gate_grads(dWx, dWh, db, hidden_size):
    """Slice stacked gate gradients back into per-gate parameter names."""
    out = {}
    for gi, gate in enumerate(GATE_ORDER):
        rows = slice(gi * hidden_size, (gi + 1) * hidden_size)
        out[f"W_x{gate}"] = dWx[rows].copy()
        out[f"W_h{gate}"] = dWh[rows].copy()
        out[f"b_{gate}"] = db[rows].copy()
    return out


def lstm_cell_forward(
    params: LstmLayerParams,
    x: np.ndarray,
    state: LstmLayerState,
    standard_output_gate: bool = False,
) -> tuple[LstmLayerState, CellCache]:
    """Run one timestep; returns the new state and the cache for backprop."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_size,):
        raise ShapeError(f"input has shape {x.shape}, expected ({params.input_size},)")
    if state.h.shape != (params.hidden_size,) or state.c.shape != (params.hidden_size,):
        raise ShapeError("state vectors do not match the layer hidden size")
    Wx, Wh, b = _stack_weights(params)
    cache = _step_forward(Wx, Wh, b, x, state.h, state.c, standard_output_gate)
    return LstmLayerState(h=cache.h, c=cache.c), cache


def lstm_cell_backward(
    cache: CellCache,
    params: LstmLayerParams,
    grad_h: np.ndarray,
    grad_c: np.ndarray,
    standard_output_gate: bool = False,
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray, np.ndarray]:
    """Reverse one timestep.

    Returns (param_grads, grad_x, grad_h_prev, grad_c_prev) where param_grads
    maps this layer's field names to gradient arrays.
    """
    grad_h = np.asarray(grad_h, dtype=np.float64)
    grad_c = np.asarray(grad_c, dtype=np.float64)
    hdim = params.hidden_size
    if grad_h.shape != (hdim,) or grad_c.shape != (hdim,):
        raise ShapeError("upstream gradients do not match the layer hidden size")
    if cache.x.shape != (params.input_size,):
        raise ShapeError("cache does not match the layer input size")
    Wx, Wh, _ = _stack_weights(params)
    d_gates, grad_x, grad_h_prev, grad_c_prev = _step_backward(
        Wx, Wh, cache, grad_h, grad_c, standard_output_gate
    )
    grads = _split_gate_grads(np.outer(d_gates, cache.x), np.outer(d_gates, cache.h_prev), d_gates, hdim)
    return grads, grad_x, grad_h_prev, grad_c_prev


def network_forward(
    net: StackedNetwork, sequence: np.ndarray
) -> tuple[np.ndarray, list[list[CellCache]]]:
    """Run a full sequence through the stack.

    ``sequence`` is (T, input_size); states start at zero. Returns the
    projected outputs (T, output_size) and per-layer caches for BPTT.
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim == 1:
        sequence = sequence[:, None]
    if sequence.shape[0] == 0:
        raise DataError("cannot run an empty sequence")
    if sequence.shape[1] != net.input_size:
        raise ShapeError(
            f"sequence width {sequence.shape[1]} != network input size {net.input_size}"
        )
    stream = sequence
    caches: list[list[CellCache]] = []
    for layer in net.layers:
        Wx, Wh, b = _stack_weights(layer)
        h = np.zeros(layer.hidden_size)
        c = np.zeros(layer.hidden_size)
        layer_caches = []
        outputs = np.empty((stream.shape[0], layer.hidden_size))
        for t in range(stream.shape[0]):
            cache = _step_forward(Wx, Wh, b, stream[t], h, c, net.standard_output_gate)
            h, c = cache.h, cache.c
            layer_caches.append(cache)
            outputs[t] = h
        caches.append(layer_caches)
        stream = outputs
    projected = stream @ net.W_out.T + net.b_out
    return projected, caches


def network_step(
    net: StackedNetwork, x: np.ndarray, states: list[LstmLayerState]
) -> tuple[np.ndarray, list[LstmLayerState]]:
    """Advance the stack one timestep (inference only, no caches)."""
    stream = np.asarray(x, dtype=np.float64)
    new_states = []
    for layer, state in zip(net.layers, states):
        state, cache = lstm_cell_forward(layer, stream, state, net.standard_output_gate)
        new_states.append(state)
        stream = cache.h
    return net.W_out @ stream + net.b_out, new_states


def initial_states(net: StackedNetwork) -> list[LstmLayerState]:
    return [LstmLayerState.zeros(layer.hidden_size) for layer in net.layers]


def network_backward(
    net: StackedNetwork,
    caches: list[list[CellCache]],
    output_grads: np.ndarray,
) -> dict[str, np.ndarray]:
    """BPTT over a cached forward pass; returns gradients keyed like named_arrays."""
    output_grads = np.asarray(output_grads, dtype=np.float64)
    if output_grads.ndim == 1:
        output_grads = output_grads[:, None]
    seq_len = len(caches[0])
    if output_grads.shape != (seq_len, net.output_size):
        raise ShapeError(
            f"output grads have shape {output_grads.shape}, expected ({seq_len}, {net.output_size})"
        )
    grads = net.zero_grads()
    top_h = np.stack([cache.h for cache in caches[-1]])
    grads["proj.W"] += output_grads.T @ top_h
    grads["proj.b"] += output_grads.sum(axis=0)
    dh_stream = output_grads @ net.W_out
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        Wx, Wh, _ = _stack_weights(layer)
        hdim = layer.hidden_size
        dWx = np.zeros((4 * hdim, layer.input_size))
        dWh = np.zeros((4 * hdim, hdim))
        db = np.zeros(4 * hdim)
        dh_carry = np.zeros(hdim)
        dc_carry = np.zeros(hdim)
        dx_stream = np.empty((seq_len, layer.input_size))
        for t in range(seq_len - 1, -1, -1):
            cache = caches[li][t]
            d_gates, dx, dh_carry, dc_carry = _step_backward(
                Wx, Wh, cache, dh_stream[t] + dh_carry, dc_carry, net.standard_output_gate
            )
            dWx += np.outer(d_gates, cache.x)
            dWh += np.outer(d_gates, cache.h_prev)
            db += d_gates
            dx_stream[t] = dx
        for pname, garr in _split_gate_grads(dWx, dWh, db, hdim).items():
            grads[f"layers.{li}.{pname}"] += garr
        dh_stream = dx_stream
    return grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam moment accumulators, one array per network parameter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_network(cls, net: StackedNetwork, beta1=0.9, beta2=0.999, epsilon=1e-8) -> "AdamState":
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0 and epsilon > 0.0):
            raise ConfigError("Adam requires 0 < beta1, beta2 < 1 and epsilon > 0")
        return cls(
            m={n: np.zeros_like(a) for n, a in net.named_arrays()},
            v={n: np.zeros_like(a) for n, a in net.named_arrays()},
            step_count=0,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm > 0.0:
        scale = max_norm / total
        return {n: g * scale for n, g in grads.items()}
    return grads


def adam_step(
    net: StackedNetwork,
    grads: dict[str, np.ndarray],
    adam: AdamState,
    lr: float,
    clip_norm: float | None = 5.0,
) -> tuple[StackedNetwork, AdamState]:
    """Apply one Adam update in place; returns the updated (net, adam).

    Gradients are clipped to a global L2 norm of ``clip_norm`` first
    (pass None to disable).
    """
    if lr <= 0.0:
        raise ConfigError("learning rate must be positive")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name}")
    if clip_norm is not None:
        grads = clip_gradients(grads, clip_norm)
    adam.step_count += 1
    t = adam.step_count
    bc1 = 1.0 - adam.beta1 ** t
    bc2 = 1.0 - adam.beta2 ** t
    for name, arr in net.named_arrays():
        g = grads[name]
        if g.shape != arr.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {arr.shape}")
        m = adam.m[name]
        v = adam.v[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + adam.epsilon)
    return net, adam


# ---------------------------------------------------------------------------
# Serialization (used by the model document)
# ---------------------------------------------------------------------------

def network_to_doc(net: StackedNetwork) -> dict:
    """Self-describing dict with flattened row-major weights."""
    return {
        "standard_output_gate": net.standard_output_gate,
        "layers": [
            {
                "input_size": layer.input_size,
                "hidden_size": layer.hidden_size,
                "arrays": {n: a.ravel().tolist() for n, a in layer.named_arrays()},
            }
            for layer in net.layers
        ],
        "projection": {
            "output_size": net.output_size,
            "W": net.W_out.ravel().tolist(),
            "b": net.b_out.tolist(),
        },
    }


def network_from_doc(doc: dict) -> StackedNetwork:
    layers = []
    for layer_doc in doc["layers"]:
        d, h = layer_doc["input_size"], layer_doc["hidden_size"]
        arrays = {}
        for name, flat in layer_doc["arrays"].items():
            shape = (h, d) if name.startswith("W_x") else (h, h) if name.startswith("W_h") else (h,)
            arrays[name] = np.asarray(flat, dtype=np.float64).reshape(shape)
        layers.append(LstmLayerParams(**arrays))
    proj = doc["projection"]
    out = proj["output_size"]
    net = StackedNetwork(
        layers=layers,
        W_out=np.asarray(proj["W"], dtype=np.float64).reshape(out, layers[-1].hidden_size),
        b_out=np.asarray(proj["b"], dtype=np.float64),
        standard_output_gate=bool(doc["standard_output_gate"]),
    )
    net.validate()
    return net
