"""Independent oracles shared by the unit and acceptance tests."""
from __future__ import annotations

import math

import numpy as np

from pvquant.neural import Network, build_spec, loss_and_grads

GRAD_STEP = 1e-5

# (criterion number, passed, detail) rows, printed by conftest.py after the run
ACCEPTANCE_LINES: list = []


def toy_network(arch: str, seed: int = 0) -> tuple[Network, np.ndarray, np.ndarray, np.ndarray]:
    """A float64 network at toy width plus a batch (weather, past, targets)."""
    shapes = {"MLP": (2, 3, 3), "LSTM": (3, 2, 0), "ED1": (4, 2, 3), "ED2": (4, 2, 3)}
    n_steps, n_q, past_w = shapes[arch]
    spec = build_spec(arch, n_steps, n_q, past_w)
    net = Network(spec, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    weather = rng.normal(size=(3, spec.n_weather))
    past = rng.uniform(size=(3, past_w)) if past_w else None
    targets = rng.uniform(size=(3, n_steps))
    return net, weather, past, targets


def numeric_gradients(net: Network, weather, past, targets, levels, delta, h=GRAD_STEP) -> dict:
    """Central differences of the training loss, one parameter entry at a time."""
    out = {}
    for name, p in net.params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up, _ = loss_and_grads(net, weather, past, targets, levels, delta)
            flat[i] = old - h
            down, _ = loss_and_grads(net, weather, past, targets, levels, delta)
            flat[i] = old
            gflat[i] = (up - down) / (2 * h)
        out[name] = g
    return out


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-7) -> float:
    """Largest |a - n| / max(|a|, |n|) over entries; entries where both are below ``floor`` are skipped."""
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        scale = np.maximum(np.abs(a), np.abs(n))
        mask = scale > floor
        if mask.any():
            worst = max(worst, float(np.max(np.abs(a - n)[mask] / scale[mask])))
    return worst


def gradient_check(arch: str, seed: int = 0) -> float:
    net, weather, past, targets = toy_network(arch, seed)
    levels = np.linspace(0.1, 0.9, net.spec.n_quantiles)
    delta = 10.0  # whole toy batch in the quadratic regime: the loss is smooth
    _, analytic = loss_and_grads(net, weather, past, targets, levels, delta)
    numeric = numeric_gradients(net, weather, past, targets, levels, delta)
    return max_relative_error(analytic, numeric)


def scalar_lstm_step(Wx, Wh, b, x, h, c):
    """Element-by-element LSTM update with python floats (gate order i, f, g, o)."""
    units = len(h)
    n_in = len(x)
    new_h, new_c = [], []
    for u in range(units):
        pre = []
        for gate in range(4):
            col = gate * units + u
            s = float(b[col])
            for j in range(n_in):
                s += float(x[j]) * float(Wx[j][col])
            for j in range(units):
                s += float(h[j]) * float(Wh[j][col])
            pre.append(s)
        i = 1.0 / (1.0 + math.exp(-pre[0]))
        f = 1.0 / (1.0 + math.exp(-pre[1]))
        g = math.tanh(pre[2])
        o = 1.0 / (1.0 + math.exp(-pre[3]))
        cu = f * float(c[u]) + i * g
        new_c.append(cu)
        new_h.append(o * math.tanh(cu))
    return np.array(new_h), np.array(new_c)


def tree_walk(learner, x, lr: float, n_stages: int) -> float:
    """Recursive evaluation of a boosted learner on one input row."""

    def leaf(node):
        if learner.feature[node] < 0:
            return float(learner.value[node])
        child = learner.left[node] if x[learner.feature[node]] <= learner.threshold[node] else learner.right[node]
        return leaf(child)

    total = learner.init
    for stage in range(n_stages):
        total += lr * leaf(learner.roots[stage])
    return total
