"""Residual MLP regressor written directly in numpy.

Each hidden block is ``linear -> batch norm -> leaky ReLU -> dropout``; when
the block output has the same width as the representation ``k`` blocks
back, that representation is added after the block (identity skip).
Training uses a blended MSE/Huber loss, AdamW, global-norm gradient
clipping, a reduce-on-plateau learning-rate schedule and early stopping
with best-snapshot restore.
"""

import copy
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .errors import BatchTooSmall, DimensionMismatch, EmptyBatch, NoValidationData, StaleCache

BN_EPS = 1e-5


@dataclass(frozen=True)
class Architecture:
    input_width: int
    hidden: tuple = (64, 64, 64)
    dropout: float = 0.2
    slope: float = 0.01
    residual_span: int = 1  # 0 disables skips
    bn_momentum: float = 0.9
    seed: int = 0  # used by init_network when no rng is given

    def __post_init__(self):
        if self.input_width < 1:
            raise ValueError("input_width must be >= 1")
        if not self.hidden:
            raise ValueError("need at least one hidden layer")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.slope <= 0:
            raise ValueError("leaky slope must be positive")
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))

    def skip_source(self, block):
        """Index into the representation list ``h`` feeding block ``block``'s skip, or None.

        ``h[0]`` is the input; block ``l`` produces ``h[l + 1]``. Only hidden
        representations (index >= 1) of equal width are eligible.
        """
        k = self.residual_span
        if k < 1:
            return None
        src = block + 1 - k
        if src < 1 or self.hidden[src - 1] != self.hidden[block]:
            return None
        return src


class Network:
    def __init__(self, arch, params, running_mean, running_var):
        self.arch = arch
        self.params = params
        self.running_mean = running_mean
        self.running_var = running_var
        self.version = 0
        self.flatten()

    def flatten(self):
        """Back every parameter tensor by one contiguous vector ``self.flat``.

        The entries of ``self.params`` become views, so whole-model updates
        (optimizer step, clipping) are single vectorized operations.
        """
        self.flat = np.concatenate([np.ravel(v) for v in self.params.values()])
        off = 0
        for k, v in list(self.params.items()):
            size = np.size(v)
            self.params[k] = self.flat[off:off + size].reshape(np.shape(v))
            off += size
        # running statistics get the same treatment
        self.stats_mean = np.concatenate(self.running_mean)
        self.stats_var = np.concatenate(self.running_var)
        bounds = np.cumsum([0] + [len(m) for m in self.running_mean])
        self.running_mean = [self.stats_mean[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        self.running_var = [self.stats_var[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        return self.flat

    def param_names(self):
        return list(self.params)

    def copy(self):
        net = Network(self.arch, {k: v.copy() for k, v in self.params.items()},
                      [m.copy() for m in self.running_mean], [v.copy() for v in self.running_var])
        return net

    def predict(self, X):
        return forward(self, X, "eval")[0]

    def to_dict(self):
        return {
            "arch": asdict(self.arch),
            "params": {k: v.tolist() for k, v in self.params.items()},
            "running_mean": [m.tolist() for m in self.running_mean],
            "running_var": [v.tolist() for v in self.running_var],
        }

    @classmethod
    def from_dict(cls, d):
        arch = Architecture(**d["arch"])
        params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        params["W_out"] = params["W_out"].reshape(-1, 1)
        return cls(arch, params,
                   [np.asarray(m, dtype=float) for m in d["running_mean"]],
                   [np.asarray(v, dtype=float) for v in d["running_var"]])


def init_network(arch, rng=None):
    """He-normal weights (variance 2/fan_in), zero biases, unit BN scale."""
    rng = np.random.default_rng(arch.seed if rng is None else rng)
    params = {}
    widths = (arch.input_width,) + arch.hidden
    for l, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        params[f"W{l}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out))
        params[f"b{l}"] = np.zeros(fan_out)
        params[f"gamma{l}"] = np.ones(fan_out)
        params[f"beta{l}"] = np.zeros(fan_out)
    params["W_out"] = rng.normal(0.0, np.sqrt(2.0 / widths[-1]), (widths[-1], 1))
    params["b_out"] = np.zeros(1)
    running_mean = [np.zeros(w) for w in arch.hidden]
    running_var = [np.ones(w) for w in arch.hidden]
    return Network(arch, params, running_mean, running_var)


def leaky_relu(x, slope):
    """Return ``(value, derivative)``; the derivative at exactly 0 is 1."""
    x = np.asarray(x, dtype=float)
    d = np.where(x >= 0, 1.0, slope)
    return x * d, d


def batch_norm_forward(z, gamma, beta, mode, running_mean, running_var, momentum=0.9, eps=BN_EPS):
    """Normalize per unit; returns ``(out, cache)``.

    Train mode uses the biased batch variance and updates the running
    statistics in place (unbiased variance); eval mode reads them.
    """
    if mode == "train":
        n = z.shape[0]
        if n < 2:
            raise BatchTooSmall("batch norm needs at least 2 rows in train mode")
        mu = z.sum(axis=0) / n
        zc = z - mu
        var = np.einsum("ij,ij->j", zc, zc) / n
        inv_std = 1.0 / np.sqrt(var + eps)
        if running_mean is not None:
            running_mean *= momentum
            running_mean += (1 - momentum) * mu
            running_var *= momentum
            running_var += (1 - momentum) * var * n / (n - 1)
    else:
        mu = running_mean
        inv_std = 1.0 / np.sqrt(running_var + eps)
    xhat = (z - mu) * inv_std
    return gamma * xhat + beta, {"xhat": xhat, "inv_std": inv_std, "mode": mode}


def batch_norm_backward(dout, gamma, cache):
    """Gradients ``(dz, dgamma, dbeta)``; train mode includes the batch-statistic path."""
    xhat, inv_std = cache["xhat"], cache["inv_std"]
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if cache["mode"] == "train":
        n = dout.shape[0]
        dz = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    else:
        dz = dxhat * inv_std
    return dz, dgamma, dbeta


def _check_batch(net, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.arch.input_width:
        raise DimensionMismatch(f"expected batches of width {net.arch.input_width}")
    return X


def forward(net, X, mode="eval", rng=None, update_stats=True, masks=None):
    """Run the network; returns ``(predictions, cache)``.

    ``mode`` is ``"train"`` (batch statistics, dropout drawn from ``rng``) or
    ``"eval"`` (running statistics, no dropout). ``masks`` optionally
    supplies the scaled dropout masks per block instead of ``rng``.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    X = _check_batch(net, X)
    if mode == "train" and X.shape[0] < 2:
        raise BatchTooSmall("train mode needs at least 2 rows")
    arch, P = net.arch, net.params
    drop = arch.dropout if mode == "train" else 0.0
    if drop > 0 and rng is None and masks is None:
        raise ValueError("train-mode dropout needs an rng or explicit masks")
    hs = [X]
    blocks = []
    for l in range(len(arch.hidden)):
        h = hs[l]
        z = h @ P[f"W{l}"] + P[f"b{l}"]
        rm = net.running_mean[l] if update_stats or mode == "eval" else None
        rv = net.running_var[l] if update_stats or mode == "eval" else None
        u, bn = batch_norm_forward(z, P[f"gamma{l}"], P[f"beta{l}"], mode, rm, rv, arch.bn_momentum)
        a, da = leaky_relu(u, arch.slope)
        mask = None
        if drop > 0:
            mask = masks[l] if masks is not None else (rng.random(a.shape) >= drop) / (1.0 - drop)
            a = a * mask
        src = arch.skip_source(l)
        if src is not None:
            a = a + hs[src]
        hs.append(a)
        blocks.append({"bn": bn, "dact": da, "mask": mask, "skip": src})
    pred = (hs[-1] @ P["W_out"]).ravel() + P["b_out"][0]
    cache = {"hs": hs, "blocks": blocks, "version": net.version, "mode": mode}
    return pred, cache


def backward(net, cache, dpred):
    """Gradients of the loss for every parameter given ``dL/dpred``."""
    if cache["version"] != net.version:
        raise StaleCache("parameters changed since this forward pass")
    P = net.params
    hs, blocks = cache["hs"], cache["blocks"]
    g = np.asarray(dpred, dtype=float).reshape(-1, 1)
    grads = {}
    grads["W_out"] = hs[-1].T @ g
    grads["b_out"] = g.sum(axis=0)
    dh = [np.zeros_like(h) for h in hs]
    dh[-1] = g @ P["W_out"].T
    for l in reversed(range(len(blocks))):
        blk = blocks[l]
        dout = dh[l + 1]
        if blk["skip"] is not None:
            dh[blk["skip"]] += dout
        da = dout * blk["mask"] if blk["mask"] is not None else dout
        du = da * blk["dact"]
        dz, grads[f"gamma{l}"], grads[f"beta{l}"] = batch_norm_backward(du, P[f"gamma{l}"], blk["bn"])
        grads[f"W{l}"] = hs[l].T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        dh[l] += dz @ P[f"W{l}"].T
    return {k: grads[k] for k in P}


def huber(e, delta):
    a = np.abs(e)
    return np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))


def composite_loss(pred, target, alpha=0.5, delta=1.0):
    """``alpha * MSE + (1 - alpha) * Huber``; returns ``(loss, dloss/dpred)``."""
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if pred.shape != target.shape:
        raise DimensionMismatch("prediction and target lengths differ")
    n = len(pred)
    if n == 0:
        raise EmptyBatch("empty batch")
    if not 0 <= alpha <= 1 or delta <= 0:
        raise ValueError("need alpha in [0, 1] and delta > 0")
    e = pred - target
    loss = alpha * np.mean(e * e) + (1 - alpha) * np.mean(huber(e, delta))
    grad = (alpha * 2 * e + (1 - alpha) * np.clip(e, -delta, delta)) / n
    return float(loss), grad


def clip_gradients(grads, max_norm):
    """Scale all gradients by ``max_norm / norm`` when the global L2 norm exceeds it.

    Returns ``(grads, norm_before_clipping)``.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


@dataclass
class OptimizerState:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params, grads, state):
    """One AdamW update applied in place to ``params``.

    ``theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)``;
    the decay term never enters the moment estimates.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1 ** state.t
    c2 = 1 - b2 ** state.t
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        m = state.m[k] = b1 * state.m[k] + (1 - b1) * g
        v = state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        theta = params[k]
        update = (m / c1) / (np.sqrt(v / c2) + state.eps) + state.weight_decay * theta
        theta -= state.lr * update
    return params


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` once the loss has failed to
    improve (by more than ``threshold``) on more than ``patience`` consecutive calls."""

    def __init__(self, patience=10, factor=0.5, threshold=1e-6):
        if patience < 1 or not 0 < factor < 1:
            raise ValueError("need patience >= 1 and factor in (0, 1)")
        self.patience = patience
        self.factor = factor
        self.threshold = threshold
        self.best = np.inf
        self.bad = 0

    def step(self, loss, state):
        if loss < self.best - self.threshold:
            self.best = loss
            self.bad = 0
        else:
            self.bad += 1
            if self.bad > self.patience:
                state.lr *= self.factor
                self.bad = 0
        return state.lr


class EarlyStopping:
    def __init__(self, patience=30, threshold=1e-6):
        self.patience = patience
        self.threshold = threshold
        self.best = np.inf
        self.bad = 0

    def update(self, loss):
        """Record a validation loss; True if it is a new best."""
        if loss < self.best - self.threshold:
            self.best = loss
            self.bad = 0
            return True
        self.bad += 1
        return False

    @property
    def should_stop(self):
        return self.bad >= self.patience


# ---------------------------------------------------------------- compiled training epoch
#
# The functions above are the reference implementation. Training runs one
# whole epoch inside a compiled kernel that performs the same sequence
# (forward in train mode, composite loss, backward, global clipping,
# AdamW) on the flat parameter vector; the tests check it against the
# reference step by step.


def param_layout(net):
    """Offsets of every tensor inside ``net.flat`` plus the block wiring."""
    arch = net.arch
    offsets, off = {}, 0
    for k, v in net.params.items():
        offsets[k] = off
        off += v.size
    L = len(arch.hidden)
    widths = np.array((arch.input_width,) + arch.hidden, dtype=np.int64)
    pick = lambda name: np.array([offsets[f"{name}{l}"] for l in range(L)], dtype=np.int64)
    skip = np.array([-1 if arch.skip_source(l) is None else arch.skip_source(l) for l in range(L)],
                    dtype=np.int64)
    stats = np.cumsum([0] + list(arch.hidden)).astype(np.int64)
    return (widths, pick("W"), pick("b"), pick("gamma"), pick("beta"),
            offsets["W_out"], offsets["b_out"], skip, stats)


def epoch_masks(U, arch, rows):
    """Scaled dropout masks for the rows ``rows`` of an epoch's uniform draws ``U``."""
    out, col = [], 0
    for w in arch.hidden:
        out.append((U[rows, col:col + w] >= arch.dropout) / (1.0 - arch.dropout))
        col += w
    return out


@njit(cache=True)
def _train_epoch(flat, m, v, t, lr, wd, b1, b2, eps, clip, alpha, delta,
                 X, y, perm, bounds, U, drop, slope, momentum, bn_eps,
                 widths, woff, boff, goff, beoff, ooff, obo, skip, rm, rv, soff):
    L = len(widths) - 1
    grad = np.zeros_like(flat)
    total = 0.0
    keep = 1.0 / (1.0 - drop)
    for bi in range(len(bounds) - 1):
        s, e = bounds[bi], bounds[bi + 1]
        n = e - s
        hs = [np.ascontiguousarray(X[perm[s:e]])]
        xhats = []
        invs = []
        dacts = []
        masks = []
        col = 0
        for l in range(L):
            din, dout = widths[l], widths[l + 1]
            W = flat[woff[l]:woff[l] + din * dout].reshape((din, dout))
            z = np.dot(hs[l], W) + flat[boff[l]:boff[l] + dout]
            xhat = np.empty((n, dout))
            inv = np.empty(dout)
            dact = np.empty((n, dout))
            mask = np.ones((n, dout))
            a = np.empty((n, dout))
            for j in range(dout):
                mu = 0.0
                for i in range(n):
                    mu += z[i, j]
                mu /= n
                var = 0.0
                for i in range(n):
                    var += (z[i, j] - mu) ** 2
                var /= n
                inv[j] = 1.0 / np.sqrt(var + bn_eps)
                r = soff[l] + j
                rm[r] = momentum * rm[r] + (1 - momentum) * mu
                rv[r] = momentum * rv[r] + (1 - momentum) * var * n / (n - 1)
                g = flat[goff[l] + j]
                bt = flat[beoff[l] + j]
                for i in range(n):
                    xh = (z[i, j] - mu) * inv[j]
                    xhat[i, j] = xh
                    u = g * xh + bt
                    d = 1.0 if u >= 0 else slope
                    dact[i, j] = d
                    val = u * d
                    if drop > 0:
                        mk = keep if U[s + i, col + j] >= drop else 0.0
                        mask[i, j] = mk
                        val = val * mk
                    if skip[l] >= 0:
                        val = val + hs[skip[l]][i, j]
                    a[i, j] = val
            col += dout
            hs.append(a)
            xhats.append(xhat)
            invs.append(inv)
            dacts.append(dact)
            masks.append(mask)
        wl = widths[L]
        Wo = flat[ooff:ooff + wl].reshape((wl, 1))
        pred = np.dot(hs[L], Wo)[:, 0] + flat[obo]
        # composite loss and its gradient
        loss = 0.0
        dp = np.empty((n, 1))
        for i in range(n):
            err = pred[i] - y[perm[s + i]]
            ae = abs(err)
            hub = 0.5 * err * err if ae <= delta else delta * (ae - 0.5 * delta)
            loss += alpha * err * err + (1 - alpha) * hub
            ce = min(max(err, -delta), delta)
            dp[i, 0] = (alpha * 2 * err + (1 - alpha) * ce) / n
        total += loss / n
        # backward
        grad[ooff:ooff + wl] = np.dot(hs[L].T, dp)[:, 0]
        grad[obo] = dp[:, 0].sum()
        dh = [np.zeros((n, widths[l])) for l in range(L + 1)]
        dh[L] = np.dot(dp, Wo.T)
        for l in range(L - 1, -1, -1):
            din, dout = widths[l], widths[l + 1]
            dout_arr = dh[l + 1]
            if skip[l] >= 0:
                dh[skip[l]] += dout_arr
            xhat, inv = xhats[l], invs[l]
            du = dout_arr * masks[l] * dacts[l] if drop > 0 else dout_arr * dacts[l]
            dz = np.empty((n, dout))
            for j in range(dout):
                g = flat[goff[l] + j]
                sg = 0.0
                sb = 0.0
                for i in range(n):
                    sg += du[i, j] * xhat[i, j]
                    sb += du[i, j]
                grad[goff[l] + j] = sg
                grad[beoff[l] + j] = sb
                sdx = 0.0
                sdxx = 0.0
                for i in range(n):
                    dx = du[i, j] * g
                    sdx += dx
                    sdxx += dx * xhat[i, j]
                for i in range(n):
                    dz[i, j] = inv[j] / n * (n * du[i, j] * g - sdx - xhat[i, j] * sdxx)
            W = flat[woff[l]:woff[l] + din * dout].reshape((din, dout))
            grad[woff[l]:woff[l] + din * dout] = np.dot(hs[l].T, dz).ravel()
            grad[boff[l]:boff[l] + dout] = dz.sum(axis=0)
            dh[l] += np.dot(dz, W.T)
        # global-norm clipping
        norm = np.sqrt(np.sum(grad * grad))
        if norm > clip:
            grad *= clip / norm
        # AdamW
        t += 1
        r1 = 1.0 / (1 - b1 ** t)
        r2 = 1.0 / (1 - b2 ** t)
        for k in range(len(flat)):
            gk = grad[k]
            mk = b1 * m[k] + (1 - b1) * gk
            vk = b2 * v[k] + (1 - b2) * gk * gk
            m[k] = mk
            v[k] = vk
            flat[k] -= lr * ((mk * r1) / (np.sqrt(vk * r2) + eps) + wd * flat[k])
    return t, total / (len(bounds) - 1)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    batch_size: int = 16
    alpha: float = 0.5
    huber_delta: float = 1.0
    clip_norm: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    scheduler_patience: int = 10
    scheduler_factor: float = 0.5
    early_stop_patience: int = 30
    val_fraction: float = 0.15

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm needs two rows)")
        if self.max_epochs < 1 or self.clip_norm <= 0 or self.lr <= 0 or self.huber_delta <= 0:
            raise ValueError("max_epochs, clip_norm, lr and huber_delta must be positive")
        if not 0 <= self.alpha <= 1 or not 0 < self.val_fraction < 1:
            raise ValueError("alpha must lie in [0, 1] and val_fraction in (0, 1)")


@dataclass
class TrainedModel:
    network: Network
    history: list  # per-epoch dicts: epoch, train_loss, val_loss, lr
    best_epoch: int
    best_val_loss: float

    def predict(self, X):
        return self.network.predict(X)


def batch_bounds(n, batch_size):
    """Start/stop offsets of consecutive batches; a trailing single row joins the previous batch."""
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < 2:
        del bounds[-2]
    return np.array(bounds, dtype=np.int64)


def minibatches(n, batch_size, rng):
    """Shuffled index batches (see :func:`batch_bounds`)."""
    perm = rng.permutation(n)
    b = batch_bounds(n, batch_size)
    return [perm[b[i]:b[i + 1]] for i in range(len(b) - 1)]


def evaluate_loss(net, X, y, config):
    pred = net.predict(X)
    return composite_loss(pred, y, config.alpha, config.huber_delta)[0]


def train_model(X_train, y_train, X_val, y_val, arch, config=None, seed=0):
    """Train one network and return the snapshot with the best validation loss."""
    config = config or TrainConfig()
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).ravel()
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float).ravel()
    if len(y_val) == 0:
        raise NoValidationData("validation split is empty")
    if len(y_train) < 2:
        raise BatchTooSmall("need at least 2 training rows")
    init_seed, shuffle_seed, drop_seed = np.random.SeedSequence(seed).spawn(3)
    net = init_network(arch, np.random.default_rng(init_seed))
    shuffle_rng = np.random.default_rng(shuffle_seed)
    drop_rng = np.random.default_rng(drop_seed)
    state = OptimizerState(lr=config.lr, weight_decay=config.weight_decay,
                           beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    scheduler = PlateauScheduler(config.scheduler_patience, config.scheduler_factor)
    stopper = EarlyStopping(config.early_stop_patience)

    layout = param_layout(net)
    state.m["flat"] = np.zeros_like(net.flat)
    state.v["flat"] = np.zeros_like(net.flat)
    X_train = np.ascontiguousarray(X_train)
    n, units = len(y_train), sum(arch.hidden)
    no_drop = np.zeros((1, 1))
    bounds = batch_bounds(n, config.batch_size)

    best = net.copy()
    best_epoch, history = 0, []
    for epoch in range(1, config.max_epochs + 1):
        perm = shuffle_rng.permutation(n)
        U = drop_rng.random((n, units)) if arch.dropout > 0 else no_drop
        state.t, train_loss = _train_epoch(
            net.flat, state.m["flat"], state.v["flat"], state.t, state.lr, state.weight_decay,
            state.beta1, state.beta2, state.eps, config.clip_norm, config.alpha, config.huber_delta,
            X_train, y_train, perm, bounds, U, arch.dropout, arch.slope, arch.bn_momentum, BN_EPS,
            *layout[:8], net.stats_mean, net.stats_var, layout[8])
        net.version += 1
        val_loss = evaluate_loss(net, X_val, y_val, config)
        history.append({"epoch": epoch, "train_loss": float(train_loss),
                        "val_loss": val_loss, "lr": state.lr})
        if stopper.update(val_loss):
            best, best_epoch = net.copy(), epoch
        scheduler.step(val_loss, state)
        if stopper.should_stop:
            break
    if best_epoch == 0:
        # validation never improved on +inf (non-finite losses); keep the last weights
        best, best_epoch = net.copy(), len(history)
    return TrainedModel(best, history, best_epoch, evaluate_loss(best, X_val, y_val, config))


def train_config_from_dict(d):
    return TrainConfig(**d)


def config_dict(config):
    return copy.deepcopy(asdict(config))
