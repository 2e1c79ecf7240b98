"""A small scalar-input LSTM written directly in numpy.

The cell reads one update quantum per step and a linear readout turns the
hidden state into the prediction of the next quantum. Gates use the
logistic function. The cell candidate uses the logistic function as well
by default (``"sigmoid"``); ``"tanh"`` selects the usual candidate.

Parameters are stored gate-major in the order forget, input, output,
candidate:

==========  ==============  ==========================================
name        shape           meaning
==========  ==============  ==========================================
``U``       ``(4, H)``      input weights
``Z``       ``(4, H, H)``   recurrent weights, ``Z[g] @ h``
``b``       ``(4, H)``      biases
``w_out``   ``(H,)``        readout weights
``b_out``   ``()``          readout bias
==========  ==============  ==========================================

Any of these may carry a leading batch axis (see :func:`stack_cells`);
:func:`lstm_step` and :func:`forecast3` broadcast over it, which is how the
simulator advances many nodes at once.

Model files are plain text. The first line is ``LSTM1,H,activation``;
then one line per array in the order ``U, b, Z, w_out, b_out``, each the
comma separated C-order flattening of the array written with ``repr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

GATES = ("forget", "input", "output", "candidate")
ACTIVATIONS = ("sigmoid", "tanh")
PARAM_NAMES = ("U", "b", "Z", "w_out", "b_out")
FORMAT_TAG = "LSTM1"


class TrainingDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class LstmCell:
    U: np.ndarray
    Z: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown candidate activation {self.activation!r}")
        H = self.U.shape[-1]
        if H < 1 or self.Z.shape[-3:] != (4, H, H) or self.b.shape[-2:] != (4, H):
            raise ValueError("inconsistent LSTM parameter shapes")

    @property
    def hidden_size(self) -> int:
        return self.U.shape[-1]

    @classmethod
    def zeros(cls, hidden_size: int, activation: str = "sigmoid") -> "LstmCell":
        H = hidden_size
        return cls(
            np.zeros((4, H)), np.zeros((4, H, H)), np.zeros((4, H)), np.zeros(H), np.zeros(()), activation
        )

    @classmethod
    def random(cls, hidden_size: int, rng: np.random.Generator, scale: float = 0.1,
               activation: str = "sigmoid") -> "LstmCell":
        H = hidden_size
        u = lambda *shape: rng.uniform(-scale, scale, shape)  # noqa: E731
        return cls(u(4, H), u(4, H, H), u(4, H), u(H), np.asarray(rng.uniform(-scale, scale)), activation)

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> "LstmCell":
        return replace(self, **params)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(getattr(self, n)) for n in PARAM_NAMES])

    def from_flat(self, vector: np.ndarray) -> "LstmCell":
        out, pos = {}, 0
        for name in PARAM_NAMES:
            shape = np.shape(getattr(self, name))
            size = int(np.prod(shape))
            out[name] = np.asarray(vector[pos : pos + size]).reshape(shape)
            pos += size
        return self.with_params(out)


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    cell_state: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int, batch: tuple[int, ...] = ()) -> "LstmState":
        return cls(np.zeros(batch + (hidden_size,)), np.zeros(batch + (hidden_size,)))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    window_length: int = 4
    seed: int = 0
    candidate_activation: str = "sigmoid"
    hidden_size: int = 32
    clip_norm: float = 5.0
    batch_size: int = 32
    max_windows: int | None = 256
    optimizer: str = "adam"

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.window_length < 4:
            raise ValueError("window_length must be >= 4 (three inputs and a target)")
        if self.learning_rate <= 0 or self.epochs < 0 or self.hidden_size < 1 or self.batch_size < 1:
            raise ValueError("invalid training configuration")


def stack_cells(cells) -> LstmCell:
    """Stack cells of equal size and activation along a new leading axis."""
    cells = list(cells)
    if len({(c.hidden_size, c.activation) for c in cells}) != 1:
        raise ValueError("cells must share hidden size and activation")
    return LstmCell(
        *(np.stack([getattr(c, n) for c in cells]) for n in ("U", "Z", "b", "w_out", "b_out")),
        activation=cells[0].activation,
    )


def expit(x):
    """Logistic function through ``tanh``; several times faster than a direct
    ``1 / (1 + exp(-x))`` in numpy and exact at the saturation limits."""
    return 0.5 * np.tanh(0.5 * x) + 0.5


def _candidate(a, activation):
    return expit(a) if activation == "sigmoid" else np.tanh(a)


def _preactivations(cell: LstmCell, e, h):
    e = np.asarray(e, dtype=float)
    H = cell.hidden_size
    Zcat = cell.Z.reshape(cell.Z.shape[:-3] + (4 * H, H))
    rec = np.matmul(Zcat, h[..., None])[..., 0].reshape(h.shape[:-1] + (4, H))
    return cell.b + cell.U * e[..., None, None] + rec


def lstm_step(cell: LstmCell, state: LstmState, e_in) -> LstmState:
    """Advance the cell by one input.

    ``e_in`` is a scalar, or an array matching the batch shape of
    ``state``.
    """
    if not np.all(np.isfinite(e_in)):
        raise ValueError("LSTM input is not finite")
    new = _step(cell, state, e_in)
    if not (np.all(np.isfinite(new.cell_state)) and np.all(np.isfinite(new.h))):
        raise FloatingPointError("non-finite LSTM state")
    return new


def _step(cell: LstmCell, state: LstmState, e_in) -> LstmState:
    a = _preactivations(cell, e_in, state.h)
    gates = expit(a[..., :3, :])
    cand = _candidate(a[..., 3, :], cell.activation)
    c = gates[..., 0, :] * state.cell_state + gates[..., 1, :] * cand
    h = np.tanh(c) * gates[..., 2, :]
    return LstmState(h, c)


def readout(cell: LstmCell, state: LstmState):
    return (cell.w_out * state.h).sum(axis=-1) + cell.b_out


def forecast3(cell: LstmCell, recent) -> np.ndarray:
    """Forecast the next three quanta from the last three.

    ``recent`` has shape ``(..., 3)`` with values in [0, 1], oldest first.
    The cell consumes the three values from a zero state; each clamped
    prediction is then fed back as the next input.
    """
    recent = np.asarray(recent, dtype=float)
    if recent.shape[-1] != 3:
        raise ValueError("forecast3 needs exactly three recent quanta")
    if not np.all((recent >= 0.0) & (recent <= 1.0)):
        raise ValueError("recent quanta must lie in [0, 1]")
    state = LstmState.zeros(cell.hidden_size, recent.shape[:-1])
    for k in range(3):
        state = _step(cell, state, recent[..., k])
    out = []
    for k in range(3):
        y = np.clip(readout(cell, state), 0.0, 1.0)
        out.append(y)
        if k < 2:
            state = _step(cell, state, y)
    if not np.all(np.isfinite(state.h)):
        raise FloatingPointError("non-finite LSTM state")
    return np.stack(out, axis=-1)


# --- training ---------------------------------------------------------------


def _forward(params, X, activation):
    """Run windows ``X`` (B, n, L) through B independent cells.

    The prediction made after reading ``X[..., k]`` targets ``X[..., k+1]``.
    Every reduction and product runs per leading index with the same
    kernel, so a lane's numbers do not depend on the other lanes.
    """
    U, Z, b, w_out, b_out = (params[k] for k in ("U", "Z", "b", "w_out", "b_out"))
    B, n, L = X.shape
    H = U.shape[-1]
    ZcatT = np.swapaxes(Z.reshape(B, 4 * H, H), 1, 2)
    h = np.zeros((B, n, H))
    c = np.zeros((B, n, H))
    cache = []
    preds = np.empty((B, n, L - 1))
    for k in range(L - 1):
        e = X[:, :, k]
        a = (b[:, None] + U[:, None] * e[..., None, None]) + np.matmul(h, ZcatT).reshape(B, n, 4, H)
        gates = expit(a[:, :, :3])
        g_f, g_in, g_out = gates[:, :, 0], gates[:, :, 1], gates[:, :, 2]
        cand = _candidate(a[:, :, 3], activation)
        c_new = g_f * c + g_in * cand
        tc = np.tanh(c_new)
        h_new = tc * g_out
        cache.append((e, h, c, g_f, g_in, g_out, cand, tc))
        h, c = h_new, c_new
        preds[:, :, k] = np.matmul(h, w_out[:, :, None])[..., 0] + b_out[:, None]
    return preds, cache, h


def _losses(preds, X):
    return np.mean((preds - X[:, :, 1:]) ** 2, axis=(1, 2))


def _loss_and_grads(params, X, activation):
    """Per-lane loss ``(B,)`` and gradients (each with a leading ``B`` axis)."""
    preds, cache, _ = _forward(params, X, activation)
    B, n, L = X.shape
    err = preds - X[:, :, 1:]
    m = n * (L - 1)
    loss = np.mean(err**2, axis=(1, 2))
    dy = 2.0 * err / m  # (B, n, L-1)

    U, Z, w_out = params["U"], params["Z"], params["w_out"]
    H = U.shape[-1]
    Zcat = Z.reshape(B, 4 * H, H)
    gU = np.zeros((B, 1, 4 * H))
    gZ = np.zeros((B, 4 * H, H))
    gb = np.zeros((B, 4, H))
    g_wout = np.zeros((B, 1, H))
    g_bout = dy.sum(axis=(1, 2))
    dh_next = np.zeros((B, n, H))
    dc_next = np.zeros((B, n, H))
    for k in reversed(range(L - 1)):
        e, h_prev, c_prev, g_f, g_in, g_out, cand, tc = cache[k]
        h = tc * g_out
        g_wout += np.matmul(dy[:, None, :, k], h)
        dh = dy[:, :, k, None] * w_out[:, None] + dh_next
        dc = dh * g_out * (1.0 - tc**2) + dc_next
        da = np.empty((B, n, 4, H))
        da[:, :, 0] = dc * c_prev * g_f * (1.0 - g_f)
        da[:, :, 1] = dc * cand * g_in * (1.0 - g_in)
        da[:, :, 2] = dh * tc * g_out * (1.0 - g_out)
        if activation == "sigmoid":
            da[:, :, 3] = dc * g_in * cand * (1.0 - cand)
        else:
            da[:, :, 3] = dc * g_in * (1.0 - cand**2)
        gb += da.sum(axis=1)
        flat = da.reshape(B, n, 4 * H)
        gU += np.matmul(e[:, None, :], flat)
        gZ += np.matmul(np.swapaxes(flat, 1, 2), h_prev)
        dh_next = np.matmul(flat, Zcat)
        dc_next = dc * g_f
    grads = {
        "U": gU.reshape(B, 4, H), "Z": gZ.reshape(B, 4, H, H), "b": gb,
        "w_out": g_wout.reshape(B, H), "b_out": g_bout,
    }
    return loss, grads


def _batched(cell: LstmCell) -> dict[str, np.ndarray]:
    return {k: np.asarray(v, dtype=float)[None] for k, v in cell.params().items()}


def window_loss(cell: LstmCell, windows) -> float:
    """Mean squared one-step-ahead error over the given windows."""
    X = np.atleast_2d(np.asarray(windows, dtype=float))[None]
    preds, _, _ = _forward(_batched(cell), X, cell.activation)
    return float(_losses(preds, X)[0])


def loss_and_gradients(cell: LstmCell, windows) -> tuple[float, dict[str, np.ndarray]]:
    X = np.atleast_2d(np.asarray(windows, dtype=float))[None]
    loss, grads = _loss_and_grads(_batched(cell), X, cell.activation)
    return float(loss[0]), {k: v[0] for k, v in grads.items()}


def _segments(series) -> list[np.ndarray]:
    if isinstance(series, (list, tuple)) and series and np.ndim(series[0]) == 1:
        return [np.asarray(seg, dtype=float) for seg in series]
    return [np.asarray(series, dtype=float)]


def sliding_windows(series, length: int, max_windows: int | None = None) -> np.ndarray:
    """All length-``length`` windows, evenly subsampled down to ``max_windows``.

    ``series`` may also be a list of segments; windows never straddle two
    segments.
    """
    segs = [seg for seg in _segments(series) if len(seg) >= length]
    if not segs:
        total = max((len(seg) for seg in _segments(series)), default=0)
        raise ValueError(f"series of length {total} is shorter than the window ({length})")
    X = np.concatenate([np.lib.stride_tricks.sliding_window_view(seg, length) for seg in segs])
    if max_windows is not None and len(X) > max_windows:
        X = X[np.linspace(0, len(X) - 1, max_windows).round().astype(int)]
    return np.ascontiguousarray(X)


def train(series, cfg: TrainConfig = TrainConfig()) -> LstmCell:
    """Fit a cell to a normalised quanta series (or a list of segments).

    Mini-batch Adam (or plain gradient descent, ``cfg.optimizer="sgd"``)
    over sliding windows with gradient-norm clipping. The parameters with
    the lowest full-data loss seen (initial parameters included) are
    returned, so training never makes the fit worse.
    """
    return train_many([series], [cfg])[0]


def train_many(series_list, cfgs) -> list[LstmCell]:
    """Train one cell per series; same result as calling :func:`train` on each.

    Series whose configs differ only in ``seed`` and that yield the same
    number of windows are trained together as lanes of one batch.
    """
    cfgs = list(cfgs)
    series_list = list(series_list)
    if len(cfgs) != len(series_list):
        raise ValueError("need one TrainConfig per series")
    windows = []
    for series, cfg in zip(series_list, cfgs):
        if not all(np.all((seg >= 0.0) & (seg <= 1.0)) for seg in _segments(series)):
            raise ValueError("training series must be normalised to [0, 1]")
        windows.append(sliding_windows(series, cfg.window_length, cfg.max_windows))
    groups: dict = {}
    for i, (X, cfg) in enumerate(zip(windows, cfgs)):
        groups.setdefault((replace(cfg, seed=0), X.shape), []).append(i)
    out: list = [None] * len(cfgs)
    for (cfg, _), idx in groups.items():
        cells = _train_lanes(np.stack([windows[i] for i in idx]), cfg, [cfgs[i].seed for i in idx])
        for i, cell in zip(idx, cells):
            out[i] = cell
    return out


def _train_lanes(X, cfg: TrainConfig, seeds) -> list[LstmCell]:
    B, n, _ = X.shape
    rngs = [np.random.default_rng(seed) for seed in seeds]
    cells = [LstmCell.random(cfg.hidden_size, rng, activation=cfg.candidate_activation) for rng in rngs]
    stacked = stack_cells(cells)
    params = {k: np.array(v, dtype=float) for k, v in stacked.params().items()}

    moment1 = {k: np.zeros_like(v) for k, v in params.items()}
    moment2 = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    lanes = np.arange(B)

    preds, _, _ = _forward(params, X, cfg.candidate_activation)
    best_loss = _losses(preds, X)
    best = {k: v.copy() for k, v in params.items()}
    for epoch in range(1, cfg.epochs + 1):
        order = np.stack([rng.permutation(n) for rng in rngs])
        for start in range(0, n, cfg.batch_size):
            batch = X[lanes[:, None], order[:, start : start + cfg.batch_size]]
            loss, grads = _loss_and_grads(params, batch, cfg.candidate_activation)
            if not np.all(np.isfinite(loss)):
                raise TrainingDivergence(f"non-finite loss in epoch {epoch}")
            sq = np.zeros(B)
            for g in grads.values():
                sq = sq + np.sum((g * g).reshape(B, -1), axis=1)
            norm = np.sqrt(sq)
            clip = np.where(norm > 0, np.minimum(1.0, cfg.clip_norm / np.where(norm > 0, norm, 1.0)), 1.0)
            t += 1
            for k in params:
                g = grads[k] * clip.reshape((B,) + (1,) * (grads[k].ndim - 1))
                if cfg.optimizer == "sgd":
                    params[k] -= cfg.learning_rate * g
                    continue
                moment1[k] = beta1 * moment1[k] + (1 - beta1) * g
                moment2[k] = beta2 * moment2[k] + (1 - beta2) * g * g
                m_hat = moment1[k] / (1 - beta1**t)
                v_hat = moment2[k] / (1 - beta2**t)
                params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        preds, _, _ = _forward(params, X, cfg.candidate_activation)
        loss = _losses(preds, X)
        if not np.all(np.isfinite(loss)):
            raise TrainingDivergence(f"non-finite loss in epoch {epoch}")
        better = loss < best_loss
        if better.any():
            best_loss = np.where(better, loss, best_loss)
            for k in params:
                best[k][better] = params[k][better]
    return [cells[i].with_params({k: v[i].copy() for k, v in best.items()}) for i in range(B)]


def gradient_check(cell: LstmCell, window, step: float = 1e-5, abs_tol: float = 1e-8) -> float:
    """Largest disagreement between BPTT and central finite differences.

    Per parameter the error is ``|a - n| / max(|a|, |n|)``; when both
    gradients are below ``abs_tol`` the plain difference ``|a - n|`` is used
    instead.
    """
    X = np.atleast_2d(np.asarray(window, dtype=float))
    _, grads = loss_and_gradients(cell, X)
    analytic = np.concatenate([np.ravel(grads[n]) for n in PARAM_NAMES])
    theta = cell.flat().astype(float)
    numeric = np.empty_like(theta)
    for i in range(len(theta)):
        orig = theta[i]
        theta[i] = orig + step
        up = window_loss(cell.from_flat(theta), X)
        theta[i] = orig - step
        down = window_loss(cell.from_flat(theta), X)
        theta[i] = orig
        numeric[i] = (up - down) / (2 * step)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    err = np.where(scale < abs_tol, diff, diff / np.where(scale < abs_tol, 1.0, scale))
    return float(err.max())


# --- persistence ------------------------------------------------------------


def save_cell(cell: LstmCell, path) -> None:
    lines = [f"{FORMAT_TAG},{cell.hidden_size},{cell.activation}"]
    for name in PARAM_NAMES:
        lines.append(",".join(repr(float(v)) for v in np.ravel(getattr(cell, name))))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cell(path) -> LstmCell:
    lines = Path(path).read_text().splitlines()
    try:
        tag, H, activation = lines[0].split(",")
        H = int(H)
    except (IndexError, ValueError):
        raise ValueError(f"{path}: bad model header") from None
    if tag != FORMAT_TAG or len(lines) < 1 + len(PARAM_NAMES):
        raise ValueError(f"{path}: not an {FORMAT_TAG} model file")
    template = LstmCell.zeros(H, activation)
    values = np.concatenate([np.array(line.split(","), dtype=float) for line in lines[1:6]])
    if values.size != template.flat().size:
        raise ValueError(f"{path}: expected {template.flat().size} parameters, found {values.size}")
    return template.from_flat(values)
