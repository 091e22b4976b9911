"""Dense float tensors with reverse-mode automatic differentiation.

The engine is deliberately small: it covers exactly the operations needed by
the convnet skeleton (conv / max-pool / activations / dropout / linear) and
the attribute-predicting MLPs, in numpy, single-threaded and deterministic.
Gradients are recorded on an explicit tape; `Tape.backward` replays it in
exact reverse order and leaves per-tensor `.grad` buffers behind.

Everything runs in float32 by default. float64 is accepted so test harnesses
can drive the same kernels at higher precision (finite-difference checks).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError

_ALLOWED_DTYPES = (np.float32, np.float64)


class Tensor:
    """N-dimensional float array (row-major) plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.ascontiguousarray(data, dtype=dtype)
        if arr.dtype not in _ALLOWED_DTYPES:
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, grad={'set' if self.grad is not None else 'none'})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # First write may adopt the array, but only if it owns its buffer;
    # views alias another node's grad and must be copied before reuse.
    if t.grad is None:
        t.grad = g if g.base is None else g.copy()
    else:
        t.grad += g


class Tape:
    """Ordered record of primitive ops; backward visits them in reverse."""

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes: list[Callable[[], None]] = []

    def record(self, backward_fn: Callable[[], None]) -> None:
        self._nodes.append(backward_fn)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss)=1 and propagate to every recorded input.

        The tape is consumed: a second backward requires a fresh forward pass.
        """
        if loss.data.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {loss.shape}"
            )
        loss.grad = np.ones_like(loss.data)
        for fn in reversed(self._nodes):
            fn()
        self._nodes.clear()


# ---------------------------------------------------------------------------
# primitive ops
#
# Every op takes the tape first (None = no recording, i.e. inference) and
# returns a fresh Tensor. Backward closures read `out.grad` which is fully
# accumulated by the time the closure runs, because replay order is the exact
# reverse of recording order.
# ---------------------------------------------------------------------------


def add(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)
    if tape is not None:

        def bw():
            _accumulate(a, out.grad)
            _accumulate(b, out.grad)

        tape.record(bw)
    return out


def scale(tape: Tape | None, a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.data * a.data.dtype.type(factor))
    if tape is not None:

        def bw():
            _accumulate(a, out.grad * a.data.dtype.type(factor))

        tape.record(bw)
    return out


def mean_tensors(tape: Tape | None, parts: Sequence[Tensor]) -> Tensor:
    """Elementwise mean of same-shape tensors (ensemble averaging)."""
    if not parts:
        raise ContractError("mean_tensors: empty input list")
    acc = parts[0].data.copy()
    for p in parts[1:]:
        if p.shape != parts[0].shape:
            raise ShapeError("mean_tensors: shape mismatch between members")
        acc += p.data
    k = len(parts)
    out = Tensor(acc / acc.dtype.type(k))
    if tape is not None:

        def bw():
            share = out.grad / out.grad.dtype.type(k)
            for p in parts:
                _accumulate(p, share)

        tape.record(bw)
    return out


def reshape(tape: Tape | None, a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    if tape is not None:

        def bw():
            _accumulate(a, out.grad.reshape(a.shape))

        tape.record(bw)
    return out


def concat(tape: Tape | None, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    if tape is not None:
        sizes = [p.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)

        def bw():
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(lo, hi)
                _accumulate(p, out.grad[tuple(sl)])

        tape.record(bw)
    return out


def linear(tape: Tape | None, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b with x:[B,I], w:[I,O], b:[O]."""
    if x.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: x{x.shape} incompatible with w{w.shape}")
    out = Tensor(x.data @ w.data + b.data)
    if tape is not None:

        def bw():
            g = out.grad
            _accumulate(x, g @ w.data.T)
            _accumulate(w, x.data.T @ g)
            _accumulate(b, g.sum(axis=0))

        tape.record(bw)
    return out


def conv2d(tape: Tape | None, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Same-padded 2D convolution. x:[B,C,H,W], w:[O,C,k,k], b:[O].

    Implemented as k*k shifted GEMMs over a zero-padded input; this keeps
    peak memory flat (no full im2col buffer) while every inner product still
    goes through BLAS.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input, got {x.shape}")
    B, C, H, W = x.shape
    O, Ci, kh, kw = w.shape
    if Ci != C:
        raise ShapeError(f"conv2d: input has {C} channels, weights expect {Ci}")
    p = kh // 2
    xp = np.zeros((B, C, H + 2 * p, W + 2 * p), dtype=x.data.dtype)
    xp[:, :, p : p + H, p : p + W] = x.data

    acc = np.zeros((B, H, W, O), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + H, j : j + W]
            acc += np.tensordot(xs, w.data[:, :, i, j], axes=([1], [1]))
    out = Tensor(np.ascontiguousarray(acc.transpose(0, 3, 1, 2)) + b.data[None, :, None, None])

    if tape is not None:

        def bw():
            g = np.ascontiguousarray(out.grad.transpose(0, 2, 3, 1))  # [B,H,W,O]
            _accumulate(b, out.grad.sum(axis=(0, 2, 3)))
            dw = np.empty_like(w.data)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    xs = xp[:, :, i : i + H, j : j + W]
                    dw[:, :, i, j] = np.tensordot(g, xs, axes=([0, 1, 2], [0, 2, 3]))
                    dxs = np.tensordot(g, w.data[:, :, i, j], axes=([3], [0]))  # [B,H,W,C]
                    dxp[:, :, i : i + H, j : j + W] += dxs.transpose(0, 3, 1, 2)
            _accumulate(w, dw)
            _accumulate(x, dxp[:, :, p : p + H, p : p + W])

        tape.record(bw)
    return out


def maxpool2(tape: Tape | None, x: Tensor) -> Tensor:
    """2x2 max-pooling with stride 2; odd trailing rows/cols are dropped.

    Ties take the first window position (fixed scan order), which keeps the
    backward routing deterministic.
    """
    B, C, H, W = x.shape
    H2, W2 = H // 2, W // 2
    if H2 < 1 or W2 < 1:
        raise ShapeError(f"maxpool2: spatial extent {H}x{W} too small to pool")
    xc = x.data[:, :, : H2 * 2, : W2 * 2]
    win = (
        xc.reshape(B, C, H2, 2, W2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(B, C, H2, W2, 4)
    )
    idx = win.argmax(axis=-1)
    out = Tensor(np.take_along_axis(win, idx[..., None], axis=-1)[..., 0])

    if tape is not None:

        def bw():
            dwin = np.zeros_like(win)
            np.put_along_axis(dwin, idx[..., None], out.grad[..., None], axis=-1)
            dx = np.zeros_like(x.data)
            dx[:, :, : H2 * 2, : W2 * 2] = (
                dwin.reshape(B, C, H2, W2, 2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(B, C, H2 * 2, W2 * 2)
            )
            _accumulate(x, dx)

        tape.record(bw)
    return out


def relu(tape: Tape | None, x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0))
    if tape is not None:
        mask = x.data > 0

        def bw():
            _accumulate(x, out.grad * mask)

        tape.record(bw)
    return out


def prelu(tape: Tape | None, x: Tensor, slope: Tensor) -> Tensor:
    """PReLU with a single learnable slope for the whole layer."""
    s = slope.data.reshape(())[()]
    neg = x.data < 0
    out = Tensor(np.where(neg, x.data * s, x.data))
    if tape is not None:

        def bw():
            _accumulate(x, out.grad * np.where(neg, s, x.data.dtype.type(1)))
            _accumulate(slope, np.array([(out.grad * np.where(neg, x.data, 0)).sum()], dtype=x.data.dtype))

        tape.record(bw)
    return out


def elu(tape: Tape | None, x: Tensor, alpha: float = 1.0) -> Tensor:
    neg = x.data < 0
    expm1 = np.expm1(np.minimum(x.data, 0)) * x.data.dtype.type(alpha)
    out = Tensor(np.where(neg, expm1, x.data))
    if tape is not None:

        def bw():
            # d/dx alpha*(e^x - 1) = alpha*e^x = y + alpha on the negative side
            _accumulate(x, out.grad * np.where(neg, expm1 + x.data.dtype.type(alpha), x.data.dtype.type(1)))

        tape.record(bw)
    return out


def tanh(tape: Tape | None, x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    if tape is not None:

        def bw():
            _accumulate(x, out.grad * (1 - out.data * out.data))

        tape.record(bw)
    return out


def dropout(tape: Tape | None, x: Tensor, keep: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: scale by 1/keep at train time so inference is identity."""
    if not 0 < keep <= 1:
        raise ContractError(f"dropout: keep probability {keep} outside (0, 1]")
    mask = (rng.random(x.shape) < keep).astype(x.data.dtype) / x.data.dtype.type(keep)
    out = Tensor(x.data * mask)
    if tape is not None:

        def bw():
            _accumulate(x, out.grad * mask)

        tape.record(bw)
    return out


def softmax(tape: Tape | None, x: Tensor) -> Tensor:
    """Row-wise stable softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = Tensor(e / e.sum(axis=-1, keepdims=True))
    if tape is not None:

        def bw():
            g = out.grad
            dot = (g * out.data).sum(axis=-1, keepdims=True)
            _accumulate(x, (g - dot) * out.data)

        tape.record(bw)
    return out


def nll_rows(tape: Tape | None, probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under probability rows."""
    B = probs.shape[0]
    rows = np.arange(B)
    picked = np.clip(probs.data[rows, labels], 1e-12, None)
    out = Tensor(np.array(-np.log(picked).mean(), dtype=probs.data.dtype))
    if tape is not None:

        def bw():
            dp = np.zeros_like(probs.data)
            dp[rows, labels] = -out.grad[()] / (picked * B)
            _accumulate(probs, dp)

        tape.record(bw)
    return out


def cross_entropy_logits(tape: Tape | None, logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy, fused for stability."""
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy_logits: expected [B,K] logits, got {logits.shape}")
    B = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(B)
    out = Tensor(np.array(-logp[rows, labels].mean(), dtype=logits.data.dtype))
    if tape is not None:

        def bw():
            p = np.exp(logp)
            p[rows, labels] -= 1
            _accumulate(logits, p * (out.grad[()] / B))

        tape.record(bw)
    return out


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Inference-only softmax on a raw array (no tape, no Tensor wrapper)."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def assert_finite(t: Tensor, context: str) -> None:
    if not np.isfinite(t.data).all():
        raise ContractError(f"{context}: non-finite values in tensor of shape {t.shape}")
