"""Reverse-mode automatic differentiation on numpy arrays.

A ``Tape`` records primitive operations as they execute; ``backward`` replays
the record in reverse, calling one vector-Jacobian closure per input. The op
set is deliberately small: dense affine layers, the activations used by the
estimator heads, and a few batch-level plumbing primitives (row permutation,
column concatenation, per-row log-mean-exp, power normalization).

Everything is float64 and seeded from the outside; a graph replayed on the
same inputs produces bit-identical values and gradients.
"""

from __future__ import annotations

import numpy as np


class AutodiffError(Exception):
    """Base class for graph construction and execution failures."""


class ShapeMismatch(AutodiffError):
    """Operands of a primitive have incompatible shapes."""


class NonFiniteOutput(AutodiffError):
    """A primitive produced NaN or infinity."""


class TapeError(AutodiffError):
    """The tape was used in an unsupported way (wrong tape, non-scalar output)."""


class Tensor:
    """Immutable-by-convention wrapper around a float64 ndarray."""

    __slots__ = ("data", "_slot")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self._slot = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise TapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _logistic(xd: np.ndarray) -> np.ndarray:
    # stable logistic: exp of a non-positive argument only
    s = np.empty_like(xd)
    pos = xd >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    s[~pos] = ex / (1.0 + ex)
    return s


def _require_finite(op: str, out: np.ndarray) -> np.ndarray:
    # np.isfinite(sum) is cheaper than isfinite(all) and catches any nan/inf
    # except cancelling infinities, which a second full check rules out.
    s = out.sum()
    if not np.isfinite(s) and not np.isfinite(out).all():
        raise NonFiniteOutput(
            f"op '{op}' produced non-finite values (shape {out.shape}); "
            "if this came from exp of a large critic output, consider "
            "clipping the critic or lowering the learning rate"
        )
    if not np.isfinite(s):
        # sum overflowed but entries are finite: still unusable downstream
        raise NonFiniteOutput(f"op '{op}' output sum overflows (shape {out.shape})")
    return out


class Tape:
    """Records primitives so a scalar output can be differentiated.

    Tensors created by ops on this tape are registered automatically. Leaf
    tensors whose gradients are wanted must be passed through ``watch`` (or
    created with ``leaf``); gradients of unwatched leaves are skipped.
    """

    def __init__(self):
        self._tensors: list[Tensor] = []
        self._nodes: list[tuple[int, tuple[tuple[int, object], ...]]] = []
        self._produced: set[int] = set()
        self._watched: set[int] = set()

    # -- registration -----------------------------------------------------

    def _register(self, t: Tensor) -> int:
        if t._slot is not None and t._slot < len(self._tensors) and self._tensors[t._slot] is t:
            return t._slot
        slot = len(self._tensors)
        t._slot = slot
        self._tensors.append(t)
        return slot

    def watch(self, t: Tensor) -> Tensor:
        """Mark ``t`` as a leaf whose gradient ``backward`` must return."""
        self._watched.add(self._register(t))
        return t

    def leaf(self, data) -> Tensor:
        """Create a watched leaf tensor on this tape."""
        return self.watch(Tensor(data))

    def constant(self, data) -> Tensor:
        """Create an unwatched input tensor (no gradient is accumulated)."""
        t = Tensor(data)
        self._register(t)
        return t

    def _record(self, op: str, out_data: np.ndarray, vjps) -> Tensor:
        out = Tensor(_require_finite(op, out_data))
        slot = self._register(out)
        self._produced.add(slot)
        self._nodes.append((slot, tuple((self._register(t), fn) for t, fn in vjps)))
        return out

    def _slot_of(self, t: Tensor) -> int:
        if t._slot is None or t._slot >= len(self._tensors) or self._tensors[t._slot] is not t:
            raise TapeError("tensor does not belong to this tape")
        return t._slot

    # -- primitives --------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
        ad, bd = a.data, b.data
        out = ad @ bd
        return self._record(
            "matmul",
            out,
            [(a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)],
        )

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"add_bias: {x.shape} + {b.shape}")
        return self._record(
            "add_bias",
            x.data + b.data,
            [(x, lambda g: g), (b, lambda g: g.sum(axis=0))],
        )

    def _require_same_shape(self, op, a, b):
        if a.shape != b.shape:
            raise ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._require_same_shape("add", a, b)
        return self._record(
            "add", a.data + b.data, [(a, lambda g: g), (b, lambda g: g)]
        )

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        self._require_same_shape("sub", a, b)
        return self._record(
            "sub", a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)]
        )

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        self._require_same_shape("mul", a, b)
        ad, bd = a.data, b.data
        return self._record(
            "mul", ad * bd, [(a, lambda g: g * bd), (b, lambda g: g * ad)]
        )

    def relu(self, x: Tensor) -> Tensor:
        xd = x.data
        return self._record("relu", np.maximum(xd, 0.0), [(x, lambda g: g * (xd > 0.0))])

    def sigmoid(self, x: Tensor) -> Tensor:
        s = _logistic(x.data)
        return self._record("sigmoid", s, [(x, lambda g: g * s * (1.0 - s))])

    def softplus(self, x: Tensor) -> Tensor:
        sig = _logistic(x.data)
        return self._record(
            "softplus", np.logaddexp(0.0, x.data), [(x, lambda g: g * sig)]
        )

    def log(self, x: Tensor, floor: float = 1e-12) -> Tensor:
        # inputs are clamped at `floor`; below it the gradient is zero,
        # consistent with differentiating log(clip(x, floor, inf))
        xd = np.maximum(x.data, floor)
        inside = x.data >= floor
        return self._record("log", np.log(xd), [(x, lambda g: g * inside / xd)])

    def exp(self, x: Tensor) -> Tensor:
        with np.errstate(over="raise"):
            try:
                out = np.exp(x.data)
            except FloatingPointError:
                raise NonFiniteOutput(
                    "op 'exp' overflowed; the critic output is too large, "
                    "consider clipping (smile) or a smaller learning rate"
                ) from None
        return self._record("exp", out, [(x, lambda g: g * out)])

    def clip(self, x: Tensor, lo: float, hi: float) -> Tensor:
        if not lo < hi:
            raise ShapeMismatch(f"clip: empty interval [{lo}, {hi}]")
        xd = x.data
        inside = (xd >= lo) & (xd <= hi)
        return self._record("clip", np.clip(xd, lo, hi), [(x, lambda g: g * inside)])

    def mean(self, x: Tensor) -> Tensor:
        n = x.data.size
        shape = x.data.shape
        return self._record(
            "mean",
            np.asarray(x.data.mean()),
            [(x, lambda g: np.broadcast_to(g / n, shape))],
        )

    def scale(self, x: Tensor, c: float) -> Tensor:
        c = float(c)
        return self._record("scale", c * x.data, [(x, lambda g: c * g)])

    def affine(self, x: Tensor, a: float, b: float) -> Tensor:
        """Elementwise a*x + b with python-scalar coefficients."""
        a = float(a)
        return self._record("affine", a * x.data + float(b), [(x, lambda g: a * g)])

    def concat_cols(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
            raise ShapeMismatch(f"concat_cols: {a.shape} vs {b.shape}")
        ka = a.shape[1]
        return self._record(
            "concat_cols",
            np.hstack([a.data, b.data]),
            [(a, lambda g: g[:, :ka]), (b, lambda g: g[:, ka:])],
        )

    def permute_rows(self, x: Tensor, perm: np.ndarray) -> Tensor:
        perm = np.asarray(perm)
        if x.data.ndim != 2 or perm.shape != (x.shape[0],):
            raise ShapeMismatch(f"permute_rows: {x.shape} with perm {perm.shape}")
        n = perm.size
        if n and not (np.bincount(perm, minlength=n) == 1).all():
            raise ShapeMismatch("permute_rows: index vector is not a permutation")

        def back(g, perm=perm):
            out = np.empty_like(g)
            out[perm] = g
            return out

        return self._record("permute_rows", x.data[perm], [(x, back)])

    def reshape(self, x: Tensor, shape) -> Tensor:
        old = x.data.shape
        return self._record(
            "reshape", x.data.reshape(shape), [(x, lambda g: g.reshape(old))]
        )

    def take_diag(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        if x.data.ndim != 2 or x.shape[1] != n:
            raise ShapeMismatch(f"take_diag: {x.shape} is not square")

        def back(g):
            out = np.zeros((n, n))
            np.fill_diagonal(out, g)
            return out

        return self._record("take_diag", np.diagonal(x.data).copy(), [(x, back)])

    def row_logmeanexp(self, x: Tensor) -> Tensor:
        """Per-row log(mean(exp(x))), shift-stabilized; output shape (n,)."""
        if x.data.ndim != 2:
            raise ShapeMismatch(f"row_logmeanexp: {x.shape} is not 2-d")
        xd = x.data
        m = xd.max(axis=1, keepdims=True)
        e = np.exp(xd - m)
        se = e.sum(axis=1, keepdims=True)
        out = (m + np.log(se)).ravel() - np.log(xd.shape[1])
        soft = e / se
        return self._record(
            "row_logmeanexp", out, [(x, lambda g: g[:, None] * soft)]
        )

    def power_norm(self, x: Tensor, power: float) -> Tensor:
        """Center columns and scale so the mean square per entry is ``power``."""
        if x.data.ndim != 2:
            raise ShapeMismatch(f"power_norm: {x.shape} is not 2-d")
        if power <= 0:
            raise ShapeMismatch(f"power_norm: power must be positive, got {power}")
        u = x.data - x.data.mean(axis=0, keepdims=True)
        ms = np.mean(u * u)
        if ms <= 0.0:
            raise NonFiniteOutput(
                "op 'power_norm' got a batch that is constant per column; "
                "the scale is undefined"
            )
        c = np.sqrt(power / ms)
        out = c * u

        def back(g, u=u, ms=ms, c=c):
            # through y = c(u) * u with c = sqrt(P / mean(u^2)):
            #   dL/du = c*g - c * u * mean(g*u) / mean(u*u)
            # then through the column centering: subtract column means.
            gu = c * g - (c * np.mean(g * u) / ms) * u
            return gu - gu.mean(axis=0, keepdims=True)

        return self._record("power_norm", out, [(x, back)])

    # -- reverse pass -------------------------------------------------------

    def backward(self, out: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of scalar ``out`` with respect to every watched leaf.

        Unused watched leaves get zero gradients. Raises if ``out`` is not a
        scalar produced on this tape.
        """
        slot = self._slot_of(out)
        if out.data.size != 1:
            raise TapeError(f"backward needs a scalar output, got shape {out.shape}")
        if slot not in self._produced:
            raise TapeError("backward target was not produced by an op on this tape")

        grads: list[np.ndarray | None] = [None] * len(self._tensors)
        owned = [False] * len(self._tensors)  # may the buffer be mutated in place
        grads[slot] = np.ones_like(out.data)
        owned[slot] = True
        for node_slot, inputs in reversed(self._nodes):
            g = grads[node_slot]
            if g is None:
                continue
            for in_slot, fn in inputs:
                if in_slot not in self._produced and in_slot not in self._watched:
                    continue  # constant input, gradient unwanted
                piece = fn(g)
                if grads[in_slot] is None:
                    grads[in_slot] = piece  # borrowed; copy only if accumulated into
                elif owned[in_slot]:
                    grads[in_slot] += piece
                else:
                    grads[in_slot] = grads[in_slot] + piece
                    owned[in_slot] = True

        result: dict[Tensor, np.ndarray] = {}
        for w in self._watched:
            t = self._tensors[w]
            g = grads[w]
            result[t] = np.zeros_like(t.data) if g is None else np.asarray(g)
        return result


def backward(tape: Tape, out: Tensor) -> dict[Tensor, np.ndarray]:
    """Module-level alias for ``tape.backward(out)``."""
    return tape.backward(out)


def grad_check(fn, points, step: float = 1e-5) -> float:
    """Compare tape gradients of ``fn`` against central finite differences.

    ``fn(tape, tensors)`` must build a scalar on the given tape from the
    watched ``tensors`` (one per entry of ``points``). Returns the largest
    relative error max(|analytic - numeric|) / max(1, |analytic|) over every
    scalar parameter.

    Parameters
    ----------
    fn : callable
        Graph builder; must be deterministic given its inputs.
    points : sequence of array_like
        Evaluation point, one array per leaf.
    step : float
        Central-difference step.
    """
    arrays = [np.array(p, dtype=np.float64) for p in points]

    tape = Tape()
    leaves = [tape.leaf(a) for a in arrays]
    out = fn(tape, leaves)
    grads = tape.backward(out)
    analytic = [grads[leaf] for leaf in leaves]

    def value_at(arrs) -> float:
        t = Tape()
        return fn(t, [t.leaf(a) for a in arrs]).item()

    worst = 0.0
    for i, a in enumerate(arrays):
        flat = a.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            f_plus = value_at(arrays)
            flat[j] = orig - step
            f_minus = value_at(arrays)
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            exact = analytic[i].reshape(-1)[j]
            err = abs(exact - numeric) / max(1.0, abs(exact))
            worst = max(worst, err)
    return worst
