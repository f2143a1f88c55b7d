"""Dense float64 tensors with reverse-mode differentiation.

Define-by-run: every operation records its parent tensors and a
backward closure, and :func:`backward` walks the recorded graph once in
reverse topological order, accumulating gradients.  Only the primitives
needed by the hashed-feature encoder and the training losses exist;
shapes must match exactly (no broadcasting), and everything is float64.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NumericFault

# Norm floor used by callers that must never divide by zero.
NORM_EPS = 1e-12


class Tensor:
    """A float64 array plus an optional gradient slot.

    Leaves created with ``requires_grad=True`` get a zero gradient
    array immediately, so after any backward pass every such leaf holds
    a populated ``grad`` (zero if the loss never touched it).  Interior
    nodes receive gradients lazily during backward and are discarded
    with the graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "stop_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.stop_grad = False
        self.grad: np.ndarray | None = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- graph bookkeeping -------------------------------------------------

    def detach(self) -> "Tensor":
        """A view of the same values that blocks gradient flow entirely."""
        out = Tensor(self.data)
        out.stop_grad = True
        return out

    def zero_grad_(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    # -- conveniences ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != ():
            raise ContractError(f"item() needs a scalar, got shape {self.data.shape}")
        return float(self.data)

    def __float__(self) -> float:
        return self.item()

    def __repr__(self) -> str:
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    # -- operators ---------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __mul__(self, scalar) -> "Tensor":
        return scale(self, scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Tensor":
        return scale(self, 1.0 / float(scalar))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def sum(self) -> "Tensor":
        def back(g, t=self):
            _accum(t, g * np.ones_like(t.data))

        return _op(np.sum(self.data), (self,), back)

    def mean(self) -> "Tensor":
        n = self.data.size
        if n == 0:
            raise ContractError("mean of an empty tensor")

        def back(g, t=self):
            _accum(t, (g / n) * np.ones_like(t.data))

        return _op(np.mean(self.data), (self,), back)

    def pick(self, index: int) -> "Tensor":
        """Scalar entry ``self[index]`` of a 1-d tensor."""
        if self.data.ndim != 1:
            raise ContractError(f"pick expects a 1-d tensor, got shape {self.shape}")
        if not 0 <= index < self.data.shape[0]:
            raise ContractError(f"pick index {index} out of range for length {self.data.shape[0]}")

        def back(g, t=self, i=index):
            grad = np.zeros_like(t.data)
            grad[i] = g
            _accum(t, grad)

        return _op(self.data[index], (self,), back)

    def take(self, indices: Sequence[int]) -> "Tensor":
        """Gather entries of a 1-d tensor at ``indices`` (duplicates allowed)."""
        if self.data.ndim != 1:
            raise ContractError(f"take expects a 1-d tensor, got shape {self.shape}")
        idx = np.asarray(list(indices), dtype=np.intp)
        if idx.size == 0:
            raise ContractError("take needs at least one index")
        if idx.min() < 0 or idx.max() >= self.data.shape[0]:
            raise ContractError("take index out of range")

        def back(g, t=self, ii=idx):
            grad = np.zeros_like(t.data)
            np.add.at(grad, ii, g)
            _accum(t, grad)

        return _op(self.data[idx], (self,), back)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _op(data, parents: tuple[Tensor, ...], back: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = back
    return out


# -- primitives --------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ContractError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def back(g):
        _accum(a, g)
        _accum(b, g)

    return _op(a.data + b.data, (a, b), back)


def neg(a: Tensor) -> Tensor:
    return _op(-a.data, (a,), lambda g: _accum(a, -g))


def scale(a: Tensor, s) -> Tensor:
    s = float(s)
    return _op(a.data * s, (a,), lambda g: _accum(a, g * s))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: (m,k)@(k,p) -> (m,p) or (m,k)@(k,) -> (m,)."""
    if a.data.ndim == 2 and b.data.ndim == 2:
        if a.data.shape[1] != b.data.shape[0]:
            raise ContractError(f"matmul inner dims differ: {a.shape} vs {b.shape}")

        def back(g):
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)

        return _op(a.data @ b.data, (a, b), back)

    if a.data.ndim == 2 and b.data.ndim == 1:
        if a.data.shape[1] != b.data.shape[0]:
            raise ContractError(f"matmul inner dims differ: {a.shape} vs {b.shape}")

        def back(g):
            _accum(a, np.outer(g, b.data))
            _accum(b, a.data.T @ g)

        return _op(a.data @ b.data, (a, b), back)

    raise ContractError(f"matmul supports (2d,2d) and (2d,1d), got {a.shape} @ {b.shape}")


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ContractError(f"dot expects equal-length vectors, got {a.shape} and {b.shape}")

    def back(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _op(np.dot(a.data, b.data), (a, b), back)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _op(t, (a,), lambda g: _accum(a, g * (1.0 - t * t)))


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack same-shape tensors along a new leading axis."""
    ts = list(tensors)
    if not ts:
        raise ContractError("stack needs at least one tensor")
    shape = ts[0].data.shape
    for t in ts:
        if t.data.shape != shape:
            raise ContractError(f"stack shape mismatch: {t.data.shape} vs {shape}")

    def back(g):
        for i, t in enumerate(ts):
            _accum(t, g[i])

    return _op(np.stack([t.data for t in ts]), tuple(ts), back)


def softmax(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Temperature softmax of a 1-d tensor, stabilised by max subtraction."""
    _check_dist_input(x, temperature, "softmax")
    z = x.data / temperature
    z = z - np.max(z)
    e = np.exp(z)
    s = e / np.sum(e)

    def back(g):
        _accum(x, s * (g - np.dot(g, s)) / temperature)

    return _op(s, (x,), back)


def log_softmax(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Log of the temperature softmax, kept in log space throughout."""
    _check_dist_input(x, temperature, "log_softmax")
    z = x.data / temperature
    z = z - np.max(z)
    y = z - np.log(np.sum(np.exp(z)))
    s = np.exp(y)

    def back(g):
        _accum(x, (g - s * np.sum(g)) / temperature)

    return _op(y, (x,), back)


def _check_dist_input(x: Tensor, temperature: float, name: str) -> None:
    if x.data.ndim != 1 or x.data.size == 0:
        raise ContractError(f"{name} expects a nonempty 1-d tensor, got shape {x.shape}")
    if temperature <= 0:
        raise ContractError(f"{name} temperature must be positive, got {temperature}")
    if not np.all(np.isfinite(x.data)):
        raise NumericFault(f"{name} input contains non-finite values")


def l2_normalize(x: Tensor, floor: float | None = None) -> Tensor:
    """Scale a 1-d tensor to unit Euclidean norm.

    With ``floor=None`` a norm at or below NORM_EPS counts as a
    degenerate vector and raises.  Passing ``floor`` replaces the
    denominator by ``max(norm, floor)`` so the call never fails; the
    encoder uses that to keep empty-text embeddings finite.
    """
    if x.data.ndim != 1:
        raise ContractError(f"l2_normalize expects a 1-d tensor, got shape {x.shape}")
    n = float(np.linalg.norm(x.data))
    if floor is None:
        if n <= NORM_EPS:
            raise ContractError(f"l2_normalize of a degenerate vector (norm {n:.3e})")
        denom = n
    else:
        denom = max(n, float(floor))
    y = x.data / denom

    if n == denom:
        # Smooth branch: denominator is the norm itself.
        def back(g):
            _accum(x, (g - y * np.dot(y, g)) / denom)

    else:
        # Floored branch: the map degenerates to the linear x / floor.
        def back(g):
            _accum(x, g / denom)

    return _op(y, (x,), back)


def kl_div(p: Tensor, log_q: Tensor) -> Tensor:
    """KL(p || q) from probabilities p and log-probabilities log_q.

    Terms with p_i == 0 contribute zero (the 0 * log 0 convention), both
    to the value and to the gradient with respect to p.
    """
    if p.data.ndim != 1 or log_q.data.ndim != 1 or p.data.shape != log_q.data.shape:
        raise ContractError(f"kl_div expects matching vectors, got {p.shape} and {log_q.shape}")
    if np.any(p.data < 0):
        raise ContractError("kl_div: p has negative entries")
    if abs(float(np.sum(p.data)) - 1.0) > 1e-8:
        raise ContractError(f"kl_div: p sums to {float(np.sum(p.data))!r}, not 1")
    if not np.all(np.isfinite(log_q.data)):
        raise ContractError("kl_div: log_q contains non-finite values")

    mask = p.data > 0
    log_p = np.zeros_like(p.data)
    log_p[mask] = np.log(p.data[mask])
    diff = np.where(mask, log_p - log_q.data, 0.0)
    value = np.sum(p.data * diff)

    def back(g):
        _accum(p, g * np.where(mask, diff + 1.0, 0.0))
        _accum(log_q, -g * p.data)

    return _op(value, (p, log_q), back)


# -- reverse pass -------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf below ``loss``.

    ``loss`` must be scalar.  Gradients add onto whatever the leaves
    already hold, so training code zeroes them between steps; each
    recorded graph is meant to be walked once.
    """
    if loss.data.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    # Iterative post-order DFS: parents end up before their consumers.
    topo: list[Tensor] = []
    seen: set[int] = set()
    work: list[tuple[Tensor, bool]] = [(loss, False)]
    while work:
        node, expanded = work.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        work.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                work.append((parent, False))

    _accum(loss, np.array(1.0))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
