"""Reverse-mode differentiation: tape traversal and the finite-difference oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


class AutodiffError(RuntimeError):
    pass


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order over the recorded DAG (graphs outgrow the
    recursion limit)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable `.grad`."""
    if loss.data.size != 1:
        raise AutodiffError(
            f"backward requires a scalar loss, got shape {loss.data.shape}"
        )
    if not loss.requires_grad:
        raise AutodiffError("loss does not require grad; nothing to differentiate")
    order = _topo_order(loss)
    loss.accumulate_grad(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(tensors: Sequence[Tensor]) -> None:
    for t in tensors:
        t.grad = None


@dataclass
class GradReport:
    op: str
    max_rel_err: float
    max_abs_err: float
    probes: int

    def __post_init__(self):
        if self.max_rel_err < 0 or self.max_abs_err < 0:
            raise ValueError("errors must be non-negative")


# Relative error uses a floor so coordinates whose true derivative is ~0 are
# judged on the finite-difference noise scale rather than blowing up.
_REL_FLOOR = 1e-3


def gradcheck(
    fn: Callable[[], Tensor],
    wrt: Sequence[Tensor],
    eps: float = 1e-5,
    max_probes: int = 64,
    rng: np.random.Generator | None = None,
    name: str = "fn",
) -> GradReport:
    """Compare analytic gradients of `fn()` against central differences.

    `fn` must be a deterministic closure over the tensors in `wrt`, returning
    a scalar. Tensors larger than `max_probes` are probed at `max_probes`
    random coordinates.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = rng or np.random.default_rng(0)
    for t in wrt:
        if not t.requires_grad:
            raise AutodiffError(f"gradcheck target {t!r} does not require grad")
    zero_grads(wrt)
    out = fn()
    if not np.isfinite(out.data).all():
        raise AutodiffError(f"{name}: non-finite forward output")
    backward(out)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in wrt
    ]
    zero_grads(wrt)

    max_rel = 0.0
    max_abs = 0.0
    probes = 0
    with no_grad():
        for t, ga in zip(wrt, analytic):
            size = t.data.size
            if size <= max_probes:
                coords = np.arange(size)
            else:
                coords = rng.choice(size, size=max_probes, replace=False)
            flat = t.data.reshape(-1)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = fn().item()
                flat[i] = orig - eps
                f_minus = fn().item()
                flat[i] = orig
                if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                    raise AutodiffError(
                        f"{name}: non-finite value at probe {i} of {t!r}"
                    )
                numeric = (f_plus - f_minus) / (2.0 * eps)
                a = ga.reshape(-1)[i]
                abs_err = abs(a - numeric)
                rel_err = abs_err / max(abs(a), abs(numeric), _REL_FLOOR)
                max_abs = max(max_abs, abs_err)
                max_rel = max(max_rel, rel_err)
                probes += 1
    return GradReport(op=name, max_rel_err=max_rel, max_abs_err=max_abs, probes=probes)
