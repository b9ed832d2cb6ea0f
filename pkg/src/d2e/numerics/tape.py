"""Reverse-mode differentiation over float64 numpy arrays.

A ``Tape`` records primitive operations as they execute; ``Tape.grad`` walks
the record once in reverse creation order (which is a topological order by
construction) and accumulates vector-Jacobian products.  Nodes hold array
values, so a matrix multiply or a batched kernel evaluation is a single node
rather than thousands of scalar ones.

Construction and the backward pass are single-threaded; values are never
mutated after creation, so finished ``Var`` objects are safe to read from
anywhere.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import DisconnectedParameter

Array = np.ndarray


def _as_f64(x) -> Array:
    a = np.asarray(x, dtype=np.float64)
    return a


class Var:
    """A node value on a tape.  Arithmetic operators build new nodes."""

    __slots__ = ("tape", "value", "slot")

    def __init__(self, tape: "Tape", value: Array, slot: int):
        self.tape = tape
        self.value = value
        self.slot = slot

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape}, slot={self.slot})"

    # Operators defer to the ops module (imported late to avoid a cycle).
    def __add__(self, other):
        return _ops().add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _ops().subtract(self, other)

    def __rsub__(self, other):
        return _ops().subtract(other, self)

    def __mul__(self, other):
        return _ops().multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _ops().divide(self, other)

    def __rtruediv__(self, other):
        return _ops().divide(other, self)

    def __neg__(self):
        return _ops().negative(self)

    def __pow__(self, exponent):
        return _ops().power(self, exponent)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def __rmatmul__(self, other):
        return _ops().matmul(other, self)

    def __getitem__(self, key):
        return _ops().getitem(self, key)


_OPS_MODULE = None


def _ops():
    global _OPS_MODULE
    if _OPS_MODULE is None:
        from . import ops as _m

        _OPS_MODULE = _m
    return _OPS_MODULE


class Tape:
    """Ordered record of primitive operations plus the registered parameters."""

    __slots__ = ("_nodes", "_n_slots", "params")

    def __init__(self):
        # node = (out_slot, in_slots tuple, vjp callable)
        self._nodes: list[tuple[int, tuple[int, ...], Callable]] = []
        self._n_slots = 0
        self.params: dict[str, Var] = {}

    def _new_slot(self) -> int:
        s = self._n_slots
        self._n_slots += 1
        return s

    def parameter(self, name: str, value) -> Var:
        """Register a differentiable leaf.  Names must be unique per tape."""
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        v = _as_f64(value)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"parameter {name!r} contains non-finite entries")
        var = Var(self, v, self._new_slot())
        self.params[name] = var
        return var

    def register(self, values: dict[str, Array], prefix: str = "") -> dict[str, Var]:
        """Register a whole bundle of named arrays, returning name -> Var."""
        return {k: self.parameter(prefix + k, v) for k, v in values.items()}

    def constant(self, value) -> Var:
        """A leaf that participates in the graph but receives no gradient."""
        return Var(self, _as_f64(value), self._new_slot())

    def lift(self, x) -> Var:
        return x if isinstance(x, Var) else self.constant(x)

    def record(self, value: Array, inputs: tuple[Var, ...], vjp: Callable) -> Var:
        out = Var(self, value, self._new_slot())
        self._nodes.append((out.slot, tuple(v.slot for v in inputs), vjp))
        return out

    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    def grad(self, loss: Var, *, report_disconnected: bool = False):
        """Reverse-accumulate d(loss)/d(param) for every registered parameter.

        Returns a dict name -> gradient array (zeros when the parameter does
        not influence the loss).  With ``report_disconnected=True`` returns
        ``(grads, disconnected_names)`` instead, for diagnostics.
        """
        if loss.tape is not self:
            raise ValueError("loss does not belong to this tape")
        if loss.value.size != 1:
            raise ValueError("grad requires a scalar loss node")

        adjoint: list[Array | None] = [None] * self._n_slots
        # a borrowed slot may alias a vjp output (or a view of g) and must
        # not be mutated in place; accumulation reallocates it once
        borrowed = bytearray(self._n_slots)
        adjoint[loss.slot] = np.ones_like(loss.value)

        for out_slot, in_slots, vjp in reversed(self._nodes):
            g = adjoint[out_slot]
            if g is None:
                continue
            contribs = vjp(g)
            for s, gi in zip(in_slots, contribs):
                if gi is None:
                    continue
                if adjoint[s] is None:
                    adjoint[s] = gi
                    borrowed[s] = 1
                elif borrowed[s]:
                    adjoint[s] = adjoint[s] + gi
                    borrowed[s] = 0
                else:
                    adjoint[s] += gi

        grads: dict[str, Array] = {}
        disconnected: list[str] = []
        for name, var in self.params.items():
            g = adjoint[var.slot]
            if g is None:
                disconnected.append(name)
                grads[name] = np.zeros_like(var.value)
            else:
                grads[name] = g
        if report_disconnected:
            return grads, disconnected
        return grads

    def check_connected(self, loss: Var) -> None:
        """Raise DisconnectedParameter if any registered leaf is unused."""
        _, disconnected = self.grad(loss, report_disconnected=True)
        if disconnected:
            raise DisconnectedParameter(
                "parameters do not influence the loss: " + ", ".join(disconnected)
            )
