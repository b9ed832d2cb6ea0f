"""Shared finite-difference gradient oracle.

``assert_grads_match`` re-evaluates a loss functional on fresh tapes with
each parameter entry perturbed by +/- h and compares central differences
against the tape gradients.  The oracle never touches the backward pass
under test; it only calls the forward evaluation.
"""

from __future__ import annotations

import numpy as np

from d2e.numerics import Tape


def numeric_grads(make_loss, params: dict[str, np.ndarray], h: float = 1e-5):
    """Central finite differences of ``make_loss`` w.r.t. every param entry.

    ``make_loss(tape, vars)`` must return a scalar Var, where ``vars`` is the
    dict of registered parameter Vars.
    """

    def evaluate(ps):
        tape = Tape()
        vs = {k: tape.parameter(k, v) for k, v in ps.items()}
        return float(make_loss(tape, vs).value)

    grads = {}
    for name, base in params.items():
        g = np.zeros_like(np.asarray(base, dtype=np.float64))
        flat = g.reshape(-1)
        for i in range(flat.size):
            for sign in (+1.0, -1.0):
                perturbed = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
                perturbed[name].reshape(-1)[i] += sign * h
                flat[i] += sign * evaluate(perturbed)
        grads[name] = g / (2.0 * h)
    return grads


def tape_grads(make_loss, params: dict[str, np.ndarray]):
    tape = Tape()
    vs = {k: tape.parameter(k, v) for k, v in params.items()}
    loss = make_loss(tape, vs)
    return tape.grad(loss)


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(1, |a|, |b|)."""
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def assert_grads_match(make_loss, params, tol: float = 1e-4, h: float = 1e-5):
    analytic = tape_grads(make_loss, params)
    numeric = numeric_grads(make_loss, params, h=h)
    for name in params:
        err = rel_err(analytic[name], numeric[name])
        assert err <= tol, f"gradient mismatch for {name!r}: rel err {err:.3e} > {tol}"
