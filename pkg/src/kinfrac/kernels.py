"""Turning kernels ``Phi(v, v', c)`` biasing post-jump velocities.

Every kernel shipped here is linear in ``c``: ``Phi(v, v', c) = c . Psi(v, v')``.
The vector field ``Psi`` is exposed through :attr:`TurningKernel.components`
so that solvers with space-dependent ``c`` can assemble ``Phi`` cheaply.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

CLASSES = ("A", "B", "C", None)


def _unit(v):
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, s, out=np.zeros(np.broadcast_shapes(v.shape, s.shape)), where=s > 0)


@dataclass(frozen=True, eq=False)
class TurningKernel:
    """Turning kernel with its bounds and convergence assumption class.

    Parameters
    ----------
    name : str
    components : callable
        ``Psi(v, vp) -> array (..., N)``; ``Phi = c . Psi``.
    bound_factor : float
        ``sup |Psi|`` so that ``phi_bound(c) = bound_factor * |c|``.
    moment_factor : float
        ``sup (1 + |v| + |v'|) |Psi|``; ``inf`` if unbounded.
    assumption_class : {"A", "B", "C", None}
        ``None`` marks kernels that satisfy none of the assumption classes.
    grad_moment_factor : float
        ``sup (|v| + |v'|) |grad_c Phi|``, needed for the class-C
        derivative bounds.
    """

    name: str
    components: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound_factor: float
    moment_factor: float
    assumption_class: Optional[str]
    grad_moment_factor: float = np.inf

    def __post_init__(self):
        if self.assumption_class not in CLASSES:
            raise ValueError(f"assumption class must be one of {CLASSES}")

    def phi(self, v, vp, c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.tensordot(self.components(np.asarray(v, float), np.asarray(vp, float)), c, axes=(-1, 0))

    __call__ = phi

    def phi_bound(self, c) -> float:
        return self.bound_factor * float(np.linalg.norm(np.atleast_1d(c)))

    def phi_moment_bound(self, c) -> float:
        cn = float(np.linalg.norm(np.atleast_1d(c)))
        return self.moment_factor * cn if cn > 0 else 0.0

    @property
    def lipschitz_c(self) -> float:
        return self.bound_factor

    def component_matrices(self, quad) -> np.ndarray:
        """``Psi(v_i, v_j)`` on the node set, shape ``(N, n, n)``."""
        V = quad.nodes
        P = self.components(V[:, None, :], V[None, :, :])
        return np.moveaxis(P, -1, 0)

    def matrix(self, quad, c) -> np.ndarray:
        """Dense kernel matrix ``K_ij = Phi(v_i, v_j, c)``."""
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return np.tensordot(c, self.component_matrices(quad), axes=(0, 0))

    def check(self, quad, c, atol: float = 1e-12) -> dict:
        """Sampled checks of the class invariants on the node set."""
        K = self.matrix(quad, c)
        s = quad.speeds
        loss = K.T @ quad.weights_M
        moment = np.max((1 + s[:, None] + s[None, :]) * np.abs(K)) if K.size else 0.0
        out = {
            "max_abs_phi": float(np.max(np.abs(K))),
            "bound_ok": bool(np.max(np.abs(K)) <= self.phi_bound(c) * (1 + 1e-12) + atol),
            "max_loss_integral": float(np.max(np.abs(loss))),
            "sampled_moment_bound": float(moment),
        }
        if self.assumption_class == "B":
            out["class_ok"] = out["max_loss_integral"] <= atol
        elif self.assumption_class in ("A", "C"):
            out["class_ok"] = np.isfinite(self.moment_factor) and moment <= self.phi_moment_bound(c) * (1 + 1e-12) + atol
        else:
            out["class_ok"] = True
        return out


def _zero(v, vp):
    return np.zeros(np.broadcast_shapes(v.shape, vp.shape))


def _simple(v, vp):
    return np.broadcast_to(_unit(v), np.broadcast_shapes(v.shape, vp.shape))


def _incoming(v, vp):
    return np.broadcast_to(_unit(vp), np.broadcast_shapes(v.shape, vp.shape))


def _tempered(v, vp):
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    sp = np.linalg.norm(vp, axis=-1, keepdims=True)
    return (v / (1 + s) - vp / (1 + sp)) / (1 + s + sp)


def zero_kernel() -> TurningKernel:
    return TurningKernel("zero", _zero, 0.0, 0.0, "A", 0.0)


def simple_kernel() -> TurningKernel:
    """``c . v/|v|``: rate independent of the incoming velocity (class B)."""
    return TurningKernel("simple", _simple, 1.0, np.inf, "B")


def incoming_kernel() -> TurningKernel:
    """``c . v'/|v'|``: bias by the incoming direction only; the drift is
    nonzero (``-c int |v| M dv`` for ``N = 1``)."""
    return TurningKernel("incoming", _incoming, 1.0, np.inf, None)


def tempered_kernel() -> TurningKernel:
    """``c . (v/(1+|v|) - v'/(1+|v'|)) / (1 + |v| + |v'|)``.

    Bounded by ``2|c|/3``; ``(1+|v|+|v'|) Phi`` is bounded by ``2|c|``, and
    the kernel is linear in ``c``, so it satisfies assumptions A and C.
    """
    return TurningKernel("tempered", _tempered, 2.0 / 3.0, 2.0, "C", 2.0)


KERNELS = {
    "zero": zero_kernel,
    "simple": simple_kernel,
    "incoming": incoming_kernel,
    "tempered": tempered_kernel,
}


def get_kernel(name: str) -> TurningKernel:
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None
