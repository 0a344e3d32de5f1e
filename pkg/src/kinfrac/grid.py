"""Periodic grids and macroscopic fields on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on ``[0, L)^N`` with ``n`` points per dimension."""

    L: float
    n: int
    N: int = 1

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ValueError("N must be 1 or 2")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.N

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.N

    @property
    def x1d(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    @property
    def points(self) -> np.ndarray:
        """Grid coordinates, shape ``shape + (N,)``."""
        axes = np.meshgrid(*([self.x1d] * self.N), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def spectral_shape(self) -> tuple:
        return (self.n,) * (self.N - 1) + (self.n // 2 + 1,)

    @property
    def wavevectors(self) -> np.ndarray:
        """Physical wave vectors ``2 pi m / L`` matching ``rfftn`` layout."""
        full = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        half = 2 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        axes = [full] * (self.N - 1) + [half]
        K = np.meshgrid(*axes, indexing="ij")
        return np.stack(K, axis=-1)

    @property
    def parseval_weights(self) -> np.ndarray:
        """``sum_x |u|^2 = sum_k w_k |u_hat_k|^2`` for ``rfftn`` coefficients."""
        m = np.full(self.n // 2 + 1, 2.0)
        m[0] = 1.0
        m[-1] = 1.0
        w = np.broadcast_to(m, self.spectral_shape).copy()
        return w / self.n ** self.N

    def rfft(self, u, axes_offset: int = 0):
        return np.fft.rfftn(u, axes=tuple(range(axes_offset, axes_offset + self.N)))

    def irfft(self, u_hat, axes_offset: int = 0):
        return np.fft.irfftn(u_hat, s=self.shape, axes=tuple(range(axes_offset, axes_offset + self.N)))

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in ``rfftn`` layout."""
        m = np.abs(self.wavevectors) * self.L / (2 * np.pi)
        return np.all(m < self.n / 3.0, axis=-1)

    def same_as(self, other: "TorusGrid") -> bool:
        return self.N == other.N and self.n == other.n and np.isclose(self.L, other.L, rtol=1e-14)


@dataclass
class MacroField:
    """Density ``rho`` sampled on a torus grid at time ``t``."""

    rho: np.ndarray
    grid: TorusGrid
    t: float = 0.0
    _hat: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != self.grid.shape:
            raise ValueError(f"field shape {self.rho.shape} does not match grid {self.grid.shape}")

    @classmethod
    def from_spectral(cls, rho_hat, grid: TorusGrid, t: float = 0.0) -> "MacroField":
        return cls(grid.irfft(rho_hat), grid, t)

    @property
    def spectral(self) -> np.ndarray:
        if self._hat is None:
            self._hat = self.grid.rfft(self.rho)
        return self._hat

    @property
    def mass(self) -> float:
        return float(self.rho.sum() * self.grid.cell_volume)

    @property
    def mean(self) -> float:
        return float(self.rho.mean())
