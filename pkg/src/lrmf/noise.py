"""Streaming correlated noise and a small DP-SGD simulator.

Row ``i`` of the raw Gaussian matrix ``Z`` is drawn from a Philox generator
keyed by the seed with the step index in the high counter word, so any
consumer (streaming or dense) that asks for row ``i`` gets the same numbers.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .factorizations import Factorization
from .metrics import sensitivity_single
from .trimatrix import LowerTriangular, ToeplitzLT, as_dense


class StreamExhausted(RuntimeError):
    pass


def gaussian_row(seed: int, i: int, d: int, sigma: float = 1.0) -> np.ndarray:
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1), counter=[0, 0, 0, int(i)])
    return sigma * np.random.Generator(bitgen).standard_normal(d)


def gaussian_matrix(seed: int, n: int, d: int, sigma: float = 1.0) -> np.ndarray:
    return np.stack([gaussian_row(seed, i, d, sigma) for i in range(n)])


def _bandwidth(m: Union[ToeplitzLT, LowerTriangular]) -> int:
    if isinstance(m, ToeplitzLT):
        nz = np.flatnonzero(m.coeffs)
        return int(nz[-1]) + 1 if nz.size else 1
    a = m.array
    n = a.shape[0]
    for off in range(n - 1, 0, -1):
        if np.any(np.diagonal(a, -off) != 0):
            return off + 1
    return 1


class NoiseStream:
    """Produces rows of ``C^{-1} Z`` one step at a time.

    In ``banded`` mode only the last ``p`` raw rows are kept, where ``p`` is
    the bandwidth of ``C^{-1}``.  ``dense`` mode keeps every past row.
    """

    def __init__(self, c_inverse, d: int, sigma: float, seed: int, mode: Optional[str] = None):
        self.n = c_inverse.n
        self.d = int(d)
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.step = 0
        self._toeplitz = c_inverse.coeffs if isinstance(c_inverse, ToeplitzLT) else None
        self._dense = None if self._toeplitz is not None else as_dense(c_inverse)
        self.bandwidth = _bandwidth(c_inverse)
        if mode is None:
            mode = "banded" if self.bandwidth < self.n else "dense"
        if mode not in ("banded", "dense"):
            raise ValueError(f"unknown stream mode {mode!r}")
        self.mode = mode
        maxlen = self.bandwidth if mode == "banded" else None
        self.buffer: deque = deque(maxlen=maxlen)

    def _entry_row(self, i: int, width: int) -> np.ndarray:
        # M[i, i], M[i, i-1], ..., M[i, i-width+1]
        if self._toeplitz is not None:
            return self._toeplitz[:width]
        return self._dense[i, i - width + 1:i + 1][::-1]

    def next_noise(self) -> np.ndarray:
        if self.step >= self.n:
            raise StreamExhausted(f"stream of length {self.n} is exhausted")
        i = self.step
        self.buffer.appendleft(gaussian_row(self.seed, i, self.d, self.sigma))
        width = len(self.buffer)
        coeffs = self._entry_row(i, width)
        out = np.zeros(self.d)
        for c, z in zip(coeffs, self.buffer):
            if c != 0.0:
                out += c * z
        self.step += 1
        return out

    def __iter__(self):
        while self.step < self.n:
            yield self.next_noise()


def dense_correlated_noise(c_inverse, d: int, sigma: float, seed: int) -> np.ndarray:
    """``C^{-1} Z`` computed in one shot from the same ``Z`` the stream consumes."""
    n = c_inverse.n
    return as_dense(c_inverse) @ gaussian_matrix(seed, n, d, sigma)


def clip(g: np.ndarray, zeta: float) -> np.ndarray:
    if zeta <= 0:
        raise ValueError("clip norm must be positive")
    norm = float(np.linalg.norm(g))
    if norm <= zeta:
        return np.array(g, dtype=np.float64, copy=True)
    return g * (zeta / norm)


# --- simulator ---------------------------------------------------------------


@dataclass
class SimConfig:
    """Synthetic DP-SGD run.

    ``objective`` is ``"quadratic"`` (per-example loss
    ``0.5 (theta - theta*)^T H (theta - theta*) - xi_j^T theta`` with
    diagonal ``H = curvature`` and zero-mean offsets ``xi_j``) or
    ``"linear_regression"`` (squared loss on synthetic Gaussian data).
    Batches are taken sequentially, wrapping around the dataset.
    """

    objective: str = "quadratic"
    dim: int = 4
    samples: int = 256
    curvature: Optional[list] = None
    optimum: Optional[list] = None
    offset_scale: float = 1.0
    data_seed: int = 0
    eta: float = 0.1
    zeta: float = 1.0
    batch: int = 16
    sigma_eps_delta: float = 1.0
    noise_seed: int = 0
    theta0: Optional[list] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls(**json.loads(text))


class Objective:
    def __init__(self, cfg: SimConfig):
        rng = np.random.default_rng(cfg.data_seed)
        d, m = cfg.dim, cfg.samples
        self.kind = cfg.objective
        if self.kind == "quadratic":
            self.h = np.ones(d) if cfg.curvature is None else np.asarray(cfg.curvature, dtype=float)
            self.opt = np.zeros(d) if cfg.optimum is None else np.asarray(cfg.optimum, dtype=float)
            xi = rng.standard_normal((m, d)) * cfg.offset_scale
            self.xi = xi - xi.mean(axis=0)
        elif self.kind == "linear_regression":
            self.x = rng.standard_normal((m, d))
            w_true = rng.standard_normal(d)
            self.y = self.x @ w_true + 0.1 * rng.standard_normal(m)
        else:
            raise ValueError(f"unknown objective {self.kind!r}")
        self.samples = m

    def per_example_grads(self, theta: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if self.kind == "quadratic":
            return self.h * (theta - self.opt) - self.xi[idx]
        xb = self.x[idx]
        return xb * (xb @ theta - self.y[idx])[:, None]

    def loss(self, theta: np.ndarray) -> float:
        if self.kind == "quadratic":
            diff = theta - self.opt
            return float(0.5 * np.sum(self.h * diff * diff))
        r = self.x @ theta - self.y
        return float(0.5 * np.mean(r * r))


@dataclass
class Trajectory:
    theta: np.ndarray
    losses: np.ndarray
    noise_norms: np.ndarray
    sigma: float = 0.0
    updates: np.ndarray = field(default=None, repr=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "loss", "theta_norm", "noise_norm"])
            for i in range(self.theta.shape[0]):
                w.writerow([i + 1, repr(float(self.losses[i])),
                            repr(float(np.linalg.norm(self.theta[i]))),
                            repr(float(self.noise_norms[i]))])


def dp_sgd_run(cfg: SimConfig, fact: Factorization, stream_mode: Optional[str] = None) -> Trajectory:
    """Runs DP-SGD with correlated noise for ``fact.n`` steps.

    Each step clips per-example gradients to ``zeta``, sums them, adds row
    ``i`` of ``C^{-1} Z`` with ``Z ~ N(0, (sens(C) sigma_eps_delta zeta)^2)``,
    divides by the batch size and steps with learning rate ``chi_i * eta``.
    """
    if cfg.batch < 1 or cfg.zeta <= 0 or cfg.eta <= 0 or cfg.sigma_eps_delta < 0:
        raise ValueError("invalid simulator configuration")
    obj = Objective(cfg)
    n, d = fact.n, cfg.dim
    chi = fact.workload.chi
    sigma = sensitivity_single(fact.C) * cfg.sigma_eps_delta * cfg.zeta
    stream = NoiseStream(fact.noise_matrix(), d, sigma, cfg.noise_seed, mode=stream_mode)
    theta = np.zeros(d) if cfg.theta0 is None else np.asarray(cfg.theta0, dtype=float).copy()
    thetas = np.empty((n, d))
    updates = np.empty((n, d))
    losses = np.empty(n)
    noise_norms = np.empty(n)
    for i in range(n):
        idx = (np.arange(cfg.batch) + i * cfg.batch) % obj.samples
        grads = obj.per_example_grads(theta, idx)
        norms = np.linalg.norm(grads, axis=1)
        scale = np.minimum(1.0, cfg.zeta / np.where(norms > 0, norms, np.inf))
        summed = (grads * scale[:, None]).sum(axis=0)
        noise = stream.next_noise()
        x_hat = (summed + noise) / cfg.batch
        step = chi[i] * cfg.eta * x_hat
        theta = theta - step
        updates[i] = step
        thetas[i] = theta
        losses[i] = obj.loss(theta)
        noise_norms[i] = np.linalg.norm(noise)
    return Trajectory(theta=thetas, losses=losses, noise_norms=noise_norms, sigma=sigma, updates=updates)
