"""Tensor trapezoid quadrature against a centered Gaussian density."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_NODES = 6 * 10**7


@dataclass(frozen=True)
class QuadSpec:
    sigmas: float = 8.0
    points: int = 2001
    refine: int = 4001


class GaussianQuadrature:
    """∫ g dN(0, cov) on the box ±sigmas·std per coordinate."""

    def __init__(self, cov, points: int = 2001, sigmas: float = 8.0, chunk: int = 400_000):
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = self.cov.shape[0]
        if points ** d > MAX_NODES:
            raise ValueError(f"{points}^{d} quadrature nodes is too many")
        self.d, self.points, self.sigmas, self.chunk = d, points, sigmas, chunk
        std = np.sqrt(np.diag(self.cov))
        self.axes = [np.linspace(-sigmas * s, sigmas * s, points) for s in std]
        self.weights = []
        for ax in self.axes:
            w = np.full(points, ax[1] - ax[0])
            w[0] = w[-1] = 0.5 * (ax[1] - ax[0])
            self.weights.append(w)
        self.prec = np.linalg.inv(self.cov)
        self.log_norm = -0.5 * (d * math.log(2 * math.pi) + math.log(np.linalg.det(self.cov)))

    def _chunks(self):
        tail = int(np.prod([len(a) for a in self.axes[1:]]))
        rows = max(1, self.chunk // max(tail, 1))
        rest_axes = self.axes[1:]
        rest_w = self.weights[1:]
        if rest_axes:
            mesh = np.meshgrid(*rest_axes, indexing="ij")
            rest = np.stack([m.ravel() for m in mesh], axis=-1)
            wmesh = np.meshgrid(*rest_w, indexing="ij")
            rest_weight = np.prod(np.stack([m.ravel() for m in wmesh]), axis=0)
        else:
            rest = np.zeros((1, 0))
            rest_weight = np.ones(1)
        a0, w0 = self.axes[0], self.weights[0]
        for start in range(0, len(a0), rows):
            head = a0[start:start + rows]
            pts = np.concatenate([np.repeat(head, len(rest))[:, None], np.tile(rest, (len(head), 1))], axis=1)
            w = np.repeat(w0[start:start + rows], len(rest)) * np.tile(rest_weight, len(head))
            yield pts, w

    def integrate(self, integrand: Callable[[np.ndarray], dict]) -> dict:
        """``integrand(points)`` returns named value arrays; each is integrated."""
        totals: dict = {}
        for pts, w in self._chunks():
            dens = np.exp(self.log_norm - 0.5 * np.einsum("ij,jk,ik->i", pts, self.prec, pts))
            for name, vals in integrand(pts).items():
                if name.startswith("min:"):
                    totals[name] = min(totals.get(name, math.inf), float(np.min(vals)))
                else:
                    totals[name] = totals.get(name, 0.0) + float(np.dot(w * dens, vals))
        return totals
