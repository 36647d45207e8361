"""Pure NumPy evaluation kernel; fallback when the compiled extension is absent.

The objective evaluated here is the workhorse of every solve:

    Phi(lam) = sum_{t,x} W[t,x] * c_t(lam[t,x]) + kappa * F(M(lam)^-1)

with M(lam) = sum_x (sum_t W[t,x] lam[t,x]) x x^T.  Instantiations:
potential (W[t,x] = n_t mu(x), kappa = 1), social cost (kappa = n),
complete-information potential (W = realized counts) and the design
criterion (one pseudo-type, W = 1, no provision term).
"""

from __future__ import annotations

import numpy as np

EIG_FLOOR = 1e-10

BACKEND_NAME = "python"


class WeightedObjective:
    """Evaluate Phi and its gradient for a fixed instance.

    Parameters
    ----------
    points : (m, d) array
    weights : (T, m) array of nonnegative weights W
    costs : list of ProvisionCost or None
        None means no provision term (design criterion).
    scal : Scalarization
    kappa : float
        Multiplier of the estimation term.
    """

    def __init__(self, points, weights, costs, scal, kappa):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        self.costs = costs
        self.scal = scal
        self.kappa = float(kappa)
        self._eye = np.eye(self.points.shape[1])

    def _moment(self, lam):
        wx = np.einsum("tx,tx->x", self.weights, lam)
        return self.points.T @ (wx[:, None] * self.points)

    def _provision(self, lam):
        if self.costs is None:
            return 0.0
        total = 0.0
        for t, cost in enumerate(self.costs):
            total += float(np.dot(self.weights[t], cost.value(lam[t])))
        return total

    def value(self, lam):
        m_mat = self._moment(lam)
        if np.linalg.eigvalsh(m_mat)[0] <= EIG_FLOOR:
            return np.inf
        v = np.linalg.solve(m_mat, self._eye)
        return self._provision(lam) + self.kappa * self.scal.value(v)

    def value_and_grad(self, lam, grad):
        """Fill `grad` in place; returns +inf (grad untouched) on singular M."""
        m_mat = self._moment(lam)
        if np.linalg.eigvalsh(m_mat)[0] <= EIG_FLOOR:
            return np.inf
        v = np.linalg.solve(m_mat, self._eye)
        g_mat = self.scal.gradient(v)
        b_mat = v @ g_mat @ v
        s = np.einsum("xi,ij,xj->x", self.points, b_mat, self.points)
        if self.costs is None:
            grad[...] = -self.kappa * self.weights * s[None, :]
        else:
            for t, cost in enumerate(self.costs):
                grad[t] = self.weights[t] * (cost.derivative(lam[t]) - self.kappa * s)
        return self._provision(lam) + self.kappa * self.scal.value(v)
