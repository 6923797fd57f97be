"""Covariance matrix adaptation evolution strategy.

Plain (mu/mu_w, lambda) CMA-ES with cumulative step-size adaptation and
rank-one plus rank-mu covariance updates.  Small and deterministic: the only
randomness comes from the seeded generator, so optimization runs replay
bit-identically.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteObjective


class CMAES:
    def __init__(self, x0, sigma0: float, seed: int = 0, popsize: int | None = None):
        x0 = np.asarray(x0, dtype=np.float64)
        n = len(x0)
        self.n = n
        self.lam = popsize if popsize is not None else 4 + int(3 * math.log(n))
        self.mu = self.lam // 2
        w = math.log(self.lam / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / np.sum(w)
        self.mueff = 1.0 / np.sum(self.weights**2)

        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(
            1 - self.c1,
            2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff),
        )
        self.damps = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.gen = 0
        self.rng = np.random.default_rng(seed)

        self.best_x = x0.copy()
        self.best_f = math.inf

    def ask(self) -> np.ndarray:
        z = self.rng.standard_normal((self.lam, self.n))
        y = z @ (self.B * self.D).T
        return self.mean + self.sigma * y

    def tell(self, xs: np.ndarray, fs) -> None:
        fs = np.asarray(fs, dtype=np.float64)
        if not np.all(np.isfinite(fs)):
            raise NonFiniteObjective(f"objective returned {fs[~np.isfinite(fs)][0]}")
        order = np.argsort(fs, kind="stable")
        if fs[order[0]] < self.best_f:
            self.best_f = float(fs[order[0]])
            self.best_x = xs[order[0]].copy()

        old_mean = self.mean
        sel = xs[order[: self.mu]]
        self.mean = self.weights @ sel
        y_w = (self.mean - old_mean) / self.sigma

        c_inv_sqrt = self.B @ np.diag(1.0 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(
            self.cs * (2 - self.cs) * self.mueff
        ) * (c_inv_sqrt @ y_w)
        self.gen += 1
        hsig = float(
            np.linalg.norm(self.ps)
            / math.sqrt(1 - (1 - self.cs) ** (2 * self.gen))
            / self.chi_n
            < 1.4 + 2 / (self.n + 1)
        )
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(
            self.cc * (2 - self.cc) * self.mueff
        ) * y_w

        ys = (sel - old_mean) / self.sigma
        rank_mu = (self.weights[:, None] * ys).T @ ys
        self.C = (
            (1 - self.c1 - self.cmu) * self.C
            + self.c1
            * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp(
            (self.cs / self.damps) * (np.linalg.norm(self.ps) / self.chi_n - 1)
        )

        self.C = (self.C + self.C.T) / 2
        d2, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(d2, 1e-20))


def minimize(func, x0, sigma0: float, iterations: int, seed: int = 0,
             popsize: int | None = None, ftarget: float | None = None):
    """Runs CMA-ES for a fixed number of iterations.

    Returns (best_x, trace) where trace[i] is the best objective seen up to
    and including iteration i.  Stops early only when ftarget is reached,
    which cannot change the returned best.
    """
    es = CMAES(x0, sigma0, seed=seed, popsize=popsize)
    trace: list[float] = []
    for _ in range(iterations):
        xs = es.ask()
        fs = [func(x) for x in xs]
        es.tell(xs, fs)
        trace.append(es.best_f)
        if ftarget is not None and es.best_f <= ftarget:
            break
    return es.best_x, trace
