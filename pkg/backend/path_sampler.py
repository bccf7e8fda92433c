import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
import psutil

import config
from .errors import BudgetExceeded, InvalidArgument

logger = logging.getLogger(__name__)
sim_logger = logging.getLogger('sim.events')


def default_workers() -> int:
    if config.DEFAULT_WORKERS > 0:
        return config.DEFAULT_WORKERS
    return psutil.cpu_count(logical=False) or 1


def block_stream(seed: int, block: int) -> np.random.Generator:
    """Counter-based Philox stream for a block of consecutive sample indices."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _draw(cumulative: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF; rows of `cumulative` may be per-sample
    if cumulative.ndim == 1:
        idx = np.searchsorted(cumulative, u, side='right')
    else:
        idx = (u[:, None] >= cumulative).sum(axis=1)
    return np.minimum(idx, cumulative.shape[-1] - 1)


class PathSampler:
    """
    Draws stationary paths xi_0..xi_{ell N} in fixed-size blocks and returns
    S_N together with the component sums S_{i,N}.

    Sample j always comes from block j // block_size, whose stream is keyed
    by (seed, block), so the worker count never changes the values.
    """

    def __init__(self, instance, workers: int = None, block_size: int = config.SAMPLE_BLOCK_SIZE):
        self.instance = instance
        self.workers = workers or default_workers()
        self.block_size = block_size
        chain = instance.chain
        self._cum_mu = np.cumsum(chain.stationary)
        self._cum_P = np.cumsum(chain.transition, axis=1)
        self._values = np.asarray(instance.observable.values)
        self._components = [np.asarray(c).ravel() for c in instance.decomposition.components]

    def simulate_paths(self, N: int, rng: np.random.Generator, size: int) -> np.ndarray:
        L = self.instance.ell * N
        path = np.empty((size, L + 1), dtype=np.int16)
        path[:, 0] = _draw(self._cum_mu, rng.random(size))
        for t in range(1, L + 1):
            path[:, t] = _draw(self._cum_P[path[:, t - 1]], rng.random(size))
        return path

    def path_sums(self, path: np.ndarray, N: int) -> Tuple[np.ndarray, np.ndarray]:
        """S_N and (S_{1,N}..S_{ell,N}) for a batch of paths of length ell*N + 1."""
        S, ell = self.instance.chain.size, self.instance.ell
        n = np.arange(1, N + 1)
        flat = np.zeros((path.shape[0], N), dtype=np.int64)
        comps = np.empty((path.shape[0], ell))
        for i in range(1, ell + 1):
            flat = flat * S + path[:, n * i]
            comps[:, i - 1] = self._components[i - 1][flat].sum(axis=1)
        return self._values[flat].sum(axis=1), comps

    def _run_block(self, N: int, seed: int, block: int, size: int):
        rng = block_stream(seed, block)
        return self.path_sums(self.simulate_paths(N, rng, size), N)

    def sample(self, N: int, M: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        if N < 1:
            raise InvalidArgument(f"horizon must be >= 1, got {N}")
        if M < 1:
            raise InvalidArgument(f"sample count must be >= 1, got {M}")
        steps = float(M) * (self.instance.ell * N + 1)
        if steps > config.SIM_STEP_BUDGET:
            raise BudgetExceeded(f"{steps:.3g} chain steps requested, budget is {config.SIM_STEP_BUDGET:.3g}")

        blocks = []
        for b, start in enumerate(range(0, M, self.block_size)):
            blocks.append((b, min(self.block_size, M - start)))

        started = time.time()
        if self.workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda bs: self._run_block(N, seed, bs[0], bs[1]), blocks))
        else:
            results = [self._run_block(N, seed, b, size) for b, size in blocks]

        totals = np.concatenate([r[0] for r in results])
        comps = np.concatenate([r[1] for r in results], axis=0)
        sim_logger.info(f"SAMPLE - N: {N}, M: {M}, seed: {seed}, workers: {self.workers}, "
                        f"blocks: {len(blocks)}, elapsed: {time.time() - started:.2f}s")
        return totals, comps
