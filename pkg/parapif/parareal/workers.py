"""Executors that drive a window's subdomains.

The pipelined executor runs one asyncio task per subdomain. Neighbouring
tasks talk through an ``asyncio.Queue`` carrying (state, converged) once per
iteration; fine and coarse solves run on a thread pool. A task starts its
fine solve for iteration k as soon as it holds U_{n-1}^{k-1}, so fine solves
of different subdomains overlap, and it exits once it has converged.

The sequential executor calls the same solver methods subdomain by subdomain
and produces bitwise-identical results.
"""

from __future__ import annotations

import asyncio
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Protocol, Tuple

from ..errors import ConfigurationError
from ..models import PhaseSpaceState
from .engine import PararealIterate, SubdomainUpdate, WindowOutcome, WindowSolver

logger = logging.getLogger(__name__)

THREADS_ENV = "PARAPIF_THREADS"

Message = Tuple[PhaseSpaceState, bool]


class Executor(Protocol):
    def run(self, solver: WindowSolver, seed: PararealIterate) -> WindowOutcome: ...


def resolve_threads(requested: Optional[int], subdomains: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{THREADS_ENV}={raw!r} is not an integer", [THREADS_ENV]) from exc
        if value < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be at least 1, got {value}", [THREADS_ENV])
        logger.warning("worker threads overridden by %s=%d", THREADS_ENV, value)
        return value
    if requested is not None:
        return max(1, requested)
    return max(1, min(subdomains, os.cpu_count() or 1))


def _assemble(seed: PararealIterate, updates: List[SubdomainUpdate]) -> WindowOutcome:
    states = list(seed.states)
    coarse = list(seed.coarse)
    converged = list(seed.converged)
    iteration = 0
    for u in sorted(updates, key=lambda u: (u.iteration, u.subdomain)):
        states[u.subdomain] = u.state
        coarse[u.subdomain] = u.coarse
        converged[u.subdomain] = u.converged
        iteration = max(iteration, u.iteration)
    return WindowOutcome(PararealIterate(iteration, states, coarse, converged), updates)


class SequentialExecutor:
    """Iterations one after another, subdomains in order, no threads."""

    def run(self, solver: WindowSolver, seed: PararealIterate) -> WindowOutcome:
        iterate = seed
        updates: List[SubdomainUpdate] = []
        for _ in range(seed.subdomains):
            iterate, step = solver.iteration(iterate)
            updates.extend(step)
            if iterate.all_converged:
                break
        return WindowOutcome(iterate, updates)


class PipelinedExecutor:
    def __init__(self, threads: Optional[int] = None) -> None:
        self.threads = threads

    def run(self, solver: WindowSolver, seed: PararealIterate) -> WindowOutcome:
        count = resolve_threads(self.threads, seed.subdomains)
        with ThreadPoolExecutor(max_workers=count, thread_name_prefix="parareal") as pool:
            updates = asyncio.run(self._run(solver, seed, pool))
        return _assemble(seed, updates)

    async def _run(
        self,
        solver: WindowSolver,
        seed: PararealIterate,
        pool: ThreadPoolExecutor,
    ) -> List[SubdomainUpdate]:
        n_sub = seed.subdomains
        links: List[asyncio.Queue[Message]] = [asyncio.Queue() for _ in range(n_sub + 1)]
        tasks = [
            asyncio.create_task(
                self._subdomain(solver, seed, n, pool, links[n - 1] if n > 1 else None, links[n] if n < n_sub else None),
                name=f"subdomain-{n}",
            )
            for n in range(1, n_sub + 1)
        ]
        lowest = await self._lowest_failure(tasks)
        if lowest is not None:
            raise tasks[lowest].exception()
        updates: List[SubdomainUpdate] = []
        for task in tasks:
            updates.extend(task.result())
        return updates

    @staticmethod
    async def _lowest_failure(tasks: List["asyncio.Task[List[SubdomainUpdate]]"]) -> Optional[int]:
        """Index of the lowest failed task, or None once every task has finished.

        Tasks never wait on a successor, so after a failure everything below it
        is left to finish (or fail lower down) and only the tasks above it,
        which would block on its queue, are cancelled.
        """
        active = list(tasks)
        lowest: Optional[int] = None
        while active:
            done, _ = await asyncio.wait(active, return_when=asyncio.FIRST_EXCEPTION)
            for i, task in enumerate(tasks):
                if task in done and task.exception() is not None and (lowest is None or i < lowest):
                    lowest = i
            if lowest is None:
                break
            for task in tasks[lowest + 1 :]:
                task.cancel()
            active = [task for task in tasks[:lowest] if not task.done()]
        await asyncio.gather(*tasks, return_exceptions=True)
        return lowest

    async def _subdomain(
        self,
        solver: WindowSolver,
        seed: PararealIterate,
        n: int,
        pool: ThreadPoolExecutor,
        inbox: Optional[asyncio.Queue[Message]],
        outbox: Optional[asyncio.Queue[Message]],
    ) -> List[SubdomainUpdate]:
        loop = asyncio.get_running_loop()
        start_old = seed.states[n - 1]
        coarse_old = seed.coarse[n]
        predecessor_done = inbox is None
        updates: List[SubdomainUpdate] = []

        for k in range(1, seed.subdomains + 1):
            fine_job = loop.run_in_executor(pool, solver.fine, n, k, start_old)
            if predecessor_done:
                start_new, predecessor_converged = start_old, True
            else:
                start_new, predecessor_converged = await inbox.get()
            if predecessor_done:
                coarse_new = coarse_old
            else:
                coarse_new = await loop.run_in_executor(
                    pool, solver.coarse_update, n, start_new, coarse_old, False
                )
            fine = await fine_job
            update = solver.combine(n, k, fine, coarse_new, coarse_old, predecessor_converged)
            updates.append(update)
            if outbox is not None:
                outbox.put_nowait((update.state, update.converged))
            if update.converged:
                logger.debug("subdomain %d exits after iteration %d", n, k)
                break
            start_old, coarse_old, predecessor_done = start_new, coarse_new, predecessor_converged
        return updates


def executor_for(execution: str, threads: Optional[int] = None) -> Executor:
    if execution == "pipelined":
        return PipelinedExecutor(threads)
    if execution == "sequential":
        return SequentialExecutor()
    raise ConfigurationError(f"unknown execution mode {execution!r}", ["execution"])
