"""Node-selection strategies producing the diffusion sequence ``i_1, i_2, ...``.

Every built-in strategy diffuses the whole fluid of the chosen node
(``alpha = 1``); only scripted schedules carry their own ``alpha``. Ties are
broken by the lowest node index.
"""

from __future__ import annotations

import enum
import heapq

import numpy as np

from .operators import ScheduleStep

__all__ = [
    "SchedulerKind",
    "EXHAUSTED",
    "EligibilityIndex",
    "Scheduler",
    "read_schedule",
]


class SchedulerKind(enum.Enum):
    CYCLIC = "cyclic"
    GREEDY_ABS = "greedy"
    NEGATIVE_ONLY = "negative"
    POSITIVE_ONLY = "positive-experimental"
    THRESHOLD = "threshold"
    RANDOM = "random"
    SCRIPTED = "scripted"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown scheduler {name!r} (choose from {choices})") from None


class _Exhausted:
    """Sentinel returned when no node is eligible."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXHAUSTED"

    def __bool__(self):
        return False


EXHAUSTED = _Exhausted()

_KEYS = {
    "abs": abs,
    "neg": lambda f: -f,
    "pos": lambda f: f,
}


class EligibilityIndex:
    """Max-priority index over nodes with lazy invalidation.

    Entries are ``(key, node)`` pairs; popping returns the largest key with
    the lowest node on ties. An entry is stale when its recorded key no
    longer equals the live key computed from the fluid, and stale entries
    are dropped on pop. Nodes with a key ``<= theta`` are never pushed.
    """

    def __init__(self, fluid, key="abs", theta=0.0):
        if theta < 0:
            raise ValueError("theta must be nonnegative")
        self.key_name = key
        self._key = _KEYS[key]
        self.theta = float(theta)
        self.rebuild(fluid)

    def rebuild(self, fluid):
        key, theta = self._key, self.theta
        self._heap = [(-k, j) for j, k in ((j, key(f)) for j, f in enumerate(fluid.tolist())) if k > theta]
        heapq.heapify(self._heap)

    def __len__(self):
        return len(self._heap)

    def update(self, nodes, fluid):
        """Push fresh keys for ``nodes`` (push-with-lazy-delete)."""
        key, theta, heap = self._key, self.theta, self._heap
        for j in nodes:
            k = key(float(fluid[j]))
            if k > theta:
                heapq.heappush(heap, (-k, int(j)))
        if len(heap) > 4 * len(fluid) + 64:
            self.rebuild(fluid)

    def pop(self, fluid):
        """Remove and return the best live node, or ``None``."""
        key, heap = self._key, self._heap
        while heap:
            negk, j = heapq.heappop(heap)
            if -negk == key(float(fluid[j])):
                return j
        return None

    def peek(self, fluid):
        j = self.pop(fluid)
        if j is not None:
            heapq.heappush(self._heap, (-self._key(float(fluid[j])), j))
        return j


class Scheduler:
    """A scheduling strategy bound to one solver run.

    Parameters
    ----------
    kind : SchedulerKind or str
    n : int
        Problem dimension.
    theta : float
        Eligibility threshold; a node is eligible when ``|F_i| > theta``
        (``F_i < -theta`` for negative-only, ``F_i > theta`` for positive-only).
    seed : int, optional
        Seed of the random strategy.
    script : sequence of ScheduleStep, optional
        Steps replayed by the scripted strategy.
    order : sequence of int, optional
        Visiting order of the cyclic and threshold sweeps (default ``0..n-1``).
    experimental : bool
        Must be set to use the positive-only strategy.
    """

    def __init__(self, kind, n, theta=0.0, seed=None, script=None, order=None, experimental=False):
        self.kind = SchedulerKind.parse(kind)
        if theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.kind is SchedulerKind.POSITIVE_ONLY and not experimental:
            raise ValueError("the positive-only scheduler is experimental; enable it explicitly")
        self.n = int(n)
        self.theta = float(theta)
        self.order = np.arange(self.n, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
        if self.kind in (SchedulerKind.CYCLIC, SchedulerKind.THRESHOLD):
            if sorted(self.order.tolist()) != list(range(self.n)):
                raise ValueError("order must be a permutation of 0..n-1")
        self.pos = 0
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.script = None
        if self.kind is SchedulerKind.SCRIPTED:
            if script is None:
                raise ValueError("the scripted scheduler needs a script")
            self.script = [s if isinstance(s, ScheduleStep) else ScheduleStep(*s) for s in script]
            for k, s in enumerate(self.script):
                if s.node >= self.n:
                    raise IndexError(f"scripted step {k}: node {s.node} out of range for n={self.n}")
        self.index = None

    @property
    def mode(self):
        return {
            SchedulerKind.GREEDY_ABS: "abs",
            SchedulerKind.NEGATIVE_ONLY: "neg",
            SchedulerKind.POSITIVE_ONLY: "pos",
        }.get(self.kind)

    def start(self, state):
        """Reset the cursor and build the eligibility index for ``state``."""
        self.pos = 0
        if self.mode is not None:
            self.index = EligibilityIndex(state.fluid, self.mode, self.theta)
        return self

    def _any_eligible(self, fluid):
        return bool(np.any(np.abs(fluid) > self.theta))

    def next_step(self, state):
        """Return the next :class:`ScheduleStep`, or ``EXHAUSTED``."""
        kind, fluid = self.kind, state.fluid
        if self.mode is not None:
            if self.index is None:
                self.start(state)
            j = self.index.pop(fluid)
            return EXHAUSTED if j is None else ScheduleStep(j, 1.0)
        if kind is SchedulerKind.SCRIPTED:
            if self.pos >= len(self.script):
                return EXHAUSTED
            self.pos += 1
            return self.script[self.pos - 1]
        if not self._any_eligible(fluid):
            return EXHAUSTED
        if kind is SchedulerKind.RANDOM:
            eligible = np.flatnonzero(np.abs(fluid) > self.theta)
            return ScheduleStep(int(eligible[self.rng.integers(eligible.size)]), 1.0)
        m = self.order.size
        i = int(self.order[self.pos])
        if kind is SchedulerKind.THRESHOLD:
            while abs(fluid[i]) <= self.theta:
                self.pos = (self.pos + 1) % m
                i = int(self.order[self.pos])
        self.pos = (self.pos + 1) % m
        return ScheduleStep(i, 1.0)

    def notify_update(self, touched_nodes, state):
        """Tell the scheduler which fluid entries the last step modified."""
        if self.index is not None:
            self.index.update(touched_nodes, state.fluid)


def read_schedule(path):
    """Read ``node alpha`` pairs, one per line (0-based node)."""
    steps = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node alpha', got {line.strip()!r}")
            try:
                steps.append(ScheduleStep(int(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return steps
