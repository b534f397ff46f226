"""Problem data model: instances, reel dynamics, and reachable weight sets.

A reel holds an integer number of grams, between 0 and B-1.  Assigning a
component of weight x to a reel of weight w either consumes filament
(w >= x) or forces a replacement: the old reel is discarded (waste = w)
and the component is printed from a fresh reel, leaving B - x grams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ComponentDistribution",
    "ProblemInstance",
    "AugmentedState",
    "InputError",
    "apply_assignment",
    "step",
    "enumerate_reachable",
    "builtin_case",
    "load_instance",
    "BUILTIN_CASES",
]

PROB_SUM_TOL = 1e-9


class InputError(ValueError):
    """Invalid model input (weights, probabilities, actions, config files)."""


@dataclass(frozen=True)
class ComponentDistribution:
    """Discrete distribution of component weights in grams.

    Weights are kept sorted ascending with their probabilities permuted to
    match.  Probabilities must sum to 1 within 1e-9 and are then
    renormalized exactly.
    """

    weights: tuple[int, ...]
    probs: tuple[float, ...]

    def __init__(self, weights, probs):
        weights = [int(w) for w in weights]
        probs = [float(p) for p in probs]
        if len(weights) != len(probs) or not weights:
            raise InputError("weights and probs must be nonempty and same length")
        if len(set(weights)) != len(weights):
            raise InputError(f"duplicate weights in {weights}")
        if any(w < 1 for w in weights):
            raise InputError(f"component weights must be >= 1, got {weights}")
        if any(p <= 0 for p in probs):
            raise InputError(f"probabilities must be positive, got {probs}")
        total = sum(probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise InputError(f"probabilities sum to {total!r}, expected 1")
        order = np.argsort(weights)
        ws = tuple(weights[i] for i in order)
        ps = tuple(probs[i] / total for i in order)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "probs", ps)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.probs))

    @property
    def std(self) -> float:
        m = self.mean
        return float(np.sqrt(np.dot(np.square(self.weights), self.probs) - m * m))

    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.int64)

    def probs_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)

    def component_index(self, x: int) -> int:
        """Position of weight x in the sorted support."""
        i = int(np.searchsorted(self.weights, x))
        if i >= len(self.weights) or self.weights[i] != x:
            raise InputError(f"weight {x} is not in the support {self.weights}")
        return i


@dataclass(frozen=True)
class ProblemInstance:
    """A reel-assignment problem: capacity B, N reels, component distribution."""

    capacity_B: int
    reel_count_N: int
    dist: ComponentDistribution
    name: str = "instance"

    def __post_init__(self):
        if self.reel_count_N < 1:
            raise InputError(f"reel_count_N must be >= 1, got {self.reel_count_N}")
        if self.capacity_B < max(self.dist.weights):
            raise InputError(
                f"capacity B={self.capacity_B} smaller than max component "
                f"weight {max(self.dist.weights)}"
            )

    @property
    def fit_ratio(self) -> float:
        """Expected number of components consumed per reel, B / E[X]."""
        return self.capacity_B / self.dist.mean

    def with_reels(self, n: int) -> "ProblemInstance":
        return ProblemInstance(self.capacity_B, n, self.dist, self.name)


@dataclass(frozen=True)
class AugmentedState:
    """Reel weights plus the weight of the component awaiting assignment."""

    reels: tuple[int, ...]
    component: int

    def __post_init__(self):
        object.__setattr__(self, "reels", tuple(int(w) for w in self.reels))
        object.__setattr__(self, "component", int(self.component))


def apply_assignment(w: int, x: int, B: int) -> tuple[int, int]:
    """Assign a component of weight x to a reel of weight w.

    Returns (next_weight, waste).  If the reel holds enough filament the
    weight just drops by x; otherwise the reel is discarded (waste = w)
    and a fresh reel of weight B is consumed immediately.
    """
    if not 0 <= w <= B - 1:
        raise InputError(f"reel weight {w} outside 0..{B - 1}")
    if not 1 <= x <= B:
        raise InputError(f"component weight {x} outside 1..{B}")
    if w >= x:
        return w - x, 0
    return B - x, w


def step(
    state: AugmentedState, action: int, next_component: int, B: int
) -> tuple[AugmentedState, int]:
    """Advance the system one period: assign, then observe the next arrival.

    `action` is a 1-based reel index.  Only the selected reel changes.
    """
    n = len(state.reels)
    if not 1 <= action <= n:
        raise InputError(f"action {action} outside 1..{n}")
    w_next, waste = apply_assignment(state.reels[action - 1], state.component, B)
    reels = list(state.reels)
    reels[action - 1] = w_next
    return AugmentedState(tuple(reels), next_component), waste


def enumerate_reachable(
    dist: ComponentDistribution, B: int, seeds: set[int] | None = None
) -> np.ndarray:
    """Closure of reel weights under assignment, as a sorted int64 array.

    BFS from `seeds` (default {0} plus every post-replacement weight B - x)
    applying w -> e(w, x) for each support weight until no new value appears.
    """
    if seeds is None:
        seeds = {0} | {B - x for x in dist.weights}
    seen = set()
    for s in seeds:
        if not 0 <= s <= B - 1:
            raise InputError(f"seed weight {s} outside 0..{B - 1}")
        seen.add(int(s))
    frontier = list(seen)
    while frontier:
        new = []
        for w in frontier:
            for x in dist.weights:
                e = w - x if w >= x else B - x
                if e not in seen:
                    seen.add(e)
                    new.append(e)
        frontier = new
    return np.array(sorted(seen), dtype=np.int64)


# Component distributions of the built-in cases (B = 5000 g).  Cases 1-3 are
# synthetic three-point mixes; case 4 is a 12-point distribution taken from
# production data.  Stored sorted ascending by weight.
BUILTIN_CASES: dict[int, tuple[list[int], list[float]]] = {
    1: ([651, 898, 1016], [0.33, 0.34, 0.33]),
    2: ([500, 1000, 1500], [0.25, 0.25, 0.5]),
    3: ([192, 792, 820], [0.18, 0.21, 0.61]),
    4: (
        [62, 71, 81, 127, 152, 382, 503, 516, 540, 597, 835, 1098],
        [0.03, 0.01, 0.01, 0.02, 0.01, 0.33, 0.39, 0.04, 0.02, 0.01, 0.02, 0.11],
    ),
}

BUILTIN_CAPACITY = 5000


def builtin_case(case_id: int, reels: int = 1) -> ProblemInstance:
    """Built-in problem instance (1-4) at B=5000; reel count supplied separately."""
    if case_id not in BUILTIN_CASES:
        raise InputError(f"unknown case id {case_id}, expected 1..4")
    weights, probs = BUILTIN_CASES[case_id]
    dist = ComponentDistribution(weights, probs)
    return ProblemInstance(BUILTIN_CAPACITY, reels, dist, name=f"case{case_id}")


def load_instance(ref: str | Path, reels: int | None = None) -> ProblemInstance:
    """Resolve an instance reference: "case1".."case4" or a JSON config path.

    Config schema: {"name": str, "B": int, "N": int, "weights": [int],
    "probs": [float]}.  `reels` overrides the configured N when given.
    """
    ref_str = str(ref)
    if ref_str.startswith("case") and ref_str[4:].isdigit():
        inst = builtin_case(int(ref_str[4:]), reels=reels or 1)
        return inst
    path = Path(ref)
    if not path.exists():
        raise InputError(f"instance {ref_str!r} is neither a builtin case nor a file")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc
    for key in ("B", "weights", "probs"):
        if key not in cfg:
            raise InputError(f"instance config {path} missing key {key!r}")
    dist = ComponentDistribution(cfg["weights"], cfg["probs"])
    n = reels if reels is not None else int(cfg.get("N", 1))
    return ProblemInstance(int(cfg["B"]), n, dist, name=str(cfg.get("name", path.stem)))
