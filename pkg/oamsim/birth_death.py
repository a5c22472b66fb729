"""
Classical birth-death reduction of the trajectory on Fock states.

Started from |k>, the trajectory stays a Fock state forever and its level
performs a birth-death chain with p(k, k-1) = p- alpha_k and
p(k, k+1) = p+ alpha_{k+1}.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import NoInvariantStateError, ParameterError
from .fock_ops import OUTCOMES, Outcome, build_kraus, eval_alpha
from .params import DimensionlessParams

logger = logging.getLogger(__name__)

CEMETERY = -1


@dataclass(frozen=True, eq=False)
class BDKernel:
    """
    Transition probabilities on 0..d. `outcome_weights[y, k]` is
    ||V_y|k>||^2 in sampling order; at k = d the upward outcome is the
    truncation leak and carries weight 0 there while up[d] keeps its value.
    """
    down: np.ndarray
    up: np.ndarray
    stay: np.ndarray
    outcome_weights: np.ndarray
    params: DimensionlessParams

    @property
    def d(self) -> int:
        return len(self.down) - 1

    def transition_matrix(self) -> np.ndarray:
        """Tridiagonal P restricted to 0..d; the top row loses up[d]"""
        d = self.d
        P = np.diag(self.stay)
        P[np.arange(1, d + 1), np.arange(d)] = self.down[1:]
        P[np.arange(d), np.arange(1, d + 1)] = self.up[:-1]
        return P


def build_kernel(params: DimensionlessParams, d: int) -> BDKernel:
    kraus = build_kraus(params, d)
    weights = kraus.level_weights()
    down = weights[Outcome.MP.index].copy()
    up = weights[Outcome.PM.index].copy()
    up[d] = kraus.boundary_defect
    stay = 1.0 - down - up
    return BDKernel(down=down, up=up, stay=stay, outcome_weights=weights, params=params)


@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    weights: np.ndarray
    theta: float
    tail_mass: float

    @property
    def d(self) -> int:
        return len(self.weights) - 1


def gibbs_measure(theta: float, d: int) -> GibbsMeasure:
    """(1 - e^-theta) e^{-k theta} on 0..d, with e^{-(d+1) theta} above d"""
    if not theta > 0:
        raise NoInvariantStateError(
            f"no invariant probability measure for theta = {theta} <= 0")
    k = np.arange(d + 1)
    norm = -math.expm1(-theta)
    weights = norm * np.exp(-theta * k)
    return GibbsMeasure(weights=weights, theta=theta, tail_mass=math.exp(-(d + 1) * theta))


def stationarity_residual(measure: Union[GibbsMeasure, np.ndarray], kernel: BDKernel) -> float:
    """max_k |(mu P)(k) - mu(k)| for k < d"""
    mu = measure.weights if isinstance(measure, GibbsMeasure) else np.asarray(measure, dtype=float)
    if len(mu) != kernel.d + 1:
        raise ParameterError(f"measure has {len(mu)} levels, kernel {kernel.d + 1}")
    residual = mu @ kernel.transition_matrix() - mu
    return float(np.max(np.abs(residual[:-1])))


def detailed_balance_residual(measure: GibbsMeasure, kernel: BDKernel) -> float:
    """max_k |mu(k) up(k) - mu(k+1) down(k+1)| for k < d"""
    mu = measure.weights
    return float(np.max(np.abs(mu[:-1] * kernel.up[:-1] - mu[1:] * kernel.down[1:])))


@dataclass(frozen=True)
class ChainState:
    level: int

    @property
    def is_dead(self) -> bool:
        return self.level == CEMETERY


@dataclass(frozen=True)
class OutcomeWord:
    letters: Tuple[Outcome, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, i):
        return self.letters[i]

    def __str__(self) -> str:
        return ",".join(y.value for y in self.letters)

    @classmethod
    def parse(cls, text: str) -> "OutcomeWord":
        text = text.strip()
        if not text:
            return cls()
        return cls(tuple(Outcome.parse(part) for part in text.split(",")))

    @classmethod
    def of(cls, letters: Iterable[Union[Outcome, str]]) -> "OutcomeWord":
        return cls(tuple(y if isinstance(y, Outcome) else Outcome.parse(y) for y in letters))

    @property
    def shifts(self) -> List[int]:
        return [y.shift for y in self.letters]

    @property
    def total_shift(self) -> int:
        return sum(self.shifts)


def draw_outcome(weights: Sequence[float], rng: np.random.Generator) -> Tuple[int, float]:
    """
    Inverse-CDF draw over the four outcome weights (fixed order --, -+, +-, ++).
    Returns the index and the total weight. Zero-weight outcomes are never drawn.
    """
    cdf = np.cumsum(weights)
    total = float(cdf[-1])
    u = rng.random() * total
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(cdf):
        idx = int(np.flatnonzero(np.asarray(weights) > 0)[-1])
    return idx, total


def step_chain(state: ChainState, kernel: BDKernel,
               rng: np.random.Generator) -> Tuple[ChainState, Outcome]:
    if state.is_dead:
        raise ParameterError("the cemetery state cannot be stepped")
    if not 0 <= state.level <= kernel.d:
        raise ParameterError(f"level {state.level} outside 0..{kernel.d}")
    idx, _ = draw_outcome(kernel.outcome_weights[:, state.level], rng)
    y = OUTCOMES[idx]
    return ChainState(state.level + y.shift), y


def _letter_weight(params: DimensionlessParams, n: int, y: Outcome) -> float:
    atoms = params.atoms
    if y is Outcome.MM:
        return atoms.p_minus * (1.0 - eval_alpha(params, n))
    if y is Outcome.MP:
        return atoms.p_minus * eval_alpha(params, n)
    if y is Outcome.PM:
        return atoms.p_plus * eval_alpha(params, n + 1)
    return atoms.p_plus * (1.0 - eval_alpha(params, n + 1))


def _walk(k: int, word: OutcomeWord, params: DimensionlessParams) -> Tuple[int, Optional[int]]:
    if k < 0:
        raise ParameterError(f"start level must be >= 0, got {k}")
    level = k
    for t, y in enumerate(word, start=1):
        if _letter_weight(params, level, y) == 0.0:
            return CEMETERY, t
        level += y.shift
    return level, None


def evolve_fock_word(k: int, word: OutcomeWord, params: DimensionlessParams) -> ChainState:
    """N_t(k, word): the level reached from |k>, or the cemetery once a letter annihilates it"""
    level, _ = _walk(k, word, params)
    return ChainState(level)


def extinction_time(k: int, word: OutcomeWord, params: DimensionlessParams) -> Optional[int]:
    """First t at which the word annihilates |k>, None if it never does"""
    _, t = _walk(k, word, params)
    return t


@dataclass(frozen=True, eq=False)
class ChainPath:
    levels: np.ndarray
    outcomes: Tuple[Outcome, ...]
    leakage: float

    def occupation(self) -> np.ndarray:
        return occupation_histogram(self.levels, int(self.levels.max()))


def sample_chain(k: int, kernel: BDKernel, T: int, rng: np.random.Generator) -> ChainPath:
    """T steps of step_chain from level k"""
    levels = np.empty(T + 1, dtype=np.int64)
    levels[0] = k
    outcomes = []
    survival = 1.0
    state = ChainState(k)
    for t in range(1, T + 1):
        if state.level == kernel.d:
            survival *= 1.0 - kernel.up[kernel.d]
        state, y = step_chain(state, kernel, rng)
        levels[t] = state.level
        outcomes.append(y)
    leakage = 1.0 - survival
    if leakage > 0:
        logger.debug(f"classical chain touched the truncation edge, leakage {leakage:.3e}")
    return ChainPath(levels=levels, outcomes=tuple(outcomes), leakage=leakage)


def occupation_histogram(levels: Sequence[int], d: int) -> np.ndarray:
    """Fraction of time spent at each level 0..d"""
    counts = np.bincount(np.asarray(levels, dtype=np.int64), minlength=d + 1)[:d + 1]
    return counts / max(1, len(levels))
