"""
Exact finite-horizon outcome laws, total variation, the invariant measure
nu_inv and Wasserstein-1 distances between finitely supported state measures.

Total variation is sup_O |P(O) - Q(O)|, computed as half the l1 distance on
words. With this convention TV(P^rho, P^sigma) <= 1/2 ||rho - sigma||_1.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .birth_death import gibbs_measure
from .channel import BandedState, apply_channel_banded
from .exceptions import HorizonError, NoInvariantStateError, ParameterError, TransportError
from .fock_ops import (OUTCOMES, DensityMatrix, FactoredOperator, KrausSet, Outcome,
                       apply_to_density, build_kraus, compose_factored, trace_norm)
from .params import DimensionlessParams
from .resonance import SectorPartition

logger = logging.getLogger(__name__)

MAX_HORIZON = 10
OT_SCALE = 10 ** 12
WEIGHT_TOL = 1e-9

Word = Tuple[Outcome, ...]


def format_word(word: Word) -> str:
    return ",".join(y.value for y in word)


def parse_word(text: str) -> Word:
    text = text.strip()
    return tuple(Outcome.parse(part) for part in text.split(",")) if text else ()


@dataclass
class OutcomeDistribution:
    """Law of the first `horizon` outcomes; words missing from `probs` have probability 0"""
    horizon: int
    probs: Dict[Word, float]
    leakage: float = 0.0

    @property
    def total(self) -> float:
        return float(sum(self.probs.values()))

    def get(self, word: Word) -> float:
        return self.probs.get(word, 0.0)

    def to_json(self) -> Dict[str, float]:
        return {format_word(w): p for w, p in self.probs.items()}

    @classmethod
    def from_json(cls, horizon: int, data: Dict[str, float]) -> "OutcomeDistribution":
        return cls(horizon=horizon, probs={parse_word(k): float(v) for k, v in data.items()})

    def mix(self, other: "OutcomeDistribution", weight: float) -> "OutcomeDistribution":
        """weight * self + (1 - weight) * other"""
        if other.horizon != self.horizon:
            raise HorizonError(f"horizons differ: {self.horizon} vs {other.horizon}")
        keys = set(self.probs) | set(other.probs)
        probs = {w: weight * self.get(w) + (1.0 - weight) * other.get(w) for w in keys}
        return OutcomeDistribution(self.horizon, probs,
                                   weight * self.leakage + (1.0 - weight) * other.leakage)


def _explore(prefix: Word, W: FactoredOperator, diag: np.ndarray, kraus: KrausSet,
             depth: int, out: Dict[Word, float]) -> None:
    if depth == 0:
        p = float(np.dot(diag, W.norms_squared())) * 4.0 ** W.log_scale
        if p > 0:
            out[prefix] = p
        return
    for y in OUTCOMES:
        nxt = compose_factored(W, kraus[y])
        if not np.any(nxt.amp[diag > 0]):
            continue
        _explore(prefix + (y,), nxt, diag, kraus, depth - 1, out)


def exact_outcome_distribution(rho: DensityMatrix, params: DimensionlessParams, d: int, s: int,
                               kraus: Optional[KrausSet] = None,
                               max_workers: int = 1) -> OutcomeDistribution:
    """
    P(w) = Tr(W rho W^*) = sum_n rho(n, n) |amp_W(n)|^2 for every word of
    length s, by depth-first composition. Only the diagonal of rho enters.
    """
    if not 0 <= s <= MAX_HORIZON:
        raise HorizonError(f"horizon {s} outside 0..{MAX_HORIZON} (4^s words are enumerated)")
    kraus = kraus if kraus is not None else build_kraus(params, d)
    diag = rho.diagonal
    if s == 0:
        return OutcomeDistribution(0, {(): rho.trace}, leakage=max(0.0, 1.0 - rho.trace))

    def subtree(y: Outcome) -> Dict[Word, float]:
        out: Dict[Word, float] = {}
        first = compose_factored(FactoredOperator.identity(d), kraus[y])
        _explore((y,), first, diag, kraus, s - 1, out)
        return out

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=min(4, max_workers)) as pool:
            parts = list(pool.map(subtree, OUTCOMES))
    else:
        parts = [subtree(y) for y in OUTCOMES]

    probs: Dict[Word, float] = {}
    for part in parts:
        probs.update(part)
    dist = OutcomeDistribution(s, probs)
    dist.leakage = max(0.0, 1.0 - dist.total)
    return dist


def shifted_distribution(rho: DensityMatrix, params: DimensionlessParams, d: int, t: int, s: int,
                         kraus: Optional[KrausSet] = None, **options) -> OutcomeDistribution:
    """Law of outcomes t+1..t+s, i.e. the horizon-s law started from L^t(rho)"""
    kraus = kraus if kraus is not None else build_kraus(params, d)
    state = BandedState.from_dense(rho)
    for _ in range(t):
        state = apply_channel_banded(state, kraus)
    return exact_outcome_distribution(state.to_dense(), params, d, s, kraus=kraus, **options)


def tv_distance(d1: OutcomeDistribution, d2: OutcomeDistribution) -> float:
    """Half the l1 distance between the two word laws"""
    if d1.horizon != d2.horizon:
        raise HorizonError(f"horizons differ: {d1.horizon} vs {d2.horizon}")
    keys = set(d1.probs) | set(d2.probs)
    return 0.5 * float(sum(abs(d1.get(w) - d2.get(w)) for w in keys))


# state measures

@dataclass(eq=False)
class StateMeasure:
    """
    Finitely supported probability measure on states. `fock_labels[i]` is the
    level of atom i when every atom is a Fock projector.
    """
    support: List[DensityMatrix]
    weights: np.ndarray
    tail_mass: float = 0.0
    fock_labels: Optional[List[int]] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.support) != len(self.weights):
            raise ParameterError("support and weights differ in length")
        if len(self.support) == 0:
            raise ParameterError("empty state measure")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise ParameterError(f"weights must be a probability vector (sum {self.weights.sum()})")

    def __len__(self) -> int:
        return len(self.support)


def _fock_measure(weights: np.ndarray, levels: Sequence[int], d: int,
                  tail_mass: float) -> StateMeasure:
    return StateMeasure(
        support=[DensityMatrix.fock(k, d) for k in levels],
        weights=weights,
        tail_mass=tail_mass,
        fock_labels=list(levels),
    )


def nu_inv_measure(theta: float, d: int) -> StateMeasure:
    """Gibbs-weighted Fock point masses; atoms above d dropped and reported as tail mass"""
    gibbs = gibbs_measure(theta, d)
    weights = gibbs.weights / gibbs.weights.sum()
    return _fock_measure(weights, range(d + 1), d, gibbs.tail_mass)


def sector_nu_inv(theta: float, partition: SectorPartition, j: int, d: int) -> StateMeasure:
    """nu_inv^(j): Fock point masses on sector j weighted by e^{-theta n}"""
    start, end = partition.sectors[j]
    is_last = j == len(partition) - 1
    if is_last and partition.open_ended and not theta > 0:
        raise NoInvariantStateError(
            f"open-ended sector {partition.sectors[j]} has no invariant measure for theta <= 0")
    end = min(end, d)
    levels = np.arange(start, end + 1)
    anchor = start if theta >= 0 else end
    w = np.exp(-theta * (levels - anchor))
    tail = 0.0
    if is_last and partition.open_ended:
        tail = float(np.exp(-theta * (end + 1 - start)))
    return _fock_measure(w / w.sum(), levels.tolist(), d, tail)


def barycenter(measure: StateMeasure) -> DensityMatrix:
    mat = sum(w * rho.mat for w, rho in zip(measure.weights, measure.support))
    return DensityMatrix(mat)


def _merge(atoms: List[Tuple[DensityMatrix, float, Optional[int]]]) -> Tuple[List, List, List]:
    index: Dict[bytes, int] = {}
    support, weights, labels = [], [], []
    for rho, w, label in atoms:
        # + 0.0 folds signed zeros together
        key = (np.concatenate([rho.mat.real.ravel(), rho.mat.imag.ravel()]) + 0.0).tobytes()
        if key in index:
            weights[index[key]] += w
        else:
            index[key] = len(support)
            support.append(rho)
            weights.append(w)
            labels.append(label)
    return support, weights, labels


def pi_step(measure: StateMeasure, kraus: KrausSet) -> StateMeasure:
    """
    One step of the Markov kernel: atom rho with weight w becomes
    V_y rho V_y^* / p_y with weight w p_y. Identical atoms are merged and
    the mass leaking through the truncation is added to the tail.
    """
    atoms = []
    for i, (rho, w) in enumerate(zip(measure.support, measure.weights)):
        for y in OUTCOMES:
            image, p = apply_to_density(kraus[y], rho)
            if p <= 0:
                continue
            label = None
            if measure.fock_labels is not None:
                label = measure.fock_labels[i] + y.shift
            atoms.append((DensityMatrix(image.mat / p), w * p, label))

    support, weights, labels = _merge(atoms)
    weights = np.array(weights)
    kept = weights.sum()
    return StateMeasure(
        support=support,
        weights=weights / kept,
        tail_mass=measure.tail_mass + (1.0 - kept) * (1.0 - measure.tail_mass),
        fock_labels=labels if measure.fock_labels is not None else None,
    )


def empirical_state_measure(states: Sequence[DensityMatrix]) -> StateMeasure:
    """Uniform weights over the snapshots; identical states are merged"""
    if not states:
        raise ParameterError("empty ensemble")
    w = 1.0 / len(states)
    support, weights, _ = _merge([(rho, w, None) for rho in states])
    weights = np.array(weights)
    return StateMeasure(support=support, weights=weights / weights.sum())


def _cost_matrix(m1: StateMeasure, m2: StateMeasure) -> np.ndarray:
    if m1.fock_labels is not None and m2.fock_labels is not None:
        a = np.asarray(m1.fock_labels)[:, None]
        b = np.asarray(m2.fock_labels)[None, :]
        return np.where(a == b, 0.0, 2.0)
    cost = np.empty((len(m1), len(m2)))
    for i, x in enumerate(m1.support):
        for j, y in enumerate(m2.support):
            cost[i, j] = trace_norm(x.mat - y.mat)
    return cost


def _integer_weights(w: np.ndarray) -> np.ndarray:
    scaled = np.floor(w * OT_SCALE).astype(np.int64)
    scaled[np.argmax(w)] += OT_SCALE - scaled.sum()
    return scaled


def _transport_lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray, method: str) -> float:
    n1, n2 = cost.shape
    rows = sparse.kron(sparse.identity(n1), np.ones((1, n2)))
    cols = sparse.kron(np.ones((1, n1)), sparse.identity(n2))
    A_eq = sparse.vstack([rows, cols]).tocsr()
    b_eq = np.concatenate([a, b])
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method=method)
    if res.status != 0:
        raise TransportError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _check_weights(m1: StateMeasure, m2: StateMeasure) -> None:
    if abs(m1.weights.sum() - m2.weights.sum()) > WEIGHT_TOL:
        raise TransportError(
            f"weight sums differ: {m1.weights.sum()} vs {m2.weights.sum()}")
    if m1.support[0].d != m2.support[0].d:
        raise TransportError("measures live on different truncations")


def wasserstein1(m1: StateMeasure, m2: StateMeasure) -> float:
    """Optimal transport with trace-norm ground cost, solved exactly on integer-scaled weights"""
    _check_weights(m1, m2)
    cost = _cost_matrix(m1, m2)
    a = _integer_weights(m1.weights).astype(float)
    b = _integer_weights(m2.weights).astype(float)
    return max(0.0, _transport_lp(cost, a, b, "highs-ds") / OT_SCALE)


def wasserstein1_reference(m1: StateMeasure, m2: StateMeasure) -> float:
    """Dense interior-point LP on the raw weights; meant for supports of at most ~30 atoms"""
    _check_weights(m1, m2)
    return max(0.0, _transport_lp(_cost_matrix(m1, m2), m1.weights, m2.weights, "highs-ipm"))


def wasserstein_to_nu_inv(measure: StateMeasure, theta: float, d: int) -> float:
    """W1(measure, nu_inv) plus the 2 * tail_mass penalty for atoms dropped above d"""
    target = nu_inv_measure(theta, d)
    return wasserstein1(measure, target) + 2.0 * (target.tail_mass + measure.tail_mass)
