"""
Quantum trajectory engine.

A trajectory keeps the normalized posterior state rho_t, the accumulated
operator W_t in factored form and the diagonal of the martingale M_t. The
martingale is stored as log-probabilities so that a level killed by the
outcome word is exactly -inf while surviving levels never underflow.
"""

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .birth_death import CEMETERY, draw_outcome
from .exceptions import ParameterError, TruncationGuardError, TruncationOverflow
from .fock_ops import (OUTCOMES, DensityMatrix, FactoredOperator, KrausSet, Outcome,
                       apply_to_density, build_kraus, compose_factored, trace_norm)
from .params import DimensionlessParams
from .resonance import DegeneracyReport

logger = logging.getLogger(__name__)

DEFAULT_GUARD = 4
DEFAULT_LEAKAGE_BUDGET = 1e-9

Seed = Union[int, Sequence[int]]


def trajectory_rng(seed: Seed, index: Optional[int] = None) -> np.random.Generator:
    """Generator for (master_seed, index); independent of how many others exist"""
    entropy = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]
    if index is not None:
        entropy.append(int(index))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def reference_weights(theta: float, d: int) -> np.ndarray:
    """Diagonal of rho_inv truncated to 0..d and renormalized"""
    w = np.exp(-theta * np.arange(d + 1) - max(0.0, -theta) * d)
    return w / w.sum()


@dataclass(eq=False)
class TrajectoryState:
    t: int
    rho: DensityMatrix
    W: FactoredOperator
    log_m: np.ndarray
    rng: np.random.Generator
    kraus: KrausSet
    leakage_budget: float = DEFAULT_LEAKAGE_BUDGET
    survival: float = 1.0
    history: Optional[Deque[Outcome]] = None
    trajectory_id: Optional[int] = None

    @property
    def d(self) -> int:
        return self.kraus.d

    @property
    def params(self) -> DimensionlessParams:
        return self.kraus.params

    @property
    def m(self) -> np.ndarray:
        """Diagonal of M_t as a probability vector"""
        return np.exp(self.log_m - logsumexp(self.log_m))

    @property
    def alive(self) -> np.ndarray:
        return np.isfinite(self.log_m)

    @property
    def leakage(self) -> float:
        return 1.0 - self.survival

    def evolved_level(self, n: int) -> int:
        """N_t(n): n + s_t while |n> survives the word, else the cemetery"""
        target = n + self.W.shift
        if not self.alive[n] or not 0 <= target <= self.d:
            return CEMETERY
        return target


@dataclass(frozen=True)
class PurificationDiagnostics:
    t: int
    m_max: float
    n_hat: int
    gap: Optional[float]
    gap_bound: float
    purity: float
    mean_photon_number: float
    leakage: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "n_hat": self.n_hat,
            "m_max": self.m_max,
            "gap": self.gap,
            "gap_bound": self.gap_bound,
            "purity": self.purity,
            "mean_photon_number": self.mean_photon_number,
            "leakage": self.leakage,
        }


def init_trajectory(rho0: DensityMatrix, params: DimensionlessParams, d: int, seed: Seed,
                    guard: int = DEFAULT_GUARD, leakage_budget: float = DEFAULT_LEAKAGE_BUDGET,
                    history: int = 0, kraus: Optional[KrausSet] = None,
                    index: Optional[int] = None) -> TrajectoryState:
    if rho0.d != d:
        raise ParameterError(f"initial state has truncation {rho0.d}, expected {d}")
    # populations below the leakage budget do not count as support
    support = rho0.max_support(atol=leakage_budget)
    if support + guard > d:
        raise TruncationGuardError(
            f"initial support {support} + guard {guard} exceeds truncation d={d}")
    problems = rho0.validate()
    if problems:
        raise ParameterError("invalid initial state: " + "; ".join(problems))

    kraus = kraus if kraus is not None else build_kraus(params, d)
    with np.errstate(divide="ignore"):
        log_m = np.log(reference_weights(params.theta, d))
    return TrajectoryState(
        t=0,
        rho=rho0.copy(),
        W=FactoredOperator.identity(d),
        log_m=log_m,
        rng=trajectory_rng(seed, index),
        kraus=kraus,
        leakage_budget=leakage_budget,
        history=deque(maxlen=history) if history > 0 else None,
        trajectory_id=index,
    )


def outcome_weights(state: TrajectoryState) -> np.ndarray:
    """Tr(V_y rho_t V_y^*) for the four outcomes; only the diagonal of rho_t enters"""
    return state.kraus.level_weights() @ state.rho.diagonal


def _shifted_norms(state: TrajectoryState, y: Outcome,
                   kraus: Optional[KrausSet] = None) -> np.ndarray:
    """||V_y |n + s_t>||^2 for every start level n (0 outside the truncation)"""
    d = state.d
    idx = np.arange(d + 1) + state.W.shift
    valid = (idx >= 0) & (idx <= d)
    out = np.zeros(d + 1)
    kraus = state.kraus if kraus is None else kraus
    out[valid] = kraus[y].norms_squared()[idx[valid]]
    return out


def sample_step(state: TrajectoryState) -> Tuple[Outcome, TrajectoryState]:
    """Draw one outcome and update rho_t, W_t and M_t in place"""
    weights = outcome_weights(state)
    idx, total = draw_outcome(weights, state.rng)
    y = OUTCOMES[idx]

    state.survival *= min(1.0, total)
    if state.leakage > state.leakage_budget:
        raise TruncationOverflow(state.t + 1, state.leakage, state.leakage_budget,
                                 trajectory=state.trajectory_id)

    rho_out, weight = apply_to_density(state.kraus[y], state.rho)
    state.rho = DensityMatrix(rho_out.mat / weight, leakage=state.leakage)

    with np.errstate(divide="ignore"):
        log_m = state.log_m + np.log(_shifted_norms(state, y))
    state.log_m = log_m - logsumexp(log_m)

    state.W = compose_factored(state.W, state.kraus[y])
    state.t += 1
    if state.history is not None:
        state.history.append(y)
    return y, state


def estimate_n_infinity(m: np.ndarray) -> Tuple[int, float]:
    """argmax of m, ties toward the smaller level, and its value as confidence"""
    m = np.asarray(m)
    n_hat = int(np.argmax(m))
    return n_hat, float(m[n_hat])


def _target_level(state: TrajectoryState) -> Tuple[int, int, float]:
    m = state.m
    n_hat, m_max = estimate_n_infinity(m)
    return n_hat, state.evolved_level(n_hat), m_max


def purification_gap(state: TrajectoryState) -> float:
    """||rho_t - |N_t(n_hat)><N_t(n_hat)| ||_1, 2 in the cemetery branch"""
    _, target, _ = _target_level(state)
    if target == CEMETERY:
        return 2.0
    projector = np.zeros_like(state.rho.mat)
    projector[target, target] = 1.0
    return trace_norm(state.rho.mat - projector)


def gap_bound(state: TrajectoryState) -> float:
    """2 sqrt(1 - <phi|rho_t|phi>) for phi = |N_t(n_hat)>"""
    _, target, _ = _target_level(state)
    if target == CEMETERY:
        return 2.0
    overlap = float(np.real(state.rho.mat[target, target]))
    return 2.0 * math.sqrt(max(0.0, 1.0 - overlap))


def diagnose(state: TrajectoryState, exact_gap: bool = True) -> PurificationDiagnostics:
    n_hat, _, m_max = _target_level(state)
    return PurificationDiagnostics(
        t=state.t,
        m_max=m_max,
        n_hat=n_hat,
        gap=purification_gap(state) if exact_gap else None,
        gap_bound=gap_bound(state),
        purity=state.rho.purity,
        mean_photon_number=state.rho.mean_photon_number,
        leakage=state.leakage,
    )


def martingale_residual(state: TrajectoryState,
                        params: Optional[DimensionlessParams] = None) -> float:
    """
    l1 distance between the stored m_t and sum_y w_y m'_y. The weights
    w_y = sum_n rho_inv(n)|W_{t+1,y}(n)|^2 / sum_n rho_inv(n)|W_t(n)|^2 and the
    updates m'_y are rebuilt from the amplitudes of W_t, never from m_t itself.
    """
    kraus = state.kraus
    if params is not None and params != state.params:
        kraus = build_kraus(params, state.d)
    m = state.m
    amp = np.abs(state.W.amp)
    peak = float(amp.max())
    if peak == 0.0:
        return float(np.abs(m).sum())
    # the common factor 2**log_scale / peak cancels in every ratio
    base = reference_weights(kraus.params.theta, state.d) * (amp / peak) ** 2
    total = base.sum()
    expected = np.zeros_like(m)
    for y in OUTCOMES:
        advanced = base * _shifted_norms(state, y, kraus)
        mass = advanced.sum()
        if mass > 0:
            expected += (mass / total) * (advanced / mass)
    return float(np.abs(expected - m).sum())


@dataclass
class TrajectoryRun:
    diagnostics: List[PurificationDiagnostics]
    gap_bounds: np.ndarray
    final_state: TrajectoryState
    outcomes: List[Outcome] = field(default_factory=list)

    @property
    def final(self) -> PurificationDiagnostics:
        return self.diagnostics[-1]


def run_trajectory(rho0: DensityMatrix, params: DimensionlessParams, d: int, T: int,
                   seed: Seed, checkpoint_every: int = 0, index: Optional[int] = None,
                   kraus: Optional[KrausSet] = None, record_outcomes: bool = False,
                   **init_options) -> TrajectoryRun:
    """
    Run T steps. Exact diagnostics are taken at t = 0, every `checkpoint_every`
    steps (0 disables intermediate checkpoints) and at T; the cheap gap bound
    is recorded at every step.
    """
    if T < 0:
        raise ParameterError(f"horizon must be >= 0, got {T}")
    state = init_trajectory(rho0, params, d, seed, kraus=kraus, index=index, **init_options)
    bounds = np.empty(T + 1)
    bounds[0] = gap_bound(state)
    diagnostics = [diagnose(state)]
    outcomes: List[Outcome] = []

    for t in range(1, T + 1):
        y, _ = sample_step(state)
        if record_outcomes:
            outcomes.append(y)
        bounds[t] = gap_bound(state)
        if t == T or (checkpoint_every and t % checkpoint_every == 0):
            diagnostics.append(diagnose(state))

    return TrajectoryRun(diagnostics=diagnostics, gap_bounds=bounds,
                         final_state=state, outcomes=outcomes)


@dataclass
class EnsembleResult:
    runs: List[TrajectoryRun]
    seed: Seed

    def final_diagnostics(self) -> List[PurificationDiagnostics]:
        return [run.final for run in self.runs]

    def final_states(self) -> List[DensityMatrix]:
        return [run.final_state.rho for run in self.runs]

    def checkpoint_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for i, run in enumerate(self.runs):
            for diag in run.diagnostics:
                rows.append({"traj_id": i, **diag.to_dict()})
        return rows

    def summary(self) -> Dict[str, Any]:
        finals = self.final_diagnostics()
        gaps = np.array([f.gap for f in finals], dtype=float)
        m_max = np.array([f.m_max for f in finals], dtype=float)
        n_hats = np.array([f.n_hat for f in finals], dtype=int)
        levels, counts = np.unique(n_hats, return_counts=True)
        return {
            "n_trajectories": len(self.runs),
            "median_gap": float(np.median(gaps)) if len(gaps) else None,
            "median_m_max": float(np.median(m_max)) if len(m_max) else None,
            "n_hat_counts": {str(int(k)): int(c) for k, c in zip(levels, counts)},
            "max_leakage": max((f.leakage for f in finals), default=0.0),
        }


def run_ensemble(rho0: DensityMatrix, params: DimensionlessParams, d: int, T: int,
                 n_trajectories: int, seed: Seed, checkpoint_every: int = 0,
                 max_workers: int = 1, **init_options) -> EnsembleResult:
    """Trajectory i uses generator (seed, i); results are ordered by i"""
    kraus = build_kraus(params, d)

    def one(i: int) -> TrajectoryRun:
        return run_trajectory(rho0, params, d, T, seed, checkpoint_every,
                              index=i, kraus=kraus, **init_options)

    indices = range(n_trajectories)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(one, indices))
    else:
        runs = [one(i) for i in indices]
    logger.info(f"ensemble of {n_trajectories} trajectories finished (T={T}, d={d})")
    return EnsembleResult(runs=runs, seed=seed)


# degenerate systems

def nonpurification_probability(rho0: DensityMatrix, report: DegeneracyReport) -> float:
    """Tr(rho Q) with Q the projector on the levels of N(xi, eta); 0 for non-degenerate systems"""
    if not report.degenerate:
        return 0.0
    levels = [n for n in report.n_set if n <= rho0.d]
    return float(np.sum(rho0.diagonal[levels]))


def degenerate_phase(params: DimensionlessParams) -> float:
    """Per-step phase of the coherences inside N(xi, eta): -(phi + pi xi)"""
    return -(params.phi + math.pi * params.xi_float)


def degenerate_limit(rho0: DensityMatrix, report: DegeneracyReport,
                     params: DimensionlessParams, t: int) -> DensityMatrix:
    """e^{-i(phi + pi xi) N t} Q rho Q / Tr(rho Q) e^{i(phi + pi xi) N t}"""
    if not report.degenerate:
        raise ParameterError("degenerate limit requested for a non-degenerate system")
    d = rho0.d
    mask = np.zeros(d + 1)
    mask[[n for n in report.n_set if n <= d]] = 1.0
    block = mask[:, None] * rho0.mat * mask[None, :]
    weight = float(np.real(np.trace(block)))
    if weight <= 0:
        raise ParameterError("initial state has no weight on the degenerate levels")
    rotation = np.exp(1j * degenerate_phase(params) * t * np.arange(d + 1))
    return DensityMatrix(rotation[:, None] * block * np.conj(rotation)[None, :] / weight)
