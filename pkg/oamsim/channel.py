"""
The averaged channel L(rho) = sum_y V_y rho V_y^*, its iteration toward the
Gibbs state and the sector-wise limits of resonant systems.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .birth_death import gibbs_measure
from .exceptions import NoInvariantStateError, ParameterError
from .fock_ops import DensityMatrix, KrausSet, apply_to_density, trace_norm
from .resonance import SectorPartition

logger = logging.getLogger(__name__)


def apply_channel(rho: DensityMatrix, kraus: KrausSet) -> DensityMatrix:
    """Dense application; trace lost at the boundary is added to the leakage"""
    out = np.zeros_like(rho.mat)
    for _, V in kraus:
        image, _ = apply_to_density(V, rho)
        out += image.mat
    lost = max(0.0, rho.trace - float(np.real(np.trace(out))))
    return DensityMatrix(out, leakage=rho.leakage + lost)


@dataclass(eq=False)
class BandedState:
    """
    Lower diagonals of a Hermitian matrix: bands[b][i] = <i+b|rho|i> for the
    kept offsets b >= 0. The channel maps each band to itself.
    """
    d: int
    bands: Dict[int, np.ndarray]
    leakage: float = 0.0

    @classmethod
    def from_dense(cls, rho: DensityMatrix, offsets: Optional[Iterable[int]] = None,
                   tol: float = 0.0) -> "BandedState":
        d = rho.d
        if offsets is None:
            offsets = [b for b in range(d + 1)
                       if b == 0 or np.max(np.abs(np.diagonal(rho.mat, -b))) > tol]
        bands = {b: np.diagonal(rho.mat, -b).copy() for b in sorted(set(offsets))}
        return cls(d=d, bands=bands, leakage=rho.leakage)

    def to_dense(self) -> DensityMatrix:
        mat = np.zeros((self.d + 1, self.d + 1), dtype=complex)
        for b, values in self.bands.items():
            i = np.arange(len(values))
            mat[i + b, i] = values
            if b:
                mat[i, i + b] = np.conj(values)
        return DensityMatrix(mat, leakage=self.leakage)

    @property
    def trace(self) -> float:
        return float(np.real(self.bands[0].sum()))


def apply_channel_banded(state: BandedState, kraus: KrausSet) -> BandedState:
    d = state.d
    before = state.trace
    out: Dict[int, np.ndarray] = {}
    for b, band in state.bands.items():
        acc = np.zeros_like(band)
        length = len(band)
        for _, V in kraus:
            s, a = V.shift, V.amp
            # entry i of band b is <i+b|rho|i>; it moves to entry i+s
            contrib = a[b:b + length] * band * np.conj(a[:length])
            lo, hi = max(0, -s), min(length, length - s)
            if lo < hi:
                acc[lo + s:hi + s] += contrib[lo:hi]
        out[b] = acc
    result = BandedState(d=d, bands=out, leakage=state.leakage)
    result.leakage += max(0.0, before - result.trace)
    return result


def local_gibbs_state(theta: float, sector: Tuple[int, int], d: int) -> DensityMatrix:
    """e^{-theta N} P_j / Tr(e^{-theta N} P_j) for the sector (start, end) clipped to d"""
    start, end = sector[0], min(sector[1], d)
    if start > end:
        raise ParameterError(f"sector {sector} lies above truncation {d}")
    levels = np.arange(start, end + 1)
    anchor = start if theta >= 0 else end
    w = np.exp(-theta * (levels - anchor))
    diag = np.zeros(d + 1)
    diag[start:end + 1] = w / w.sum()
    return DensityMatrix(np.diag(diag).astype(complex))


def invariant_state(theta: float, d: int, renormalize: bool = True) -> DensityMatrix:
    """
    Truncated Gibbs state. Without renormalization the trace is
    1 - e^{-(d+1) theta} and the missing tail is booked as leakage.
    """
    if not theta > 0:
        raise NoInvariantStateError(f"there is no invariant state for theta = {theta} <= 0")
    gibbs = gibbs_measure(theta, d)
    weights = gibbs.weights
    if renormalize:
        return DensityMatrix(np.diag(weights / weights.sum()).astype(complex))
    return DensityMatrix(np.diag(weights).astype(complex), leakage=gibbs.tail_mass)


@dataclass
class ChannelReport:
    distances: List[Tuple[int, float]]
    iterations: int
    converged: bool
    final_state: Optional[DensityMatrix] = field(default=None, repr=False)

    @property
    def final_distance(self) -> float:
        return self.distances[-1][1]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_distance": self.final_distance,
            "final_leakage": self.final_state.leakage if self.final_state is not None else None,
        }


def iterate_channel(rho0: DensityMatrix, kraus: KrausSet, target: DensityMatrix,
                    tol: float, t_max: int, record_every: int = 1,
                    banded: bool = True) -> ChannelReport:
    """
    Apply L until ||L^t(rho0) - target||_1 <= tol or t_max steps. The distance
    is evaluated (and the tolerance checked) every `record_every` steps and at t_max.
    """
    if record_every < 1:
        raise ParameterError("record_every must be >= 1")
    distance = trace_norm(rho0.mat - target.mat)
    distances = [(0, distance)]
    if distance <= tol:
        return ChannelReport(distances, 0, True, rho0.copy())

    state = BandedState.from_dense(rho0) if banded else rho0
    converged = False
    t = 0
    for t in range(1, t_max + 1):
        if banded:
            state = apply_channel_banded(state, kraus)
        else:
            state = apply_channel(state, kraus)
        if t % record_every == 0 or t == t_max:
            current = state.to_dense() if banded else state
            distance = trace_norm(current.mat - target.mat)
            distances.append((t, distance))
            if distance <= tol:
                converged = True
                break

    final = state.to_dense() if banded else state
    if not converged:
        logger.warning(f"channel iteration did not reach tol {tol:.1e} within {t_max} steps "
                       f"(distance {distance:.3e})")
    return ChannelReport(distances, t, converged, final)


def sector_weights(rho0: DensityMatrix, partition: SectorPartition) -> np.ndarray:
    """Tr(rho P_j) for every sector"""
    diag = rho0.diagonal
    return np.array([diag[start:min(end, rho0.d) + 1].sum() for start, end in partition.sectors])


def resonant_limit(rho0: DensityMatrix, partition: SectorPartition, theta: float,
                   d: Optional[int] = None) -> DensityMatrix:
    """sum_j Tr(rho P_j) rho_inv^(j)"""
    d = rho0.d if d is None else d
    if partition.open_ended and not theta > 0:
        raise NoInvariantStateError(
            f"the open-ended last sector has no local Gibbs state for theta = {theta} <= 0")
    weights = sector_weights(rho0, partition)
    out = np.zeros((d + 1, d + 1), dtype=complex)
    for (start, end), w in zip(partition.sectors, weights):
        if w == 0 or start > d:
            continue
        out += w * local_gibbs_state(theta, (start, end), d).mat
    return DensityMatrix(out, leakage=rho0.leakage)
