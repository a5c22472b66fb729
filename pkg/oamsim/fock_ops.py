"""
Linear algebra on the truncated Fock space {|0>, ..., |d>}.

Every operator the dynamics produces is a diagonal function of N composed
with a level shift, so it is stored as (shift, amp) with Op|n> = amp[n] |n+shift>.
Long products underflow; amplitudes are rescaled by powers of two and the
exponent is kept in `log_scale`, which cancels in every normalized quantity.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from .exceptions import NonHermitianError, ParameterError
from .params import DimensionlessParams

logger = logging.getLogger(__name__)

# rescale window for factored amplitudes
SCALE_LOW = 2.0 ** -512
SCALE_HIGH = 2.0 ** 512

HERMITIAN_TOL = 1e-8


class Outcome(str, Enum):
    """Measurement outcome (entry state, exit state) of one atom, in sampling order"""
    MM = "--"
    MP = "-+"
    PM = "+-"
    PP = "++"

    @property
    def shift(self) -> int:
        return _SHIFTS[self]

    @property
    def index(self) -> int:
        return OUTCOMES.index(self)

    @classmethod
    def parse(cls, label: str) -> "Outcome":
        try:
            return cls(label.strip())
        except ValueError as e:
            raise ParameterError(f"unknown outcome label {label!r}") from e


OUTCOMES: Tuple[Outcome, ...] = (Outcome.MM, Outcome.MP, Outcome.PM, Outcome.PP)
_SHIFTS = {Outcome.MM: 0, Outcome.MP: -1, Outcome.PM: 1, Outcome.PP: 0}


@dataclass(frozen=True, eq=False)
class DiagonalFunction:
    """f(N) on levels 0..d"""
    values: np.ndarray

    @property
    def d(self) -> int:
        return len(self.values) - 1

    @classmethod
    def phase(cls, phi: float, d: int) -> "DiagonalFunction":
        """e^{-i phi N}"""
        return cls(np.exp(-1j * phi * np.arange(d + 1)))

    def as_operator(self) -> "FactoredOperator":
        return FactoredOperator(shift=0, amp=np.asarray(self.values, dtype=complex))


@dataclass(frozen=True, eq=False)
class FactoredOperator:
    """2**log_scale * sum_n amp[n] |n+shift><n| on levels 0..d"""
    shift: int
    amp: np.ndarray
    log_scale: int = 0

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex)
        d = len(amp) - 1
        lo, hi = max(0, -self.shift), min(d, d - self.shift)
        if lo > 0 or hi < d:
            amp = amp.copy()
            amp[:lo] = 0.0
            amp[hi + 1:] = 0.0
        object.__setattr__(self, "amp", amp)

    @property
    def d(self) -> int:
        return len(self.amp) - 1

    @classmethod
    def identity(cls, d: int) -> "FactoredOperator":
        return cls(shift=0, amp=np.ones(d + 1, dtype=complex))

    def to_dense(self, include_scale: bool = True) -> np.ndarray:
        d = self.d
        mat = np.zeros((d + 1, d + 1), dtype=complex)
        n = np.arange(d + 1)
        valid = (n + self.shift >= 0) & (n + self.shift <= d)
        mat[n[valid] + self.shift, n[valid]] = self.amp[valid]
        if include_scale and self.log_scale:
            mat = np.ldexp(mat.real, self.log_scale) + 1j * np.ldexp(mat.imag, self.log_scale)
        return mat

    def norms_squared(self) -> np.ndarray:
        """||Op|n>||^2 per level, without the scale factor"""
        return np.abs(self.amp) ** 2

    def scaled(self, factor: float) -> "FactoredOperator":
        return FactoredOperator(self.shift, self.amp * factor, self.log_scale)


def _rescale(amp: np.ndarray) -> Tuple[np.ndarray, int]:
    peak = float(np.max(np.abs(amp))) if amp.size else 0.0
    if peak == 0.0 or SCALE_LOW <= peak <= SCALE_HIGH:
        return amp, 0
    _, exponent = math.frexp(peak)
    return amp * (2.0 ** -exponent), exponent


def compose_factored(W: FactoredOperator, V: FactoredOperator) -> FactoredOperator:
    """V o W, with amp(n) = amp_V(n + s_W) * amp_W(n)"""
    if W.d != V.d:
        raise ParameterError(f"truncation mismatch: {W.d} vs {V.d}")
    d = W.d
    idx = np.arange(d + 1) + W.shift
    valid = (idx >= 0) & (idx <= d)
    amp = np.zeros(d + 1, dtype=complex)
    amp[valid] = V.amp[idx[valid]] * W.amp[valid]
    amp, exponent = _rescale(amp)
    return FactoredOperator(shift=W.shift + V.shift, amp=amp,
                            log_scale=W.log_scale + V.log_scale + exponent)


def polar_parts(W: FactoredOperator) -> Tuple[DiagonalFunction, FactoredOperator]:
    """
    W = 2**W.log_scale U |W|. The modulus is |amp| without the scale factor, which
    stays with the caller; U keeps the shift with unimodular amplitudes where amp != 0.
    """
    modulus = np.abs(W.amp)
    phases = np.zeros_like(W.amp)
    nonzero = modulus > 0
    phases[nonzero] = W.amp[nonzero] / modulus[nonzero]
    return DiagonalFunction(modulus), FactoredOperator(shift=W.shift, amp=phases)


@dataclass(eq=False)
class DensityMatrix:
    """Hermitian (d+1)x(d+1) state; `leakage` is the trace mass lost to truncation so far"""
    mat: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise ParameterError(f"density matrix must be square, got shape {self.mat.shape}")

    @property
    def d(self) -> int:
        return self.mat.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.mat)))

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.mat)).copy()

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.mat, self.mat)))

    @property
    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.d + 1), self.diagonal))

    def max_support(self, atol: float = 0.0) -> int:
        """Highest level carrying population above atol (-1 for the zero matrix)"""
        occupied = np.nonzero(self.diagonal > atol)[0]
        return int(occupied[-1]) if occupied.size else -1

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr <= 0:
            raise ParameterError("cannot normalize a state with zero trace")
        return DensityMatrix(self.mat / tr, self.leakage)

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.mat.copy(), self.leakage)

    def validate(self, herm_tol: float = 1e-12, eig_floor: float = -1e-10,
                 trace_tol: float = 1e-10) -> List[str]:
        """Violated invariants, empty when the state is valid"""
        problems = []
        asym = float(np.max(np.abs(self.mat - self.mat.conj().T))) if self.mat.size else 0.0
        if asym > herm_tol:
            problems.append(f"not Hermitian (asymmetry {asym:.3e})")
        else:
            lowest = float(eigvalsh(self.mat)[0])
            if lowest < eig_floor:
                problems.append(f"negative eigenvalue {lowest:.3e}")
        tr = self.trace
        if not (1.0 - self.leakage - trace_tol <= tr <= 1.0 + trace_tol):
            problems.append(f"trace {tr:.15f} outside [1 - leakage, 1]")
        if self.leakage < 0:
            problems.append("negative leakage")
        return problems

    @classmethod
    def fock(cls, k: int, d: int) -> "DensityMatrix":
        if not 0 <= k <= d:
            raise ParameterError(f"Fock level {k} outside 0..{d}")
        mat = np.zeros((d + 1, d + 1), dtype=complex)
        mat[k, k] = 1.0
        return cls(mat)

    @classmethod
    def from_diagonal(cls, weights: Sequence[float], d: int) -> "DensityMatrix":
        w = np.asarray(weights, dtype=float)
        if len(w) > d + 1:
            raise ParameterError(f"{len(w)} weights do not fit truncation {d}")
        if np.any(w < 0) or w.sum() <= 0:
            raise ParameterError("diagonal weights must be non-negative with positive sum")
        diag = np.zeros(d + 1)
        diag[:len(w)] = w / w.sum()
        return cls(np.diag(diag).astype(complex))

    @classmethod
    def pure(cls, amplitudes: Sequence[complex], d: int) -> "DensityMatrix":
        psi = np.zeros(d + 1, dtype=complex)
        given = np.asarray(amplitudes, dtype=complex)
        if len(given) > d + 1:
            raise ParameterError(f"{len(given)} amplitudes do not fit truncation {d}")
        psi[:len(given)] = given
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ParameterError("zero state vector")
        psi /= norm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def thermal(cls, theta: float, d: int) -> "DensityMatrix":
        """e^{-theta N} truncated to 0..d and renormalized"""
        return cls.from_diagonal(np.exp(-theta * np.arange(d + 1)), d)


# C, S and alpha

def _cs_arrays(params: DimensionlessParams, levels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.sqrt(params.xi_float * levels + params.eta_float)
    # pi * sinc(x) = sin(pi x) / x, exact limit pi at x = 0
    sin_over_x = math.pi * np.sinc(x)
    C = np.cos(math.pi * x) + 1j * math.sqrt(params.eta_float) * sin_over_x
    S = math.sqrt(params.xi_float) * sin_over_x

    for i, n in enumerate(levels):
        n = int(n)
        k = params.resonant_root(n)
        if k is not None:
            C[i] = -1.0 if k % 2 else 1.0
            S[i] = 0.0
        elif n in params.injected:
            C[i] = C[i] / abs(C[i])
            S[i] = 0.0
    return C, S


def cs_table(params: DimensionlessParams, top: int) -> Tuple[np.ndarray, np.ndarray]:
    """C(n) and S(n) for n = 0..top"""
    return _cs_arrays(params, np.arange(top + 1))


def alpha_table(params: DimensionlessParams, top: int) -> np.ndarray:
    """alpha_n = n S(n)^2 for n = 0..top, clipped to [0, 1]"""
    _, S = cs_table(params, top)
    return np.clip(np.arange(top + 1) * S ** 2, 0.0, 1.0)


def eval_CS(params: DimensionlessParams, n: int) -> Tuple[complex, float]:
    if params.xi_float * n + params.eta_float < 0:
        raise ParameterError(f"xi*n + eta < 0 at n={n}")
    C, S = _cs_arrays(params, np.array([n]))
    return complex(C[0]), float(S[0])


def eval_alpha(params: DimensionlessParams, k: int) -> float:
    if k < 0:
        raise ParameterError(f"level must be >= 0, got {k}")
    if k == 0:
        return 0.0
    _, S = eval_CS(params, k)
    return min(1.0, max(0.0, k * S * S))


# Kraus operators

@dataclass(frozen=True, eq=False)
class KrausSet:
    ops: Dict[Outcome, FactoredOperator]
    params: DimensionlessParams
    d: int
    boundary_defect: float = 0.0

    def __getitem__(self, y: Outcome) -> FactoredOperator:
        return self.ops[y]

    def __iter__(self) -> Iterator[Tuple[Outcome, FactoredOperator]]:
        return ((y, self.ops[y]) for y in OUTCOMES)

    def level_weights(self) -> np.ndarray:
        """(4, d+1) array of ||V_y|n>||^2 in sampling order"""
        return np.stack([self.ops[y].norms_squared() for y in OUTCOMES])


def build_kraus(params: DimensionlessParams, d: int) -> KrausSet:
    if d < 1:
        raise ParameterError(f"truncation d must be >= 1, got {d}")
    atoms = params.atoms
    sp_minus, sp_plus = atoms.amplitudes
    C, S = cs_table(params, d + 1)
    n = np.arange(d + 1)
    phase = np.exp(-1j * params.phi * n)

    v_mm = sp_minus * phase * C[:d + 1]
    v_mp = np.zeros(d + 1, dtype=complex)
    v_mp[1:] = sp_minus * phase[:-1] * S[1:d + 1] * np.sqrt(n[1:])
    v_pm = np.zeros(d + 1, dtype=complex)
    v_pm[:-1] = sp_plus * phase[1:] * S[1:d + 1] * np.sqrt(n[1:])
    v_pp = sp_plus * phase * np.conj(C[1:d + 2])

    top_alpha = (d + 1) * S[d + 1] ** 2
    ops = {
        Outcome.MM: FactoredOperator(0, v_mm),
        Outcome.MP: FactoredOperator(-1, v_mp),
        Outcome.PM: FactoredOperator(1, v_pm),
        Outcome.PP: FactoredOperator(0, v_pp),
    }
    defect = atoms.p_plus * float(min(1.0, top_alpha))
    logger.debug(f"built Kraus set d={d}, boundary defect {defect:.3e}")
    return KrausSet(ops=ops, params=params, d=d, boundary_defect=defect)


def dense_kraus(params: DimensionlessParams, d: int) -> Dict[Outcome, np.ndarray]:
    """Reference matrices assembled from a, a^dagger, C(N), S(N) and e^{-i phi N}"""
    sp_minus, sp_plus = params.atoms.amplitudes
    C, S = cs_table(params, d + 1)
    a = np.diag(np.sqrt(np.arange(1, d + 1)), k=1).astype(complex)
    phase = np.diag(np.exp(-1j * params.phi * np.arange(d + 1)))
    return {
        Outcome.MM: sp_minus * phase @ np.diag(C[:d + 1]),
        Outcome.MP: sp_minus * phase @ np.diag(S[1:d + 2]) @ a,
        Outcome.PM: sp_plus * phase @ a.conj().T @ np.diag(S[1:d + 2]),
        Outcome.PP: sp_plus * phase @ np.diag(np.conj(C[1:d + 2])),
    }


def apply_to_density(V: FactoredOperator, rho: DensityMatrix,
                     include_scale: bool = False) -> Tuple[DensityMatrix, float]:
    """V rho V^* in O(d^2) and its trace"""
    if V.d != rho.d:
        raise ParameterError(f"truncation mismatch: {V.d} vs {rho.d}")
    d, s = V.d, V.shift
    block = V.amp[:, None] * rho.mat * np.conj(V.amp)[None, :]
    out = np.zeros_like(rho.mat)
    if s >= 0:
        out[s:, s:] = block[:d + 1 - s, :d + 1 - s]
    else:
        out[:d + 1 + s, :d + 1 + s] = block[-s:, -s:]
    if include_scale and V.log_scale:
        out = out * (2.0 ** (2 * V.log_scale))
    weight = float(np.real(np.trace(out)))
    return DensityMatrix(out, rho.leakage), weight


def trace_norm(A: np.ndarray) -> float:
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    asym = float(np.max(np.abs(A - A.conj().T)))
    if asym > HERMITIAN_TOL:
        raise NonHermitianError(f"trace norm needs a Hermitian matrix (asymmetry {asym:.3e})")
    herm = 0.5 * (A + A.conj().T)
    return float(np.sum(np.abs(eigvalsh(herm))))


@dataclass(frozen=True)
class StochasticityReport:
    max_deviation: float
    worst_level: int
    boundary_defect: float
    expected_boundary_defect: float
    per_level: Optional[Tuple[float, ...]] = field(default=None, repr=False)


def verify_stochasticity(ks: KrausSet, d: Optional[int] = None) -> StochasticityReport:
    """max over n < d of |sum_y <n|V_y^* V_y|n> - 1|, with the level-d defect reported apart"""
    d = ks.d if d is None else d
    totals = ks.level_weights().sum(axis=0)[:d + 1]
    deviations = np.abs(totals[:d] - 1.0)
    worst = int(np.argmax(deviations)) if d > 0 else 0
    return StochasticityReport(
        max_deviation=float(deviations.max()) if d > 0 else 0.0,
        worst_level=worst,
        boundary_defect=float(1.0 - totals[d]),
        expected_boundary_defect=ks.boundary_defect,
        per_level=tuple(float(x) for x in totals),
    )
