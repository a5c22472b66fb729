"""
Rabi resonances, the Rabi sector partition they induce, and degeneracy.

A positive level n is a Rabi resonance when xi*n + eta is the square of a
positive integer. Resonance decisions are made in exact rational
arithmetic only; float parameters are refused.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .exceptions import ExactnessError, ParameterError
from .fock_ops import eval_alpha
from .params import DimensionlessParams

logger = logging.getLogger(__name__)

# equality tolerance for alpha values of two sectors
SECTOR_MATCH_TOL = 1e-12


class Regime(str, Enum):
    NON_RESONANT = "non_resonant"
    FULLY_RESONANT = "fully_resonant"
    INJECTED = "injected"


@dataclass(frozen=True)
class ResonanceSet:
    """Sorted resonances (n, k) with xi*n + eta = k^2; k is None for injected levels"""
    entries: Tuple[Tuple[int, Optional[int]], ...]
    n_max: int
    regime: Regime

    @property
    def levels(self) -> List[int]:
        return [n for n, _ in self.entries]

    def __contains__(self, n: int) -> bool:
        return any(level == n for level, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_max": self.n_max,
            "regime": self.regime.value,
            "entries": [{"n": n, "k": k} for n, k in self.entries],
        }


@dataclass(frozen=True)
class SectorPartition:
    """Contiguous inclusive intervals (start, end) covering 0..n_max, cut at resonances"""
    sectors: Tuple[Tuple[int, int], ...]
    n_max: int
    open_ended: bool

    def __len__(self) -> int:
        return len(self.sectors)

    @property
    def boundaries(self) -> List[int]:
        return [start for start, _ in self.sectors[1:]]

    def sector_of(self, n: int) -> int:
        for j, (start, end) in enumerate(self.sectors):
            if start <= n <= end:
                return j
        raise IndexError(f"level {n} outside 0..{self.n_max}")

    def levels(self, j: int) -> range:
        start, end = self.sectors[j]
        return range(start, end + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_max": self.n_max,
            "open_ended": self.open_ended,
            "sectors": [list(s) for s in self.sectors],
        }


@dataclass(frozen=True)
class DegeneracyReport:
    """N(xi, eta) = {n in {0} u R : n+1 in R} and sectors with identical transition data"""
    n_set: Tuple[int, ...]
    degenerate: bool
    matched_sector_pairs: Tuple[Tuple[Tuple[int, int], Tuple[int, int]], ...] = field(
        default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_set": list(self.n_set),
            "degenerate": self.degenerate,
            "matched_sector_pairs": [[list(a), list(b)] for a, b in self.matched_sector_pairs],
        }


def _require_exact(params: DimensionlessParams) -> None:
    if not params.is_exact:
        raise ExactnessError(
            "resonance detection needs exact rational xi and eta; "
            "float parameters are refused (inject resonances explicitly instead)")


def find_resonances(params: DimensionlessParams, n_max: int) -> ResonanceSet:
    """All n in [1, n_max] with xi*n + eta a perfect square, decided exactly"""
    _require_exact(params)
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")

    xi, eta = params.xi, params.eta
    # clear denominators: xi*n + eta = (a*n + b) / c
    c = xi.denominator * eta.denominator
    a = xi.numerator * eta.denominator
    b = eta.numerator * xi.denominator

    entries = []
    for n in range(1, n_max + 1):
        numerator = a * n + b
        if numerator % c:
            continue
        value = numerator // c
        k = math.isqrt(value)
        if k >= 1 and k * k == value:
            entries.append((n, k))

    regime = Regime.FULLY_RESONANT if entries else Regime.NON_RESONANT
    logger.debug(f"xi={xi} eta={eta}: {len(entries)} resonances up to {n_max}")
    return ResonanceSet(entries=tuple(entries), n_max=n_max, regime=regime)


def find_resonances_by_root(params: DimensionlessParams, n_max: int) -> ResonanceSet:
    """Same set enumerated from the k side: n = (k^2 - eta) / xi must be an integer"""
    _require_exact(params)
    if params.xi == 0:
        raise ParameterError("k-side enumeration needs xi > 0")

    xi, eta = params.xi, params.eta
    entries = []
    k = 1
    while k * k <= xi * n_max + eta:
        n = (Fraction(k * k) - eta) / xi
        if n.denominator == 1 and 1 <= n.numerator <= n_max:
            entries.append((n.numerator, k))
        k += 1

    regime = Regime.FULLY_RESONANT if entries else Regime.NON_RESONANT
    return ResonanceSet(entries=tuple(sorted(entries)), n_max=n_max, regime=regime)


def injected_resonances(levels: Iterable[int], n_max: int) -> ResonanceSet:
    """Caller-declared resonances (simply resonant systems)"""
    unique = sorted({int(n) for n in levels})
    if any(n < 1 for n in unique):
        raise ParameterError("injected resonances must be positive levels")
    return ResonanceSet(
        entries=tuple((n, None) for n in unique if n <= n_max),
        n_max=n_max,
        regime=Regime.INJECTED,
    )


def resolve_resonances(params: DimensionlessParams, n_max: int) -> ResonanceSet:
    """Exact search for rational parameters, the injected list otherwise"""
    if params.is_exact:
        found = find_resonances(params, n_max)
        if params.injected:
            merged = {n: k for n, k in found.entries}
            for n in params.injected:
                if n <= n_max:
                    merged.setdefault(n, None)
            # an exact search that already found resonances keeps its classification
            regime = Regime.FULLY_RESONANT if found.entries else Regime.INJECTED
            return ResonanceSet(entries=tuple(sorted(merged.items())),
                                n_max=n_max, regime=regime)
        return found
    if params.injected:
        return injected_resonances(params.injected, n_max)
    logger.warning("float parameters without injected resonances are treated as non-resonant")
    return ResonanceSet(entries=(), n_max=n_max, regime=Regime.NON_RESONANT)


def classify_regime(rs: ResonanceSet) -> Regime:
    """Rational parameters have zero or infinitely many resonances"""
    if rs.regime is Regime.INJECTED:
        return Regime.INJECTED
    return Regime.FULLY_RESONANT if rs.entries else Regime.NON_RESONANT


def sector_partition(rs: ResonanceSet, n_max: int) -> SectorPartition:
    """I_1 = {0..n_1-1}, I_2 = {n_1..n_2-1}, ..., last interval closed at n_max"""
    if n_max > rs.n_max and rs.regime is not Regime.INJECTED:
        raise ParameterError(
            f"resonances enumerated to {rs.n_max}, partition requested to {n_max}")
    cuts = [n for n in rs.levels if 1 <= n <= n_max]
    starts = [0] + cuts
    ends = [c - 1 for c in cuts] + [n_max]
    sectors = tuple(zip(starts, ends))

    beyond = any(n > n_max for n in rs.levels)
    open_ended = rs.regime is Regime.NON_RESONANT or (
        rs.regime is Regime.INJECTED and not beyond)
    return SectorPartition(sectors=sectors, n_max=n_max, open_ended=open_ended)


def degenerate_set(rs: ResonanceSet, params: Optional[DimensionlessParams] = None) -> DegeneracyReport:
    """
    N(xi, eta) restricted to [0, n_max - 1], the degeneracy flag, and (when
    params are given) the pairs of complete sectors with identical alphas.
    """
    resonant = set(rs.levels)
    n_set = tuple(n for n in [0] + rs.levels
                  if n + 1 in resonant and n <= rs.n_max - 1)

    matched: List[Tuple[Tuple[int, int], Tuple[int, int]]] = []
    if params is not None:
        matched = _matched_sectors(rs, params)

    return DegeneracyReport(n_set=n_set, degenerate=len(n_set) >= 2,
                            matched_sector_pairs=tuple(matched))


def _matched_sectors(rs: ResonanceSet,
                     params: DimensionlessParams) -> List[Tuple[Tuple[int, int], Tuple[int, int]]]:
    starts = [0] + rs.levels
    complete = [(starts[i], starts[i + 1]) for i in range(len(starts) - 1)]
    profiles = {
        (lo, hi): [eval_alpha(params, lo + j) for j in range(hi - lo + 1)]
        for lo, hi in complete
    }
    pairs = []
    for i, first in enumerate(complete):
        for second in complete[i + 1:]:
            if first[1] - first[0] != second[1] - second[0]:
                continue
            a, b = profiles[first], profiles[second]
            if all(abs(x - y) <= SECTOR_MATCH_TOL for x, y in zip(a, b)):
                pairs.append(((first[0], first[1] - 1), (second[0], second[1] - 1)))
    return pairs


def search_degenerate(xi_den_max: int, eta_num_max: int, n_max: int,
                      xi_num_max: Optional[int] = None, eta_den_max: int = 1,
                      max_workers: int = 1) -> List[Tuple[Fraction, Fraction, Tuple[int, ...]]]:
    """
    Brute-force scan of rational (xi, eta) = (p/q, r/s) with q <= xi_den_max,
    r <= eta_num_max, s <= eta_den_max and p <= xi_num_max (default
    xi_den_max * n_max), returning every pair with |N(xi, eta)| >= 2.
    """
    if min(xi_den_max, eta_num_max + 1, n_max, eta_den_max) < 1:
        raise ParameterError("search bounds must be positive")
    if xi_num_max is None:
        xi_num_max = xi_den_max * n_max

    candidates = []
    seen = set()
    for q in range(1, xi_den_max + 1):
        for p in range(1, xi_num_max + 1):
            for s in range(1, eta_den_max + 1):
                for r in range(0, eta_num_max + 1):
                    key = (Fraction(p, q), Fraction(r, s))
                    if key not in seen:
                        seen.add(key)
                        candidates.append(key)
    candidates.sort()

    def scan(pair: Tuple[Fraction, Fraction]) -> Optional[Tuple[Fraction, Fraction, Tuple[int, ...]]]:
        xi, eta = pair
        params = DimensionlessParams.exact(xi, eta)
        report = degenerate_set(find_resonances(params, n_max))
        return (xi, eta, report.n_set) if report.degenerate else None

    # map keeps input order, so the merge is deterministic
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(scan, candidates))
    else:
        results = [scan(pair) for pair in candidates]

    found = [r for r in results if r is not None]
    logger.info(f"scanned {len(candidates)} rational pairs, {len(found)} degenerate")
    return found
