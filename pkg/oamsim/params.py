"""
Model parameters of the one-atom maser and the conversions between them.

Two entry paths exist: physical frequencies (always float) and direct
dimensionless values, where the coupling xi and detuning eta may be exact
rationals so that Rabi resonances (xi*n + eta = k^2) can be decided exactly.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple, Union

from scipy.special import expit

from .exceptions import ParameterError

Number = Union[int, float, Fraction, str]

TWO_PI = 2.0 * math.pi


class Exactness(str, Enum):
    EXACT_RATIONAL = "exact_rational"
    FLOAT = "float"


def to_fraction(value: Number) -> Fraction:
    """Parse an exact rational from an int, a Fraction or a string like '1/3'"""
    if isinstance(value, bool):
        raise ParameterError(f"not a rational number: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ParameterError(f"not a rational number: {value!r}") from e
    if isinstance(value, float):
        # the literal binary value; '1/3' must be given as a string
        return Fraction(value)
    raise ParameterError(f"not a rational number: {value!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Frequencies in rad/time, interaction time tau and inverse temperature beta"""
    epsilon: float
    epsilon0: float
    coupling: float
    tau: float
    beta: float

    def __post_init__(self):
        problems = []
        if not self.epsilon > 0:
            problems.append("epsilon must be > 0")
        if not self.epsilon0 > 0:
            problems.append("epsilon0 must be > 0")
        if not self.tau > 0:
            problems.append("tau must be > 0")
        for name in ("epsilon", "epsilon0", "coupling", "tau", "beta"):
            if not math.isfinite(getattr(self, name)):
                problems.append(f"{name} must be finite")
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def detuning(self) -> float:
        return self.epsilon - self.epsilon0


@dataclass(frozen=True)
class DimensionlessParams:
    """
    Dimensionless model parameters.

    xi, eta drive every probability of the model; theta = beta*epsilon
    fixes the atomic populations and phi = tau*epsilon (mod 2*pi) only
    enters the phases of coherences. In EXACT_RATIONAL mode xi and eta are
    Fractions in lowest terms. `injected` lists levels declared resonant by
    the caller (simply resonant systems cannot be reached with rationals).
    """
    xi: Union[Fraction, float]
    eta: Union[Fraction, float]
    theta: float = 0.0
    phi: float = 0.0
    exactness: Exactness = Exactness.FLOAT
    injected: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.exactness is Exactness.EXACT_RATIONAL:
            object.__setattr__(self, "xi", to_fraction(self.xi))
            object.__setattr__(self, "eta", to_fraction(self.eta))
        else:
            object.__setattr__(self, "xi", float(self.xi))
            object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "injected",
                           tuple(sorted({int(n) for n in self.injected})))

        if self.xi < 0:
            raise ParameterError(f"xi must be >= 0, got {self.xi}")
        if self.eta < 0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")
        if math.isnan(self.theta):
            raise ParameterError("theta must not be NaN")
        if any(n < 1 for n in self.injected):
            raise ParameterError("injected resonances must be positive levels")

    @classmethod
    def exact(cls, xi: Number, eta: Number, theta: float = 0.0,
              phi: float = 0.0, injected: Tuple[int, ...] = ()) -> "DimensionlessParams":
        return cls(xi=xi, eta=eta, theta=theta, phi=phi,
                   exactness=Exactness.EXACT_RATIONAL, injected=tuple(injected))

    @property
    def is_exact(self) -> bool:
        return self.exactness is Exactness.EXACT_RATIONAL

    @property
    def xi_float(self) -> float:
        return float(self.xi)

    @property
    def eta_float(self) -> float:
        return float(self.eta)

    @property
    def atoms(self) -> "AtomProbabilities":
        return atomic_probabilities(self.theta)

    def resonant_root(self, n: int) -> Optional[int]:
        """Exact positive integer k with xi*n + eta == k**2, if any (exact mode only)"""
        if not self.is_exact:
            return None
        value = self.xi * n + self.eta
        numerator, denominator = value.numerator, value.denominator
        if denominator != 1 or numerator <= 0:
            return None
        k = math.isqrt(numerator)
        return k if k * k == numerator else None

    def zeroes_alpha(self, n: int) -> bool:
        """True when alpha_n vanishes by resonance rather than by rounding"""
        if n in self.injected:
            return True
        return n >= 1 and self.resonant_root(n) is not None

    def to_dict(self) -> Dict[str, Any]:
        if self.is_exact:
            xi: Any = str(self.xi)
            eta: Any = str(self.eta)
        else:
            xi, eta = self.xi, self.eta
        data = {
            "xi": xi,
            "eta": eta,
            "theta": self.theta,
            "phi": self.phi,
            "exact": self.is_exact,
        }
        if self.injected:
            data["injected_resonances"] = list(self.injected)
        return data


@dataclass(frozen=True)
class AtomProbabilities:
    """Probabilities that an incoming atom is in its ground / excited state"""
    p_minus: float
    p_plus: float

    @property
    def amplitudes(self) -> Tuple[float, float]:
        return math.sqrt(self.p_minus), math.sqrt(self.p_plus)


def atomic_probabilities(theta: float) -> AtomProbabilities:
    """p_at(-) = 1/(1+e^-theta), p_at(+) = 1 - p_at(-) so that they sum to one exactly"""
    if math.isnan(theta):
        raise ParameterError("theta must not be NaN")
    p_minus = float(expit(theta))
    return AtomProbabilities(p_minus=p_minus, p_plus=1.0 - p_minus)


def derive_dimensionless(phys: PhysicalParams) -> DimensionlessParams:
    """eta = (Delta*tau / 2pi)^2, xi = (lambda*tau / pi)^2, theta = beta*eps, phi = tau*eps mod 2pi"""
    eta = (phys.detuning * phys.tau / TWO_PI) ** 2
    xi = (phys.coupling * phys.tau / math.pi) ** 2
    return DimensionlessParams(
        xi=xi,
        eta=eta,
        theta=phys.beta * phys.epsilon,
        phi=math.fmod(phys.tau * phys.epsilon, TWO_PI),
        exactness=Exactness.FLOAT,
    )


def params_from_dict(block: Dict[str, Any]) -> DimensionlessParams:
    """Build parameters from a config block {"physical": {...}} or {"dimensionless": {...}}"""
    if "physical" in block:
        phys = block["physical"]
        return derive_dimensionless(PhysicalParams(
            epsilon=float(phys["epsilon"]),
            epsilon0=float(phys["epsilon0"]),
            coupling=float(phys["lambda"]),
            tau=float(phys["tau"]),
            beta=float(phys["beta"]),
        ))
    dim = block["dimensionless"]
    # ints, Fractions and rational strings are exact; only genuine floats are not
    inexact = any(isinstance(dim.get(key), float) for key in ("xi", "eta"))
    exact = bool(dim.get("exact", not inexact))
    return DimensionlessParams(
        xi=dim["xi"] if exact else float(to_fraction(dim["xi"])),
        eta=dim["eta"] if exact else float(to_fraction(dim["eta"])),
        theta=float(dim.get("theta", 0.0)),
        phi=float(dim.get("phi", 0.0)),
        exactness=Exactness.EXACT_RATIONAL if exact else Exactness.FLOAT,
        injected=tuple(dim.get("injected_resonances", ())),
    )
