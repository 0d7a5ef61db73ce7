"""Parameter tuples and exact changes of variables.

Three frames are used throughout the package:

* the physical circuit (energies, drive voltage, lab frequency),
* the dimensionless model (beta, lambda, nu_d, xi_d, q_tilde) obtained by
  normalizing the oscillator frequency to 1 and displacing out the linear
  drive response,
* the symmetric-dissipation frame (beta_tilde, nu_d_tilde, kappa) in which
  both quadratures damp at the same rate kappa.

Everything downstream consumes dimensionless quantities only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import (
    ConfigError,
    NonPositiveEnergy,
    NotCoprime,
    OverdampedRegime,
    PoleAtResonance,
)

# 2018 SI exact values; only used when converting a physical circuit.
HBAR = 1.054571817e-34  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C

#: |nu_d - 1| below this is treated as sitting on the drive-conversion pole.
POLE_GUARD = 1e-9


@dataclass(frozen=True)
class PhysicalCircuit:
    """Circuit energies and drive settings, all in consistent SI-like units."""

    E_C: float
    E_L: float
    E_J: float
    C_g: float
    V_d_bar: float
    omega_d: float
    hbar: float = HBAR

    def __post_init__(self):
        if self.E_C <= 0 or self.E_L <= 0 or self.E_J <= 0:
            raise NonPositiveEnergy(
                f"E_C, E_L, E_J must be > 0, got ({self.E_C}, {self.E_L}, {self.E_J})"
            )
        if self.C_g < 0:
            raise NonPositiveEnergy(f"C_g must be >= 0, got {self.C_g}")
        if self.omega_d <= 0:
            raise NonPositiveEnergy(f"omega_d must be > 0, got {self.omega_d}")


@dataclass(frozen=True)
class NormalizedModel:
    """Dimensionless parameter tuple driving every computation.

    ``q_tilde`` may be ``math.inf``, in which case the classical dynamics
    are exactly Hamiltonian (kappa = 0).
    """

    beta: float
    lambda_: float
    nu_d: float
    xi_d: float
    q_tilde: float = math.inf

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.lambda_ <= 0:
            raise ValueError(f"lambda must be > 0, got {self.lambda_}")
        if self.nu_d <= 0:
            raise ValueError(f"nu_d must be > 0, got {self.nu_d}")
        if not (self.q_tilde > 0.5):
            raise OverdampedRegime(f"q_tilde must exceed 1/2, got {self.q_tilde}")


@dataclass(frozen=True)
class SymmetricFrame:
    """Parameters of the equal-damping frame, including the time rescaling."""

    beta_tilde: float
    nu_d_tilde: float
    kappa: float
    xi_d: float
    s_scale: float = 1.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def period(self) -> float:
        """One drive period in the rescaled time."""
        return 2.0 * math.pi / self.nu_d_tilde


@dataclass(frozen=True)
class ResonanceLabel:
    """Subharmonic order n, winding number m, and their parity bit r."""

    n: int
    m: int
    r: int

    @property
    def legs(self) -> int:
        """Number of coherent-state legs, (1 + r) * n."""
        return (1 + self.r) * self.n


def normalize(circuit: PhysicalCircuit, q_tilde: float = math.inf) -> NormalizedModel:
    """Convert a physical circuit to the dimensionless model.

    Raises PoleAtResonance when the drive sits on the linear-response pole
    nu_d = 1, where the displaced-frame drive amplitude diverges.
    """
    beta = circuit.E_J / circuit.E_L
    lam = (2.0 * circuit.E_C / circuit.E_L) ** 0.25
    nu_d = circuit.hbar * circuit.omega_d / math.sqrt(8.0 * circuit.E_C * circuit.E_L)
    if abs(nu_d - 1.0) < POLE_GUARD:
        raise PoleAtResonance(f"nu_d = {nu_d!r} sits on the drive-conversion pole")
    xi_d = (
        circuit.V_d_bar * circuit.C_g / ELEMENTARY_CHARGE
        * math.sqrt(2.0 * circuit.E_C / circuit.E_L)
        * nu_d / (1.0 - nu_d**2)
    )
    return NormalizedModel(beta=beta, lambda_=lam, nu_d=nu_d, xi_d=xi_d, q_tilde=q_tilde)


def to_symmetric_frame(model: NormalizedModel) -> SymmetricFrame:
    """Map the dimensionless model to the equal-damping frame.

    Infinite q_tilde gives kappa = 0 and leaves (beta, nu_d) untouched
    exactly; q_tilde <= 1/2 has no such frame.
    """
    q = model.q_tilde
    if not (q > 0.5):
        raise OverdampedRegime(f"q_tilde must exceed 1/2, got {q}")
    if math.isinf(q):
        return SymmetricFrame(
            beta_tilde=model.beta,
            nu_d_tilde=model.nu_d,
            kappa=0.0,
            xi_d=model.xi_d,
            s_scale=1.0,
        )
    s = math.sqrt(1.0 - 1.0 / (4.0 * q * q))
    return SymmetricFrame(
        beta_tilde=model.beta / (s * s),
        nu_d_tilde=model.nu_d / s,
        kappa=1.0 / (2.0 * q * s),
        xi_d=model.xi_d,
        s_scale=s,
    )


def from_symmetric_frame(frame: SymmetricFrame, lambda_: float = 1.0) -> NormalizedModel:
    """Invert the equal-damping rescalings back to (beta, nu_d, q_tilde)."""
    if frame.kappa == 0.0:
        return NormalizedModel(
            beta=frame.beta_tilde,
            lambda_=lambda_,
            nu_d=frame.nu_d_tilde,
            xi_d=frame.xi_d,
            q_tilde=math.inf,
        )
    # kappa = 1 / (2 q s) and s^2 = 1 - 1/(4 q^2) give  (2 q s)^2 = 4 q^2 - 1.
    q = math.sqrt(1.0 / frame.kappa**2 + 1.0) / 2.0
    s2 = 1.0 - 1.0 / (4.0 * q * q)
    return NormalizedModel(
        beta=frame.beta_tilde * s2,
        lambda_=lambda_,
        nu_d=frame.nu_d_tilde * math.sqrt(s2),
        xi_d=frame.xi_d,
        q_tilde=q,
    )


def make_resonance(n: int, m: int) -> ResonanceLabel:
    """Build an (n:m) resonance label; n and m must be coprime and >= 1."""
    if n < 1 or m < 1 or n != int(n) or m != int(m):
        raise ValueError(f"n and m must be positive integers, got ({n}, {m})")
    n, m = int(n), int(m)
    if math.gcd(n, m) != 1:
        raise NotCoprime(f"gcd({n}, {m}) = {math.gcd(n, m)} > 1")
    return ResonanceLabel(n=n, m=m, r=(n + m) % 2)


def detuning(label: ResonanceLabel, frame: SymmetricFrame) -> float:
    """Detuning delta = 1 - (m/n) nu_d_tilde of the (n:m) rotating frame."""
    return 1.0 - (label.m / label.n) * frame.nu_d_tilde


_NORMALIZED_KEYS = {"beta", "lambda", "nu_d", "xi_d", "q_tilde"}
_PHYSICAL_KEYS = {"E_C", "E_L", "E_J", "C_g", "V_d_bar", "omega_d"}


def model_from_mapping(data: dict) -> NormalizedModel:
    """Build a NormalizedModel from a parsed config mapping.

    Exactly one of the dimensionless block (beta, lambda, nu_d, xi_d,
    q_tilde) or the physical block (E_C, E_L, E_J, C_g, V_d_bar, omega_d)
    must be present. The string "inf" is accepted for q_tilde.
    """
    keys = set(data)
    has_norm = bool(keys & _NORMALIZED_KEYS)
    has_phys = bool(keys & _PHYSICAL_KEYS)
    if has_norm and has_phys:
        raise ConfigError("config mixes dimensionless and physical parameter blocks")
    if not has_norm and not has_phys:
        raise ConfigError(
            "config contains neither a dimensionless nor a physical parameter block"
        )
    if has_phys:
        missing = _PHYSICAL_KEYS - keys
        if missing:
            raise ConfigError(f"physical block missing keys: {sorted(missing)}")
        circuit = PhysicalCircuit(
            E_C=float(data["E_C"]),
            E_L=float(data["E_L"]),
            E_J=float(data["E_J"]),
            C_g=float(data["C_g"]),
            V_d_bar=float(data["V_d_bar"]),
            omega_d=float(data["omega_d"]),
            hbar=float(data.get("hbar", HBAR)),
        )
        return normalize(circuit, q_tilde=_parse_q(data.get("q_tilde", "inf")))
    missing = _NORMALIZED_KEYS - keys
    if missing:
        raise ConfigError(f"dimensionless block missing keys: {sorted(missing)}")
    return NormalizedModel(
        beta=float(data["beta"]),
        lambda_=float(data["lambda"]),
        nu_d=float(data["nu_d"]),
        xi_d=float(data["xi_d"]),
        q_tilde=_parse_q(data["q_tilde"]),
    )


def load_model(path: str) -> NormalizedModel:
    """Load a NormalizedModel from a JSON config file."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return model_from_mapping(data)


def _parse_q(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"q_tilde string must be 'inf', got {value!r}")
    return float(value)
