"""Exception types shared across the package."""


class DrivenJJError(Exception):
    """Base class for all package-specific errors."""


# --- parameter / frame errors ---------------------------------------------

class PoleAtResonance(DrivenJJError):
    """Drive amplitude conversion is undefined at nu_d = 1."""


class NonPositiveEnergy(DrivenJJError):
    """Circuit energies must be strictly positive."""


class OverdampedRegime(DrivenJJError):
    """Quality factor at or below 1/2: the symmetric frame does not exist."""


class NotCoprime(DrivenJJError):
    """Resonance orders n and m must be coprime."""


class ConfigError(DrivenJJError):
    """Malformed or inconsistent run configuration."""


# --- classical integration errors ------------------------------------------

class StepSizeUnderflow(DrivenJJError):
    """Adaptive integrator stalled below the floating-point step limit."""


class NoConvergence(DrivenJJError):
    """Newton iteration did not reach the residual tolerance."""


class SingularJacobian(DrivenJJError):
    """Linearized return map is singular (near a bifurcation)."""


class AmbiguousWinding(DrivenJJError):
    """Relative winding angle too far from an integer number of laps."""


class Escaped(DrivenJJError):
    """Trajectory left the configured phase-space bound."""


# --- quantum / Fock-space errors -------------------------------------------

class DimensionTooSmall(DrivenJJError):
    """Fock truncation too small for the requested operation."""


class UnitarityLoss(DrivenJJError):
    """Propagator lost unitarity beyond tolerance (truncation or step size)."""


class TruncationUnsafe(DrivenJJError):
    """Coherent amplitude too large for the Fock truncation."""


class NoCatManifold(DrivenJJError):
    """No set of Floquet modes resembles a cat-state family."""


class DegenerateEigenbasisWarning(UserWarning):
    """Two eigenvalues nearly coincide; the eigenbasis is gauge-dependent."""


# --- dissipative steady-state errors ----------------------------------------

class InsufficientSampling(DrivenJJError):
    """Too few mode samples per period for the requested harmonic cutoff."""


class NoKernel(DrivenJJError):
    """Rate matrix has no numerically zero singular value."""


# --- averaged model / bounds errors -----------------------------------------

class MarginalStability(DrivenJJError):
    """Equilibrium sits numerically on a bifurcation."""


class DeltaBarOutOfRange(DrivenJJError):
    """Detuning bound outside the admissible half-Brillouin interval."""


class NoRoot(DrivenJJError):
    """One-dimensional root search failed to bracket a solution."""


class NoDissipation(DrivenJJError):
    """Operation requires strictly positive damping."""
