"""Envelope-theory solvers for bound states of identical and two-species systems.

The compact equations are solved in :mod:`envelope.compact`, the equivalent
auxiliary-parameter formulation lives in :mod:`envelope.extremization` and
independent reference energies come from :mod:`envelope.oracle`.
"""

from .compact import (
    RESIDUAL_ORDER,
    SolverConfig,
    derived_means,
    energy_from_means,
    residuals,
    solve,
    solve_identical,
    solve_na_plus_one,
    solve_two_body,
    solve_two_species,
)
from .errors import (
    ConvergenceError,
    DegenerateLawError,
    DomainError,
    EnvelopeError,
    InvalidInputError,
    NoBindingError,
)
from .extremization import (
    AuxiliaryEnergyBreakdown,
    auxiliary_energy,
    b_function,
    extremize,
    harmonic_eigenvalue,
)
from .laws import (
    KineticLaw,
    NonRelativistic,
    PotentialLaw,
    PowerLaw,
    PowerLawKinetic,
    Relativistic,
    SumOfPowerLaws,
    UltraRelativistic,
    aux_kinetic_inverse,
    aux_potential_inverse,
    coulomb,
    harmonic,
    kinetic_derivative,
    kinetic_value,
    linear,
    potential_derivative,
    potential_value,
)
from .model import (
    MEAN_NAMES,
    AuxiliaryParameters,
    IdenticalSystemSpec,
    Solution,
    TwoSpeciesSystemSpec,
    boson_ground_q,
    global_quantum_number,
    min_q,
    pair_count,
)
from .oracle import OracleResult, exact_ho_energy, radial_two_body, two_body_q

__version__ = "0.1.0"
