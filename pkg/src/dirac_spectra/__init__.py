"""Point spectrum of the radial Coulomb-Dirac operator with an anomalous magnetic
moment, computed by Pruefer-angle shooting."""

from .distinguished import Which, classify_limit, phase_drop_bounds, simplified_limit, solve_distinguished
from .errors import (
    ConvergenceError,
    DiracSpectraError,
    DomainError,
    GridTooCoarseError,
    NumericalError,
    RiccatiPoleError,
    StepSizeError,
    UnresolvedClassificationError,
)
from .exceptional import ExceptionalTable, c0_analytic_bound, find_exceptional, max_safe_Z, min_count
from .model import (
    ModelParams,
    asymptotic_angles,
    coupling_windows,
    from_physical,
    infinity_angles,
    sommerfeld_eigenvalue,
)
from .odecore import AngleTrace, Equation, EquationKind, StepControl, integrate
from .spectral import (
    EigenResult,
    MatchConfig,
    eigenfunction,
    find_eigenvalues,
    mismatch,
    stability_certificate,
    sweep_anomaly,
    variant_gap,
)

__version__ = "0.1.0"
