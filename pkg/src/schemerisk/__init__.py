"""Mortality risk of small defined-benefit pension schemes."""

from .allocation import (
    AllocationReport,
    allocation_vs_alpha_curve,
    allocation_vs_k_curve,
    euler_allocation,
    systematic_total,
)
from .annuity import (
    AnnuityMoments,
    DiscountBasis,
    MixtureMoments,
    annuity_certain,
    basis_moments,
    mixture_moments,
    scenario_moment,
    scenario_moments,
)
from .lifetable import (
    LifeTable,
    MortalityBasis,
    load_life_table,
    pma92c10,
    rated_survival,
    survival_probability,
)
from .montecarlo import (
    SimulationConfig,
    empirical_euler,
    sample_lifetime,
    simulate,
    simulate_liability,
)
from .scheme import LiabilityMoments, SchemeSpec, UndefinedVcoError, f_factor, liability_moments, vco_curve

__version__ = "0.1.0"
