from .audits import (
    BBMRow,
    BlowupRow,
    BlowupTable,
    LocalizationResult,
    LocalizationStudy,
    bbm_limit_check,
    distance_power_integral,
    fit_slope,
    gradient_blowup,
    localization_audit,
    localization_study,
    regularity_blowup,
)
from .constants import OptimalIndices, optimal_indices, scaling_constant, sobolev_number, sphere_moment
from .models import ModelFunction, model_registry, register_model
from .seminorm import Region, RegionKind, SeminormQuery, SeminormResult, evaluate, seminorm
