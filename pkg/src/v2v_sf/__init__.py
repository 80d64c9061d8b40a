"""Signal-fraction analysis of inter-lane V2V links on Matérn hard-core lanes."""

from .errors import ConfigError, ContractError, NumericalError, ParameterError, V2VError
from .hardcore_process import (
    HardCoreConfig,
    PointSet1D,
    Window1D,
    estimate_densities,
    first_order_density,
    matern_thin,
    sample_mhcp,
    sample_ppp,
    second_order_density,
)
from .lane_geometry import (
    AntennaCase,
    DistanceModel,
    Geometry,
    LaneLayout,
    VehicleField,
    cdf_within_two_d,
    deploy_field,
    lambda_r,
    nearest_vehicle,
    overlap_probability_bound,
)
from .link_analysis import (
    CcdfCurve,
    InterferenceConstants,
    RadioConfig,
    approx_large,
    approx_small,
    coverage_ccdf,
    interference_I1,
    interference_I2,
    mh_inverse,
    mh_transform,
    noise_ratio,
    sf_ccdf,
    target_sinr,
    upper_limit,
)
from .monte_carlo import SimConfig, TrialOutcome, baseline_ppp_ccdf, run_campaign, simulate_trial

__version__ = "0.1.0"
