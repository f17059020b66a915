"""Rate regions and relay schemes for the two-user Gaussian MIMO broadcast channel
with a shared digital relay link, plus an exact deterministic-channel laboratory."""
from .bc import BeamformingPlan, ChannelSpec, capacity_region_no_relay, identity_plan
from .gaussian import GaussianSystem, cond_mutual_info, covariance, mutual_info
from .ghf import GhfReport, interfered_user_improvement, failing_noninterfered_improvement
from .region import RateRegion
from .three_stage import ThreeStagePlan, noninterfered_improvement

__all__ = [
    "BeamformingPlan", "ChannelSpec", "GaussianSystem", "GhfReport", "RateRegion",
    "ThreeStagePlan", "capacity_region_no_relay", "cond_mutual_info", "covariance",
    "failing_noninterfered_improvement", "identity_plan", "interfered_user_improvement",
    "mutual_info", "noninterfered_improvement",
]
