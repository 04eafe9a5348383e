"""Gradient variance of qMPS, qTTN and qMERA circuits, computed three ways."""

from .circuit import Circuit, Gate, Observable, ParamId, build_ansatz, causal_cone, variance_is_zero
from .closed_form import fit_power_law, var_qmps, var_qmps_xx, var_qttn_x1, var_qttn_xn
from .oracle import VarianceEstimate, grid_variance, mc_variance
from .zx import contract_variance_all_params, contract_variance_tn

__all__ = [
    "Circuit", "Gate", "Observable", "ParamId", "VarianceEstimate",
    "build_ansatz", "causal_cone", "variance_is_zero",
    "contract_variance_tn", "contract_variance_all_params",
    "grid_variance", "mc_variance",
    "fit_power_law", "var_qmps", "var_qmps_xx", "var_qttn_x1", "var_qttn_xn",
]
