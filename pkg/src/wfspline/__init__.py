"""Worsey-Farin C1 cubic splines on tetrahedral meshes and spline-based solution transfer."""

from .bernstein import CubicBForm, bernstein_basis, decasteljau_eval, decasteljau_gradient, multi_indices
from .bvh import build_bvh, locate_points
from .coefficients import COEFF_MAP, HermiteData, MacroCoefficients, WFSpline, compute_all_coefficients
from .fields import AnalyticField, get_field, u1, u2
from .mesh import DegenerateTetError, GeometryError, MeshError, TetMesh
from .meshgen import source_mesh, target_mesh
from .mshio import load_mesh, save_mesh
from .quadrature import AdaptiveConfig, QuadRule, integrate_adaptive, rule_56
from .smoothing import PiecewiseField, synchronize
from .split import SplitSet, build_splits, build_wf_split
from .transfer import (
    GlobalDofTable,
    MassReport,
    TransferConfig,
    build_dof_table,
    global_spline_projection,
    l2_error,
    mass,
    project_analytic,
    transfer_l2,
    transfer_linear,
    transfer_wf,
)

__version__ = "0.1.0"

__all__ = [
    "CubicBForm",
    "bernstein_basis",
    "decasteljau_eval",
    "decasteljau_gradient",
    "multi_indices",
    "build_bvh",
    "locate_points",
    "COEFF_MAP",
    "HermiteData",
    "MacroCoefficients",
    "WFSpline",
    "compute_all_coefficients",
    "AnalyticField",
    "get_field",
    "u1",
    "u2",
    "DegenerateTetError",
    "GeometryError",
    "MeshError",
    "TetMesh",
    "source_mesh",
    "target_mesh",
    "load_mesh",
    "save_mesh",
    "AdaptiveConfig",
    "QuadRule",
    "integrate_adaptive",
    "rule_56",
    "PiecewiseField",
    "synchronize",
    "SplitSet",
    "build_splits",
    "build_wf_split",
    "GlobalDofTable",
    "MassReport",
    "TransferConfig",
    "build_dof_table",
    "global_spline_projection",
    "l2_error",
    "mass",
    "project_analytic",
    "transfer_l2",
    "transfer_linear",
    "transfer_wf",
]
