"""nodalab: nodal-domain geometry of Laplace eigenfunctions on flat boxes
and tori, measured numerically.

The package builds exact eigenfunctions, extracts nodal domains and their
inner radii, measures doubling indices and growth chains, evaluates exact
heat kernels and discrete condenser flows, and fits the scaling laws that
tie them together.
"""

from .spectra import (
    Geometry,
    EigenMode,
    ScalarGrid,
    box,
    torus,
    box_mode,
    torus_eigenspace,
    random_combination,
    random_mode,
    sample_field,
    sample_function,
    min_resolution,
    SplitMix64,
)
from .regions import Ball, Cube, region_sup
from .nodal import (
    DomainLabeling,
    label_nodal_domains,
    inradius_report,
    centered_inradius,
    deficiency_ratio,
    classical_bounds_report,
)
from .doubling import (
    ChainReport,
    RemezWitness,
    doubling_index,
    run_chain,
    df_sweep,
    remez_witness,
    gradient_check,
    main_theorem_sweep,
)
from .condensers import CondenserSpec, concentric_sphere_condenser, unit_box_condenser
from .heat import (
    KernelSpec,
    HeatFlowState,
    kernel_eval,
    heat_flow_psi,
    equilibrium_potential,
    deficit_identity_check,
    intersection_check,
    kernel_bound_report,
)
from .capacity import (
    CapacityResult,
    variational_capacity,
    capacity_heat_bound_check,
    nodal_capacity_experiment,
    mazya_check,
)
from .cli import ExperimentConfig, ScalingFit, fit_scaling, run_experiment

__version__ = "0.1.0"
