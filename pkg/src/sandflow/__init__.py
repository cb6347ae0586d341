"""Finite-element simulation of growing sandpiles.

Two fully discrete schemes for the gradient-constrained surface evolution
with flux recovery: a P1 surface with elementwise flux solved by
augmented-Lagrangian splitting, and a P0 surface with divergence-conforming
edge fluxes solved by a linearized power-law iteration.
"""

from .analytic import (
    ex1_flux,
    ex1_surface,
    ex1_tstar,
    ex3_flux,
    ex3_radii,
    ex3_surface,
    rel_l1_error_flux,
    rel_l1_error_surface,
)
from .fem import (
    CellField,
    CellVectorField,
    EdgeFluxField,
    NodalField,
    SparseSPD,
    assemble_qa_matrix,
    assemble_qb_matrix,
    lumped_inner,
    p0_project,
    p1_gradient,
    p1_interpolate,
    rt0_divergence,
    rt0_evaluate,
    rt0_interpolate,
    rt0_lumped_form,
)
from .linalg import SolveOptions, solve_spd
from .material import (
    ModelParams,
    SourceSpec,
    SupportSpec,
    build_support,
    m_eps_h,
    m_eps_point,
    source_field_cells,
    source_field_nodes,
)
from .mesh import (
    TriMesh,
    build_edge_topology,
    generate_disk_mesh,
    generate_square_mesh,
    load_mesh,
    mesh_quality,
    write_mesh,
)
from .scenarios import (
    BUILTIN_SCENARIOS,
    ScenarioConfig,
    builtin_scenario,
    parse_scenario,
    parse_scenario_text,
    run_scenario,
)
from .solver_a import StoppingParamsA, run_qa
from .solver_b import StoppingParamsB, run_qb

__version__ = "0.1.0"
