"""poincare_lab: numerical checks of thickness-based Poincare inequalities
on parametric semialgebraic domains."""

from .cells import (
    BandCell,
    CellComplex2D,
    Column,
    GraphCell,
    cell_decompose_2d,
    critical_x_values,
    merge_vertical,
)
from .corpus import corpus_names, corpus_path, load_corpus
from .dsl import (
    DomainSpec,
    PolyAtom,
    member,
    parse_domain,
    parse_domain_file,
    print_domain,
)
from .harness import (
    FiberRecord,
    SweepReport,
    grid_points,
    sweep,
    verify_thickness_volume_bound,
    verify_uniform_trend,
)
from .raster import (
    Chord,
    RasterDomain,
    boundary_points_1d,
    boundary_polyline,
    local_components,
    longest_chord,
    margin_field,
    polyline_length,
    rasterize,
    thickness,
    thickness_discrete,
    volume,
    write_mask,
    write_pgm,
)
from .sobolev import (
    CheckRecord,
    DiscreteField,
    GradientOperator,
    PoincareEstimate,
    TraceReport,
    build_gradient,
    discrete_column_inequality,
    grad,
    lp_norm,
    poincare_constant,
    poincare_general_p,
    poincare_p2,
    trace_ratio_battery,
    verify_thickness_bound,
)
from .tangent import (
    BoundarySample,
    BoundarySampleSet,
    MarginReport,
    candidate_directions,
    find_regular_direction,
    margin,
    sample_boundary,
)

__version__ = "0.1.0"

__all__ = [
    "BandCell",
    "BoundarySample",
    "BoundarySampleSet",
    "boundary_points_1d",
    "boundary_polyline",
    "CellComplex2D",
    "CheckRecord",
    "Chord",
    "Column",
    "DiscreteField",
    "DomainSpec",
    "FiberRecord",
    "GradientOperator",
    "GraphCell",
    "MarginReport",
    "PoincareEstimate",
    "PolyAtom",
    "RasterDomain",
    "SweepReport",
    "TraceReport",
    "build_gradient",
    "candidate_directions",
    "cell_decompose_2d",
    "corpus_names",
    "corpus_path",
    "critical_x_values",
    "discrete_column_inequality",
    "find_regular_direction",
    "grad",
    "grid_points",
    "load_corpus",
    "local_components",
    "longest_chord",
    "lp_norm",
    "margin",
    "margin_field",
    "member",
    "merge_vertical",
    "parse_domain",
    "parse_domain_file",
    "poincare_constant",
    "poincare_general_p",
    "poincare_p2",
    "polyline_length",
    "print_domain",
    "rasterize",
    "sample_boundary",
    "sweep",
    "thickness",
    "thickness_discrete",
    "trace_ratio_battery",
    "verify_thickness_bound",
    "verify_thickness_volume_bound",
    "verify_uniform_trend",
    "volume",
    "write_mask",
    "write_pgm",
]
