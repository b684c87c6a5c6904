"""Connectivity-aware distance-map loss, graph extraction and metrics."""

__version__ = "0.1.0"

from .annotate import (  # noqa: F401
    GeoGraph,
    GroundTruth,
    Node,
    build_ground_truth,
    format_graph,
    parse_graph,
    rasterize,
)
from .errors import FileFormatError, ParseError  # noqa: F401
from .extract import (  # noqa: F401
    extract_graph,
    flatten,
    prune,
    skeleton_to_graph,
    thin,
    threshold,
)
from .gridfile import (  # noqa: F401
    grid_from_bytes,
    grid_to_bytes,
    read_grid,
    read_labels,
    read_mask,
    write_grid,
    write_labels,
    write_mask,
)
from .grids import (  # noqa: F401
    BinaryMask,
    LabelGrid,
    ScalarGrid,
    WindowSpec,
    connected_components,
    crop,
    dilate,
    distance_transform,
    tile,
)
from .loss import (  # noqa: F401
    GradCheckReport,
    LossBreakdown,
    LossConfig,
    PairWeights,
    compute_pair_weights,
    grad_check,
    loss_conn,
    loss_dis,
    loss_mse,
    total_loss,
)
from .metrics import (  # noqa: F401
    MetricConfig,
    MetricReport,
    apls,
    ccq,
    evaluate,
    holes_marbles,
    jct,
    path_score,
    shortest_path_length,
    tlts,
)
from .selftest import run_selftest  # noqa: F401
