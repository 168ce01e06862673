"""Python bindings for the hssulv HSS-ULV solver."""

from ._hssulv import (
    FactorizationError,
    HssMatrix,
    KernelKind,
    KernelSpec,
    PointSet,
    UlvFactors,
    build_hss,
    comm_totals,
    construct_error,
    default_config,
    dense_block,
    expected_task_count,
    factorize,
    generate_grid,
    is_valid_grid_size,
    reconstruct_check,
    run_experiment,
    solve_error,
    ulv_factor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
