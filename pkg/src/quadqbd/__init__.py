"""Quadrant random walks as level-dependent quasi-birth-and-death processes."""

__version__ = "0.1.0"

from .mapping import LevelLayout, State1D, level_layout, state_index, to_level_phase, to_planar
from .model import (
    Generator2D,
    ModelSpec,
    RegionRule,
    State2D,
    build_generator_2d,
    load_model,
    resolve,
    save_model,
    validate_model,
)
from .qbd import GeneratorBlocks, build_block, build_block_formula, build_blocks_up_to
from .solvers import (
    SolverConfig,
    compute_G,
    compute_R,
    expected_hitting_time,
    hitting_time_cdf,
    solve_stationary,
    stationary,
    transient,
)
