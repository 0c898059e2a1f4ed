"""Domain-decomposition reduced-order models for the 2-D steady Burgers FOM."""

from .burgers import (
    Grid2D,
    ParameterPoint,
    assemble,
    exact_solution,
    exact_state,
    jacobian,
    residual,
    solve_monolithic,
)
from .errors import ConvergenceError, FormatError, SingularityError
from .partition import (
    Partition,
    build_partition,
    assemble_fom_constraints,
    assemble_rom_constraints,
    partition_from_pattern,
)
from .pod import LinearMap, PodBasis, pod, port_interface_basis
from .autoencoder import (
    Autoencoder,
    TrainConfig,
    build_mask,
    load_net,
    save_net,
    train,
)
from .hyper import HrOperator, greedy_sample, hr_collocation, hr_gappy
from .sqp import SqpConfig, SqpProblem, iterate
from .driver import (
    RomInstance,
    RomSolution,
    attach_hr,
    benchmark_sweep,
    build_dd_fom,
    build_lsrom,
    build_nmrom,
    fit_initializer,
    relative_error,
    solve_rom,
    verify_bounds,
)

__version__ = "0.1.0"
