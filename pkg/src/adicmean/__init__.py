"""4-adic digit streams with a prescribed mean and non-convergent digit frequencies."""

from .classify import CheckpointLadder, ConvergenceVerdict, classify, lemma1_check, recover_frequencies, track
from .constructors import (
    BlockPlan,
    EpsilonBlockSpec,
    StochasticVector,
    block_number,
    epsilon_block_number,
    permute_blocks,
    theta2_witness,
    theta3_witness,
)
from .digitcore import Alphabet, DigitStream, PrefixStats, relative_frequency, relative_mean
from .errors import AdicError, DomainError, InfeasibleError, SpecError, StreamFormatError
from .fractal import (
    CylinderCoverSpec,
    besicovitch_eggleston_dimension,
    box_counting_estimate,
    cover_alpha_volume,
    crossover_dimension,
)
from .kernels import BACKEND

__version__ = "0.1.0"
