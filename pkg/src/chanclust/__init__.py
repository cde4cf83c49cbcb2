"""Channel strategies (CD, CI, self-clustering, rearrangement) for multivariate forecasting."""

from .core import Adam, AffineLayer, RevInState, mae, mse, revin_denormalize, revin_normalize, swish
from .data import SyntheticSpec, TimeSeriesDataset, WindowStream, load_csv, split, synthesize
from .evaluation import (ClusterPartition, ErrorMatrix, adjusted_rand_index, cluster_stability,
                         cross_channel_grid, evaluate, normalize_matrix, rand_index)
from .strategies import (LinearBank, MappingVector, MlpModel, compute_error_matrix, cr_schedule,
                         csc_schedule, select_layers)
from .training import ExperimentConfig, RunRecord, run, run_matrix

__version__ = "0.1.0"
