"""Rogue sensor detection with DTW-guided triplet embeddings and DBSCAN."""

from rogue_sensors.data import Dataset, SensorSeries, load_csv, normalize
from rogue_sensors.dtw import dtw_distance, dtw_matrix
from rogue_sensors.sampler import Triplet, furthest_neighbors, sample_triplet
from rogue_sensors.encoder import EncoderConfig, EncoderParams, embed_all, forward, init_params
from rogue_sensors.training import TrainConfig, adam_step, train, triplet_loss
from rogue_sensors.clustering import dbscan, find_knee, k_distance_curve, select_epsilon
from rogue_sensors.evaluation import adjusted_rand_index
from rogue_sensors.simgen import SimConfig, generate

__all__ = [
    "Dataset",
    "SensorSeries",
    "load_csv",
    "normalize",
    "dtw_distance",
    "dtw_matrix",
    "Triplet",
    "furthest_neighbors",
    "sample_triplet",
    "EncoderConfig",
    "EncoderParams",
    "init_params",
    "forward",
    "embed_all",
    "TrainConfig",
    "triplet_loss",
    "adam_step",
    "train",
    "k_distance_curve",
    "find_knee",
    "dbscan",
    "select_epsilon",
    "adjusted_rand_index",
    "SimConfig",
    "generate",
]
