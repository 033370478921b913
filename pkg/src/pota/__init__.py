"""Wetland-cell classification on raster grids with domain-disentangled
transfer and signed adaptive propagation."""

from .classifier import PoTAModel, TrainConfig, TrainReport, train
from .errors import PotaError
from .featurecodec import FeatureSchema, FeatureSpec, RegionDataset, RegionRecords, build_dataset, fit_schema
from .gridgraph import GridGraph, build_grid_graph
from .synthgen import SynthConfig, generate_pair, generate_region

__version__ = "0.1.0"

__all__ = [
    "FeatureSchema",
    "FeatureSpec",
    "GridGraph",
    "PoTAModel",
    "PotaError",
    "RegionDataset",
    "RegionRecords",
    "SynthConfig",
    "TrainConfig",
    "TrainReport",
    "build_dataset",
    "build_grid_graph",
    "fit_schema",
    "generate_pair",
    "generate_region",
    "train",
]
