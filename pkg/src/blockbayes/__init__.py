"""Classify images from block-wise texture and intensity labels with NB, TAN and FAN networks."""

from .bayesnet import (
    DiscreteDataset,
    NetworkStructure,
    classify_map,
    construct_fan,
    construct_nb,
    construct_tan,
    fit_parameters,
    posterior,
)
from .clustering import Codebook, LabelVector, kmeans_fit, label_image
from .features import FeatureConfig, block_descriptor
from .imageio import BlockGrid, GrayImage, decode_pgm, partition_blocks, read_pgm
from .pipeline import PipelineConfig, TrainedModel, train_model

__version__ = "0.1.0"
