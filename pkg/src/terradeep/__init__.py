"""Terrain and slip classification for planetary rovers.

Sliding-variance slip features, HOG image descriptors, a numpy neural
network engine (dense, 1-D / 2-D convolution, max-pooling, dropout;
adadelta and sgd), an RBF-kernel SVM trained by SMO, a catalog of pinned
learner configurations, synthetic stand-in corpora and a repeated hold-out
evaluation protocol.
"""
from .core import Standardizer, Stream, seeded_rng
from .datasets import (LabeledDataset, SensorFrame, SplitPlan, holdout_split, load_image_dir,
                       load_sensor_csv, synth_slip, synth_terrain)
from .evaluation import (EvalReport, accuracy, confusion, epoch_stability, prepare_dataset,
                         run_experiment)
from .network import NetworkSpec, TrainConfig, TrainedModel, gradient_check, predict, train
from .svm import SvmConfig, one_vs_one_train, smo_train
from .tdml import load_model, save_model
from .zoo import build, list_catalog

__version__ = "0.1.0"
