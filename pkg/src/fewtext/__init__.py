"""Semi-supervised few-shot text classification with contrastive consistency.

A desk-scale training library: a hashed-feature MLP encoder trained
with cross entropy plus a supervised contrastive term on a handful of
labeled examples, and KL-consistency plus contrastive-consistency terms
on unlabeled original/augmented pairs, all on a hand-rolled float64
reverse-mode tape so every gradient is finite-difference checkable.
"""

from .autodiff import Tensor, backward
from .config import RunConfig, resolve_config
from .corpus import CorpusSplit, Example, LabelMap, load_dataset, make_split, three_seed_splits
from .encoder import EncoderParams, encode, featurize, init_params, load_checkpoint, save_checkpoint
from .errors import ConfigError, ContractError, DataError, FewtextError, NumericFault
from .evaluate import RunMetrics, ablate, accuracy, aggregate, export_embeddings, format_metrics
from .losses import LabeledBatch, LossConfig, UnlabeledPairBatch, cc_distributions, cc_loss, ce_loss, consistency_loss, scl_loss
from .trainer import TrainResult, adam_step, alpha_schedule, lr_schedule, total_loss, train

__version__ = "0.1.0"
