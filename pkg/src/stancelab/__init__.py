"""Stance detection with sarcasm pretraining at desk scale."""

__version__ = "0.1.0"

from .datasets import (
    STANCE_CLASSES,
    SARCASM_CLASSES,
    ClassWeights,
    CrossTargetSplit,
    LabeledText,
    SarcasmDataset,
    SarcasmLabel,
    StanceDataset,
    StanceLabel,
    assemble_cross_target,
    class_weights,
    kfold,
    load_sarcasm_dataset,
    load_stance_dataset,
    ratio_split,
)
from .estimators import ConvBiLstmClassifier, SequenceEncoder, TextNormalizer
from .metrics import (
    ConfusionMatrix,
    EvalResult,
    PredictionRecord,
    SimilarityReport,
    confusion,
    failure_report,
    macro_f1_favor_against,
    per_class_f1,
    sarcasm_recovery,
    target_similarity,
)
from .network import (
    Model,
    ModelConfig,
    build_model,
    forward,
    load_checkpoint,
    save_checkpoint,
    swap_head,
)
from .preprocessing import (
    EncodedText,
    NormalizerConfig,
    SegmentationLexicon,
    Vocab,
    build_vocab,
    encode,
    normalize,
    segment_hashtag,
)
from .training import (
    EarlyStopping,
    ExperimentSpec,
    TrainConfig,
    TrainHistory,
    finetune_target,
    lr_schedule,
    pretrain_intermediate,
    run_ablation,
    run_experiment,
    train,
)
