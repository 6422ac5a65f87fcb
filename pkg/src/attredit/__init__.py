"""attredit: encoder-decoder GAN toolkit for facial attribute editing.

A single model encodes a face, then decodes it conditioned on a target
attribute vector. Training combines a classification constraint on the
edited image, l1 reconstruction under the source attributes, and a
Wasserstein critic with gradient penalty. Continuous attribute values give
intensity control at inference, and an optional mutual-information
extension adds unsupervised per-attribute style manipulation.
"""

from .attributes import (
    AnnotationFormatError,
    AttributeVector,
    DatasetManifest,
    DEFAULT_ATTRIBUTE_NAMES,
    assign_split,
    parse_attribute_annotations,
    sample_target_attributes,
    serialize_annotations,
    split_manifest,
)
from .data import (
    ArrayDataset,
    dataset_from_synthetic,
    load_image_dataset,
    preprocess_image,
    split_dataset,
)
from .evaluation import (
    EvalReport,
    JudgeConfig,
    editing_accuracy,
    evaluate_editor,
    intensity_sweep,
    model_editor,
    oracle_editor,
    preservation_error,
    probe_judge,
    sweep_rank_correlation,
    train_independent_classifier,
)
from .losses import (
    LossReport,
    LossWeights,
    adversarial_losses,
    classification_loss_generated,
    classification_loss_real,
    compose_objectives,
    gradient_penalty,
    reconstruction_loss,
)
from .networks import (
    ArchitectureConfig,
    AttrEditModel,
    LatentCode,
    LayerSpec,
    compact_config,
    table_config,
)
from .style import (
    StyleConfig,
    StyleControllers,
    mutual_information_loss,
    sample_style_controllers,
)
from .synthetic import (
    SYNTHETIC_ATTRIBUTE_NAMES,
    SyntheticDataset,
    SyntheticSpec,
    generate_synthetic_dataset,
    probe_attributes,
    write_synthetic_dataset,
)
from .training import (
    TrainConfig,
    TrainState,
    TrainingAborted,
    attr_indep_adversary_step,
    init_train_state,
    load_train_state,
    model_from_checkpoint,
    save_model_checkpoint,
    save_train_state,
    train_loop,
    train_step_dc,
    train_step_g,
)

__version__ = "0.1.0"
