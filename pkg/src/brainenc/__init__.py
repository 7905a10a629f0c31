"""Ensemble ridge encoders for mapping sentence embeddings to fMRI responses."""

from .data_model import (
    DatasetManifest,
    EmbeddingMatrix,
    SplitSpec,
    VoxelMatrix,
    load_manifest,
    load_tensor,
    make_grouped_split,
    make_split,
    peek_tensor_shape,
    write_tensor,
)
from .ensemble import (
    DynamicFitResult,
    DynamicWeightConfig,
    TaskAccuracyTable,
    WeightVector,
    average_embeddings,
    fit_dynamic_weights,
    literal_power_mean_weights,
    power_weights,
    stack_average,
    stack_pca,
    weighted_average,
)
from .metrics import EvaluationReport, pearson_metric, pearson_per_voxel, two_v_two
from .pca import PcaModel, fit_pca, load_pca, reconstruct, save_pca, transform
from .pipeline import (
    DataBundle,
    ExperimentPlan,
    ModelCache,
    RunResult,
    aggregate,
    bundle_from_matrices,
    load_plan,
    poison_test_rows,
    prepare_bundle,
    run_baselines,
    run_ensembles,
    run_experiment,
    save_artifacts,
)
from .regression import (
    RidgeModel,
    StandardScaler,
    fit_ridge,
    load_ridge,
    normal_equation_residual,
    predict,
    save_ridge,
    select_lambda,
)
from .synthetic import SyntheticConfig, generate_dataset, generate_planted_weights, generate_shared_latent, write_dataset

__version__ = "0.1.0"
