"""Classical chest X-ray screening pipeline.

Manifest-driven corpus handling, oriented-gradient descriptors, subspace
reduction (PCA, kernel PCA, LDA, discriminant common vectors), a from-scratch
soft-margin SVM, and the statistics harness used to evaluate screening runs.
"""

__version__ = "0.1.0"

from .dataset import (CLASS_ORDER, ClassLabel, CovidStage, FoldPlan, ImageSample,
                      Manifest, ManifestEntry, balance_subsample, holdout_split,
                      ingest_image, load_manifest, save_manifest, stage_of,
                      stratified_kfold)
from .descriptor import (CellNormalization, FeatureMatrix, FeatureVector, HogConfig,
                         OrientationRange, aligned_window, compute_gradients,
                         extract_features, feature_dim, hog_descriptor,
                         load_feature_matrix, save_feature_matrix)
from .kernels import KernelSpec, kernel_matrix
from .reduce import (LabeledMatrix, PointCloud, ReductionModel, back_project,
                     fit_dcv, fit_kpca, fit_lda, fit_pca, load_model, project,
                     save_model, separability_index, top_components)
from .classifier import (BinarySvm, SvmConfig, SvmModel, decision_values,
                         dual_objective, fit_binary_svm, fit_multiclass, load_svm,
                         predict, save_svm)
from .evalstats import (AnovaResult, ComparisonResult, ConfusionMatrix, Scores,
                        ScoreSummary, confusion, fold_summary, oneway_anova,
                        paired_compare, scores)
from .experiments import (CLASS_CONFIGS, EXPERIMENT_NAMES, ExperimentSpec,
                          kfold_cross_validate, run_cellsize_sweep,
                          run_early_detection, run_experiment,
                          run_reduction_compare, run_soa_configs)
from .synthetic import make_grating_corpus
