"""Photo-anthropometric indexes from frontal-face landmarks, with descriptive
statistics and MLP classifiers for sex, age and age-threshold estimation."""

from .errors import PhotoAnthroError
from .evaluation import CvPlan, EvalReport, confusion_matrix, cross_validate, f1_score, score_report
from .experiments import ExperimentSpec, build_group_a, build_group_b, build_group_c, run_suite, write_suite
from .ingest import (
    Dataset,
    FaceRecord,
    Landmark,
    LandmarkId,
    LandmarkSet,
    PaiTable,
    Side,
    parse_landmark_csv,
    parse_pai_csv,
    write_landmark_csv,
    write_pai_csv,
)
from .mlp import MlpConfig, MlpModel, load_model, predict, save_model, train
from .pai import compute_dataset_pais, compute_pai_vector, enumerate_pais, iris_ratio
from .stats import anova_two_way, boxplot_summary, run_descriptives, shapiro_wilk
from .synth import GrowthModel, default_growth_model, generate

__version__ = "0.1.0"
