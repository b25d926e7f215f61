"""Evaluation measures for video moment retrieval, with axiom checks and
the agreement, stability, label-noise and model-selection experiments."""

from .errors import (
    AxiouError,
    DegenerateAnnotation,
    DuplicateKey,
    EmptyQuerySet,
    Infeasible,
    InsufficientQueries,
    InvalidInput,
    InvalidInterval,
    InvalidParameter,
    MissingAnnotation,
    MissingPrediction,
    ParseError,
    SpecParseError,
    UndefinedCorrelation,
)
from .measures import (
    Evaluation,
    Family,
    GroundTruth,
    Interval,
    MeasureSpec,
    RankedList,
    RelevanceList,
    Run,
    ap_at,
    axiou_at,
    dcg_at,
    evaluate_all,
    mean_measure,
    ncxiou,
    parse_specs,
    recall_at,
    relevance_list,
    temporal_iou,
)
from .axioms import Axiom, Perturbation, PerturbationKind, check_axiom, generate_perturbation, satisfaction_matrix
from .rankstats import AgreementMatrix, SystemRanking, agreement_matrix, all_tied_ratio, kendall_tau_b, rank_systems
from .experiments import (
    NoiseConfig,
    NoiseReport,
    SelectionReport,
    StabilityReport,
    model_selection,
    noise_experiment,
    noisy_annotation,
    stability_experiment,
)
from .theory import NoiseTheoryPoint, axiou1_theory, norm_cdf, recall1_theory, theory_sweep
from .io import DatasetBundle, load_bundle, load_ground_truth, load_run, write_report
from .synth import ScenarioConfig, SystemProfile, bundled_paper_scenario, generate_scenario

__version__ = "0.1.0"
