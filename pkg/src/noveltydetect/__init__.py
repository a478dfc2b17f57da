"""Novelty detection for multiclass problems with missing class labels.

The library scores sets of test points that share one (possibly never-seen)
label. Its main method trains an ensemble of binary classifiers on artificial
partitions of the training classes into presumed-known and presumed-novel
groups; the novelty score of a set is the number of ensemble members voting
novel. Four baseline detectors and a full ROC/EER/AUC cross-validation
harness make the scores comparable.
"""

from .dataset import (
    CsvFormatError,
    LabeledDataset,
    PcaModel,
    SplitSpec,
    SynthSpec,
    apply_pca,
    fit_pca,
    generate_synthetic,
    load_csv,
    merge_datasets,
    save_csv,
    split_per_class,
)
from .softlabel import (
    SoftLabelModel,
    TrainConfig,
    load_softlabel,
    predict_confidence_matrix,
    predict_confidences,
    save_softlabel,
    train_softmax,
)
from .rawscore import (
    class_novelty_score,
    class_novelty_table,
    predicted_assignment,
    raw_novelty_score,
    set_mean_confidence,
)
from .ensemble import (
    BinaryNoveltyClassifier,
    EnsembleModel,
    Partition,
    ScorePair,
    Standardizer,
    build_training_pairs,
    ensemble_novelty_score,
    load_ensemble,
    make_partitions,
    represent_partition,
    save_ensemble,
    score_sets,
    train_ensemble,
    train_ensemble_multi,
    train_linear_svm,
)
from .baselines import (
    ConvergenceError,
    KernelSpec,
    KnfstModel,
    KnnIndex,
    NullSpaceError,
    OcsvmModel,
    default_rbf_gamma,
    knfst_score,
    knfst_train,
    knn_novelty_score,
    max_confidence_score,
    ocsvm_score,
    ocsvm_train,
    simple_threshold_score,
)
from .evaluate import (
    EvalConfig,
    EvalReport,
    EvalRow,
    RocCurve,
    ScoredSet,
    auc,
    eer,
    roc_curve,
    run_cross_validation,
    sample_test_sets,
)
from .analysis import (
    DiagnosticsRecord,
    VoteRates,
    VoteSimulation,
    chernoff_upper_bounds,
    requirement_diagnostics,
    simulate_vote_distribution,
    two_sample_ks,
)

__version__ = "0.1.0"
