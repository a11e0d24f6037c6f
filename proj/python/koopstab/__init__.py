"""Data-driven bilinear Koopman identification and CLF-based stabilization."""

from ._core import (
    BilinearModel,
    Controller,
    Dataset,
    Dictionary,
    ErrorCurve,
    KoopstabError,
    PipelineOutcome,
    QuadraticCLF,
    SimulationResult,
    StabilizabilityReport,
    System,
    build_dictionary,
    check_stabilizability,
    clf_terms,
    controller,
    duffing,
    feedback,
    fit_bilinear_model,
    generate_dataset,
    load_clf,
    load_dataset,
    load_model,
    lorenz,
    model_error,
    nine_bus,
    predict,
    run_pipeline,
    sample_complexity_sweep,
    save_clf,
    save_curve,
    save_dataset,
    save_model,
    simulate_closed_loop,
    simulate_open_loop,
    solve_clf,
)

__all__ = [
    "BilinearModel",
    "Controller",
    "Dataset",
    "Dictionary",
    "ErrorCurve",
    "KoopstabError",
    "PipelineOutcome",
    "QuadraticCLF",
    "SimulationResult",
    "StabilizabilityReport",
    "System",
    "build_dictionary",
    "check_stabilizability",
    "clf_terms",
    "controller",
    "duffing",
    "feedback",
    "fit_bilinear_model",
    "generate_dataset",
    "load_clf",
    "load_dataset",
    "load_model",
    "lorenz",
    "model_error",
    "nine_bus",
    "predict",
    "run_pipeline",
    "sample_complexity_sweep",
    "save_clf",
    "save_curve",
    "save_dataset",
    "save_model",
    "simulate_closed_loop",
    "simulate_open_loop",
    "solve_clf",
]
