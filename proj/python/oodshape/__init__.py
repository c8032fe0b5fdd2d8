"""Piecewise-constant feature shaping for out-of-distribution detection."""

from ._core import (  # noqa: F401
    AshB,
    AshP,
    AshS,
    BFAct,
    DiceMask,
    Identity,
    IntervalPartition,
    OodShapeError,
    PiecewiseConstant,
    ReAct,
    VraP,
    apply,
    auroc,
    dice_mask,
    fit_partition,
    fpr_at_tpr,
    isfi_vector,
    load_tensor,
    mean_isfi,
    run,
    save_tensor,
    score_dataset,
    solve_alternating,
    solve_id_only,
    solve_with_ood,
    theta_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
