"""Prostate-zone segmentation pipeline on synthetic MRE phantoms."""

from _zoneforge import (  # noqa: F401
    ComboError,
    EmptyMaskError,
    MAP_KINDS,
    ShapeError,
    StatsError,
    Unet,
    ZoneforgeError,
    __version__,
    adc_fit,
    canonical_combos,
    ce_loss,
    dice,
    generate_phantom,
    hausdorff_mm,
    sample_displacement,
    sen_spc,
    synth_dwi,
    validate_combo,
    welch_t,
)
