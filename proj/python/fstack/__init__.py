"""Depth-from-focus toolkit: synthetic focal stacks, a from-scratch CNN,
and a classical shape-from-focus baseline."""

from fstack._fstack import (  # noqa: F401
    ConfigError,
    FormatError,
    Model,
    NumericError,
    ShapeError,
    apply_homography,
    coc_radius_px,
    crop_resize,
    crop_resize_depth,
    depth_to_heatmap,
    dff_depth,
    dilate,
    erode,
    focus_measure,
    gaussian_blur,
    gaussian_blur_image,
    gen_scene,
    generate_dataset,
    load_model,
    load_stack,
    render_stack,
    run_experiment,
    save_stack,
    train_cnn,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "Model",
    "NumericError",
    "ShapeError",
    "apply_homography",
    "coc_radius_px",
    "crop_resize",
    "crop_resize_depth",
    "depth_to_heatmap",
    "dff_depth",
    "dilate",
    "erode",
    "focus_measure",
    "gaussian_blur",
    "gaussian_blur_image",
    "gen_scene",
    "generate_dataset",
    "load_model",
    "load_stack",
    "render_stack",
    "run_experiment",
    "save_stack",
    "train_cnn",
]
