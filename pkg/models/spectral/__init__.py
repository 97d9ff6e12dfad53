from .core import (
    Direction,
    Field,
    Frame,
    Grid,
    NormKind,
    NormTag,
    Side,
    apply_multiplier,
    asymmetry,
    cone_mask,
    dealiased_product,
    inner_product,
    make_grid,
    multiplier_table,
    norm,
    norm_weight,
    physical_image,
    pointwise_square,
    project_admissible,
    project_cone,
    symmetrize,
    transform,
)

__all__ = [
    "Direction",
    "Field",
    "Frame",
    "Grid",
    "NormKind",
    "NormTag",
    "Side",
    "apply_multiplier",
    "asymmetry",
    "cone_mask",
    "dealiased_product",
    "inner_product",
    "make_grid",
    "multiplier_table",
    "norm",
    "norm_weight",
    "physical_image",
    "pointwise_square",
    "project_admissible",
    "project_cone",
    "symmetrize",
    "transform",
]
